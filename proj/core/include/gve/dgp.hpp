#pragma once

// Monte Carlo data generators.
//
// One-factor design:      y_ij = lambda_i f_j + u_ij
// Factor-augmented design: y_ij = b0 + b1 x1_ij + b2 x2_ij + lambda_i f_j + u_ij,
//                          x_s,ij = a_s lambda_i + b_s f_j + c_s lambda_i f_j + v_s,ij
// with f_j = rho f_{j-1} + eta_j, eta ~ U[0,1], started at 1 and run through
// `burn_in - 1` discarded steps before the J kept values.

#include "gve/panel.hpp"

#include <array>
#include <cstdint>
#include <limits>

namespace gve {

/// Counter-based 64-bit generator: the SplitMix64 output function applied to
/// a Weyl sequence whose start is derived from (seed, replication, family).
/// Distinct keys give independent streams, so replications can run in any
/// order or thread and draw identical numbers.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint64_t family) noexcept;

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }
    result_type operator()() noexcept;

    /// Uniform on [0, 1) with 53 random bits.
    double uniform() noexcept;

private:
    std::uint64_t state_;
};

/// Stream identifiers within one replication.
enum class Stream : std::uint64_t { Factor = 1, Loading = 2, Error = 3, Regressor = 4, Mixture = 5 };

enum class DgpKind { OneFactor, FactorAugmented };
enum class ErrorLaw { Gaussian, T3 };
enum class LoadingDesign {
    Uniform,       // U[0.5, 3.5]
    StdNormal,     // N(0, 1)
    Mixed,         // N(0, 1) for the first ceil(0.9 N), 0.5 theta_i / sum theta for the rest
};

struct SlopeParams {
    double beta0 = 0.0;
    std::array<double, 2> beta{1.0, 1.0};
    std::array<double, 2> a{1.0, 0.0};
    std::array<double, 2> b{2.0, 0.0};
    std::array<double, 2> c{0.5, 0.0};
};

struct DgpSpec {
    DgpKind kind = DgpKind::OneFactor;
    int n = 50;
    int j = 10;
    ErrorLaw error_law = ErrorLaw::Gaussian;
    LoadingDesign loading_design = LoadingDesign::Uniform;
    double rho = 0.8;
    /// S: the factor starts at f_{1-S} = 1.
    int burn_in = 50;
    SlopeParams slope;
    std::uint64_t seed = 1;
    std::uint64_t replication = 0;
    /// Mixed design: normalize theta over every subject instead of the tail.
    bool mixture_sum_over_all = false;

    // Test hooks; the defaults reproduce the designs above.
    double error_scale = 1.0;       // u is multiplied by this
    double innovation_scale = 1.0;  // eta is multiplied by this
    double factor_scale = 1.0;      // f -> c f, lambda -> lambda / c

    /// Throws ValidationError.
    void validate() const;
};

struct DgpDraw {
    PanelData panel;
    Vector lambda;  // N
    Vector f;       // J
    Vector beta;    // p (empty for the one-factor design)
    Matrix u;       // N x J
};

Vector gen_factor_path(const DgpSpec& spec);

DgpDraw gen_one_factor(const DgpSpec& spec);

DgpDraw gen_factor_augmented(const DgpSpec& spec);

/// Dispatches on spec.kind.
DgpDraw generate(const DgpSpec& spec);

}  // namespace gve
