#include "gve/dgp.hpp"

#include "gve/errors.hpp"

#include <cmath>
#include <random>
#include <string>

namespace gve {

namespace {

constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

CounterRng stream(const DgpSpec& spec, Stream s) {
    return CounterRng(spec.seed, spec.replication, static_cast<std::uint64_t>(s));
}

Vector draw_loadings(const DgpSpec& spec) {
    CounterRng rng = stream(spec, Stream::Loading);
    Vector lambda(spec.n);
    switch (spec.loading_design) {
        case LoadingDesign::Uniform: {
            std::uniform_real_distribution<double> dist(0.5, 3.5);
            for (int i = 0; i < spec.n; ++i) lambda(i) = dist(rng);
            break;
        }
        case LoadingDesign::StdNormal: {
            std::normal_distribution<double> dist(0.0, 1.0);
            for (int i = 0; i < spec.n; ++i) lambda(i) = dist(rng);
            break;
        }
        case LoadingDesign::Mixed: {
            const int m = static_cast<int>(std::ceil(0.9 * spec.n));
            std::normal_distribution<double> normal(0.0, 1.0);
            for (int i = 0; i < m; ++i) lambda(i) = normal(rng);
            CounterRng mix_rng = stream(spec, Stream::Mixture);
            std::vector<double> theta(static_cast<std::size_t>(spec.n), 0.0);
            double tail_sum = 0.0;
            double all_sum = 0.0;
            for (int i = 0; i < spec.n; ++i) {
                theta[static_cast<std::size_t>(i)] = mix_rng.uniform();
                all_sum += theta[static_cast<std::size_t>(i)];
                if (i >= m) tail_sum += theta[static_cast<std::size_t>(i)];
            }
            const double denom = spec.mixture_sum_over_all ? all_sum : tail_sum;
            for (int i = m; i < spec.n; ++i) {
                lambda(i) = denom > 0.0 ? 0.5 * theta[static_cast<std::size_t>(i)] / denom : 0.0;
            }
            break;
        }
    }
    return lambda / spec.factor_scale;
}

Matrix draw_errors(const DgpSpec& spec) {
    CounterRng rng = stream(spec, Stream::Error);
    Matrix u(spec.n, spec.j);
    if (spec.error_law == ErrorLaw::Gaussian) {
        std::normal_distribution<double> dist(0.0, 1.0);
        for (int i = 0; i < spec.n; ++i)
            for (int j = 0; j < spec.j; ++j) u(i, j) = dist(rng);
    } else {
        std::student_t_distribution<double> dist(3.0);
        for (int i = 0; i < spec.n; ++i)
            for (int j = 0; j < spec.j; ++j) u(i, j) = dist(rng);
    }
    return u * spec.error_scale;
}

}  // namespace

CounterRng::CounterRng(std::uint64_t seed, std::uint64_t replication, std::uint64_t family) noexcept
    : state_(mix(mix(mix(seed + kGolden) ^ (replication + 0x632BE59BD9B4E019ULL)) ^ (family * kGolden))) {}

CounterRng::result_type CounterRng::operator()() noexcept {
    state_ += kGolden;
    return mix(state_);
}

double CounterRng::uniform() noexcept {
    return static_cast<double>((*this)() >> 11) * 0x1.0p-53;
}

void DgpSpec::validate() const {
    if (n < 2) throw ValidationError("DGP needs n >= 2");
    if (j < 3) throw ValidationError("DGP needs j >= 3");
    if (!(rho > -1.0 && rho < 1.0)) throw ValidationError("rho must lie in (-1, 1)");
    if (burn_in < 1) throw ValidationError("burn_in must be at least 1");
    if (!(factor_scale != 0.0) || !std::isfinite(factor_scale)) throw ValidationError("factor_scale must be finite and nonzero");
    if (!std::isfinite(error_scale) || !std::isfinite(innovation_scale)) throw ValidationError("DGP scales must be finite");
}

Vector gen_factor_path(const DgpSpec& spec) {
    spec.validate();
    CounterRng rng = stream(spec, Stream::Factor);
    double f = 1.0;
    for (int s = 1; s < spec.burn_in; ++s) f = spec.rho * f + spec.innovation_scale * rng.uniform();
    Vector out(spec.j);
    for (int j = 0; j < spec.j; ++j) {
        f = spec.rho * f + spec.innovation_scale * rng.uniform();
        out(j) = f;
    }
    return out * spec.factor_scale;
}

DgpDraw gen_one_factor(const DgpSpec& spec) {
    if (spec.kind != DgpKind::OneFactor) throw ValidationError("spec is not a one-factor design");
    const Vector f = gen_factor_path(spec);
    const Vector lambda = draw_loadings(spec);
    Matrix u = draw_errors(spec);
    Matrix y = lambda * f.transpose() + u;
    return DgpDraw{PanelData(std::move(y)), lambda, f, Vector(), std::move(u)};
}

DgpDraw gen_factor_augmented(const DgpSpec& spec) {
    if (spec.kind != DgpKind::FactorAugmented) throw ValidationError("spec is not a factor-augmented design");
    const Vector f = gen_factor_path(spec);
    const Vector lambda = draw_loadings(spec);
    Matrix u = draw_errors(spec);
    const SlopeParams& sp = spec.slope;

    CounterRng rng = stream(spec, Stream::Regressor);
    std::normal_distribution<double> normal(0.0, 1.0);
    const Matrix lf = lambda * f.transpose();
    std::vector<Matrix> x;
    for (int s = 0; s < 2; ++s) {
        Matrix v(spec.n, spec.j);
        for (int i = 0; i < spec.n; ++i)
            for (int j = 0; j < spec.j; ++j) v(i, j) = normal(rng);
        Matrix xs = sp.c[static_cast<std::size_t>(s)] * lf + v;
        xs.colwise() += sp.a[static_cast<std::size_t>(s)] * lambda;
        xs.rowwise() += sp.b[static_cast<std::size_t>(s)] * f.transpose();
        x.push_back(std::move(xs));
    }
    Matrix y = Matrix::Constant(spec.n, spec.j, sp.beta0) + sp.beta[0] * x[0] + sp.beta[1] * x[1] + lf + u;
    Vector beta(2);
    beta << sp.beta[0], sp.beta[1];
    return DgpDraw{PanelData(std::move(y), std::move(x)), lambda, f, beta, std::move(u)};
}

DgpDraw generate(const DgpSpec& spec) {
    return spec.kind == DgpKind::OneFactor ? gen_one_factor(spec) : gen_factor_augmented(spec);
}

}  // namespace gve
