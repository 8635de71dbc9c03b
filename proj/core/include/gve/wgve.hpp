#pragma once

// Estimation under many normalizations at once: enumerate the admissible
// normalization subsets AJ for a fixed target set A0, estimate theta under
// each, and combine the estimates with matrix weights that sum to I.

#include "gve/factor_iv.hpp"
#include "gve/lasso.hpp"
#include "gve/panel.hpp"

#include <cstdint>
#include <optional>
#include <vector>

namespace gve {

enum class PartitionOrder { Lexicographic, Random };

struct NormalizationSet {
    /// Shares a0 and r; aj ascending, listed in lexicographic order of aj.
    std::vector<PartitionScheme> partitions;
    /// binomial(J - m_A0, m_AJ); empty when it does not fit in 64 bits.
    std::optional<std::uint64_t> q_total;
    std::uint64_t q_used = 0;
    /// Constant used to derive the cap, when one was derived.
    std::optional<std::uint64_t> truncation_c;
};

/// binomial(n, k). Throws CapacityError when the result exceeds 64 bits.
std::uint64_t binomial_count(std::uint64_t n, std::uint64_t k);

/// All (or the first `cap`) subsets AJ of size m_aj drawn from the groups not
/// in a0, with BJ their complement. With PartitionOrder::Random, `cap`
/// subsets are drawn uniformly without replacement using `seed` and then
/// listed in lexicographic order. Throws CapacityError when the count does
/// not fit in 64 bits and no cap is given.
NormalizationSet enumerate_partitions(int j_total, const IndexSet& a0, int m_aj, int r,
                                      std::optional<std::uint64_t> cap = std::nullopt,
                                      PartitionOrder order = PartitionOrder::Lexicographic,
                                      std::uint64_t seed = 0);

/// ceil(C r! binomial(J - m_A0, r) / (J - m_A0)^r), clamped to
/// [1, binomial(J - m_A0, r)]. Computed in exact integer arithmetic.
std::uint64_t truncation_q_star(int j_total, int m_a0, int r, std::uint64_t c);

/// Residual-system IV estimate for one partition: R_AJ endogenous, BJ block
/// averages of R as instruments.
GveFit estimate_theta_residual(const ResidualPanel& residuals, const PartitionScheme& scheme);

/// One partition's contribution to a weighted combination.
struct PartitionEstimate {
    PartitionScheme scheme;
    Matrix theta;      // r x m_A0
    Matrix influence;  // N x (r m_A0); vcov = influence' influence
    Matrix vcov;

    static PartitionEstimate from(const GveFit& fit);
    static PartitionEstimate from(const LassoIvFit& fit);
};

/// Stacked covariance [Sigma_(lq)] of (vec theta_(1), ..., vec theta_(Q)),
/// with the cross blocks sum_i psi_iq psi_il'.
Matrix cross_partition_covariance(const std::vector<PartitionEstimate>& per_partition);

struct WgveFit {
    /// r x m_A0.
    Matrix vartheta;
    std::vector<PartitionEstimate> per_partition;
    /// One (r m_A0)-square matrix per partition, applied to vec(theta_(q)).
    std::vector<Matrix> weights;
    /// sum_q sum_l W_q Sigma_(ql) W_l'.
    Matrix vcov;
    /// Partitions removed for singular or weak first stages.
    std::size_t dropped = 0;
    /// Optimal weights were requested but the stacked covariance was singular.
    bool optimal_fallback = false;

    Matrix vartheta_se() const;
};

/// Throws WeightSumError when ||sum_q W_q - I||_inf > 1e-8 and
/// ValidationError on mismatched sizes.
WgveFit combine_weighted(std::vector<PartitionEstimate> per_partition, std::vector<Matrix> weights);

/// W_q = I / Q.
std::vector<Matrix> equal_weights(std::size_t q, Eigen::Index dim);

/// GLS weights [(iota (x) I)' S^{-1} (iota (x) I)]^{-1} [(iota (x) I)' S^{-1}]_q for a
/// stacked (Q dim) x (Q dim) covariance. Throws RankError when S is singular.
std::vector<Matrix> optimal_weights(const Matrix& sigma, std::size_t q, Eigen::Index dim);

enum class FirstStage {
    BlockAverage,  // BJ block averages, just identified
    AllGroups,     // every BJ group as an instrument (2SLS)
    Lasso,         // penalized first stage over every BJ group
};

enum class Weighting { Equal, Optimal, User };

struct WgveOptions {
    FirstStage first_stage = FirstStage::Lasso;
    PenaltySpec penalty = PenaltySpec::plug_in();
    Weighting weighting = Weighting::Equal;
    /// Used with Weighting::User; must match the retained partitions.
    std::vector<Matrix> user_weights;
};

/// Estimates every partition in order and combines them. Partitions whose
/// first stage is singular or weak are dropped and counted. Throws RankError
/// when none survive.
WgveFit estimate_wgve(const ResidualPanel& residuals, const NormalizationSet& set, const WgveOptions& options);

}  // namespace gve
