#pragma once

// Grouped variable estimator (GVE): two-stage least squares on the stacked
// reduced form with internally generated instruments, its cluster-robust
// covariance, and the companion estimators used to compare against it.

#include "gve/panel.hpp"

#include <string>

namespace gve {

struct GveFit {
    PartitionScheme scheme;
    InstrumentKind instrument_kind = InstrumentKind::Z1;
    int p = 0;
    /// (theta_A0, beta, gamma_A0), ordered as documented on StackedSystem.
    Vector delta;
    /// Cluster-robust (by subject) sandwich, no small-sample correction.
    Matrix vcov;
    /// theta.col(e) is the r-vector theta_j for j = scheme.a0[e].
    Matrix theta;
    /// Row i is subject i's contribution psi_i to delta_hat - delta, so
    /// vcov = influence' * influence.
    Matrix influence;
    /// Smallest partial first-stage F statistic over the endogenous columns.
    double first_stage_f = 0.0;
    /// Set when first_stage_f < 1e-6 (averages in AJ nearly uninformative).
    bool weak_instruments = false;
    /// max |sum_i Z_i' v_i|; zero up to rounding when just identified.
    double moment_norm = 0.0;
    /// mean_i ybar_iBJ' vhat_i per target equation; a descriptive check on
    /// residual correlation with the instrument groups.
    Vector residual_cross_moment;

    Eigen::Index theta_size() const noexcept { return theta.size(); }
    Vector beta() const { return delta.segment(theta.size(), p); }
    /// Covariance of vec(theta) (block-major by target group).
    Matrix theta_vcov() const { return vcov.topLeftCorner(theta.size(), theta.size()); }
    /// Standard errors laid out like `theta`.
    Matrix theta_se() const;
};

/// Two-stage least squares on the stacked system. Throws RankError when
/// sum Z'Z or Q' W^{-1} Q is singular.
GveFit estimate_gve(const StackedSystem& system);

/// Closed-form estimator for r = 1, p = 0 and singleton A0, AJ, BJ:
///   sum_i y_{i,bj} y_{i,a0} / sum_i y_{i,bj} y_{i,aj}.
double ratio_iv(const PanelData& panel, int a0, int aj, int bj);

/// theta / (theta + m_r): the share of the target factor in the factor sum
/// when AJ holds m_r groups.
double reparametrize_share(double theta, int m_r);

/// Normalized factors for a list of groups.
struct FactorEstimate {
    /// r x m; column c belongs to groups[c].
    Matrix theta;
    IndexSet groups;
    std::string normalization;
    /// Raw J x r factor directions when available (PCA only), sign-fixed.
    Matrix factors;
};

FactorEstimate factor_estimate(const GveFit& fit);

struct LoadingEstimate {
    Matrix lambda;  // N x r
};

/// Per-subject least squares of residuals on the normalized factors. When
/// `scheme` is given and its AJ groups are not covered by `theta`, the AJ
/// block averages enter as extra observations with normalized factor e_k.
LoadingEstimate estimate_loadings(const ResidualPanel& residuals, const FactorEstimate& theta,
                                  const PartitionScheme* scheme = nullptr);

enum class PcaNormalization {
    FirstGroup,  // theta_j = F_first^{-1} f_j with F_first the first r groups
    AjAverage,   // theta_j = Fbar_AJ^{-1} f_j, needs a scheme
};

/// Principal-components factors of the N x J residual matrix (no centering).
FactorEstimate pca_factors(const ResidualPanel& residuals, int r, PcaNormalization normalize_to,
                           const PartitionScheme* scheme = nullptr);

}  // namespace gve
