#pragma once

// Penalized first stage for large instrument sets.
//
// The first stage solves
//
//     min_pi  (1/N) sum_i (y_i - z_i' pi)^2 + (lambda/N) sum_k ups_k |pi_k|
//
// by cyclic coordinate descent on the Gram matrix. With the plug-in rule the
// penalty level is lambda = 2 c sqrt(N) Phi^{-1}(1 - gamma / (2 m)) and the
// loadings are ups_k = sqrt(mean_i z_ik^2 e_i^2), first from e = y and then
// refreshed from the Lasso residuals.

#include "gve/panel.hpp"

#include <optional>
#include <vector>

namespace gve {

struct PenaltySpec {
    enum class Kind { PlugIn, Fixed };

    Kind kind = Kind::PlugIn;
    /// Penalty level for Kind::Fixed.
    double lambda = 0.0;
    /// Explicit loadings (Kind::Fixed only); defaults to column root-mean-square.
    std::optional<Vector> loadings;
    double c = 1.1;
    /// Defaults to 0.1 / log(max(N, m)).
    std::optional<double> gamma;
    /// Loading refreshes after the initial fit (plug-in only).
    int loading_refreshes = 1;
    int max_sweeps = 100000;
    /// Relative duality gap at convergence.
    double tolerance = 1e-8;

    static PenaltySpec plug_in() { return PenaltySpec{}; }
    static PenaltySpec fixed(double lambda) {
        PenaltySpec s;
        s.kind = Kind::Fixed;
        s.lambda = lambda;
        return s;
    }
};

struct LassoFit {
    Vector pi;
    double lambda = 0.0;
    Vector loadings;
    IndexSet active_set;
    Vector fitted;
    int sweeps = 0;
    double duality_gap = 0.0;
    /// Root mean square of y - fitted.
    double residual_rms = 0.0;
};

/// Belloni-Chen-Chernozhukov-Hansen plug-in penalty level.
double plug_in_lambda(Eigen::Index n, Eigen::Index m, double c, double gamma);

/// Throws ConvergenceError when the duality gap does not close within
/// `max_sweeps` sweeps.
LassoFit lasso_first_stage(const Vector& endogenous, const Matrix& instruments,
                           const PenaltySpec& penalty);

/// Largest violation of the KKT conditions of the objective above; zero at
/// an exact solution.
double kkt_violation(const LassoFit& fit, const Vector& endogenous, const Matrix& instruments);

/// Lasso-IV estimate of theta for one partition with m_AJ = r.
struct LassoIvFit {
    PartitionScheme scheme;
    /// r x m_A0, column e for target a0[e].
    Matrix theta;
    /// One first-stage fit per AJ group.
    std::vector<LassoFit> first_stage;
    /// Row i is subject i's contribution to vec(theta_hat) - vec(theta),
    /// treating the fitted instruments as fixed.
    Matrix influence;
    Matrix vcov;
};

/// Solves Lhat' R_AJ theta_j = Lhat' R_j for every target j in A0, with Lhat
/// the Lasso predictions of R_AJ from R_BJ. Throws RankError when Lhat' R_AJ
/// is singular (for instance when every first-stage fit is zero).
LassoIvFit estimate_theta_lasso_iv(const ResidualPanel& residuals, const PartitionScheme& scheme,
                                   const PenaltySpec& penalty);

}  // namespace gve
