#pragma once

// Slope estimators run before the factor stage. Each returns beta; the
// factor stage then works on R = y - x'beta.

#include "gve/panel.hpp"

#include <vector>

namespace gve {

enum class SlopeMethod { CceMg, Iee, Ols, TwoWayFe };

struct SlopeFit {
    Vector beta;
    SlopeMethod method = SlopeMethod::Ols;
    int r_used = 0;
    bool converged = true;
    int iterations = 0;
    /// CCE only: subjects whose augmented regression was rank deficient.
    int skipped_subjects = 0;
    /// IEE only: sum of squared factor-swept residuals after each iteration.
    std::vector<double> objective;
};

/// Pooled least squares of y on x without intercept.
SlopeFit pooled_ols(const PanelData& panel);

/// Common correlated effects mean group. Each subject's y_i is regressed on
/// (x_i, ybar, xbar) across groups, where the bars are cross-subject means per
/// group; beta is the average of the per-subject x slopes. Rank-deficient
/// subjects are skipped; throws RankError if fewer than half remain.
SlopeFit cce_mean_group(const PanelData& panel);

/// Iterated interactive-effects least squares starting from pooled OLS.
/// Iteration k >= 2 takes the top r eigenvectors F of W'W with W = Y - X beta
/// and refits beta on (Y, X) swept by I - F F'. Stops when successive betas
/// differ by less than `tol` in max norm (iteration 1 is compared with zero).
/// Throws ConvergenceError after max_iter unless `no_throw` is set, in which
/// case the last iterate is returned with converged = false.
SlopeFit iee(const PanelData& panel, int r, int max_iter = 1000, double tol = 1e-8, bool no_throw = false);

/// OLS on two-way demeaned y and x.
SlopeFit two_way_fe(const PanelData& panel);

/// R_ij = y_ij - ybar_i. - ybar_.j + ybar_..
ResidualPanel two_way_demean(const PanelData& panel);
Matrix two_way_demean(const Matrix& values);

}  // namespace gve
