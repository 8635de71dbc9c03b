#include "gve/slope.hpp"

#include "gve/errors.hpp"
#include "gve/linalg.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace gve {

namespace {

void require_regressors(const PanelData& panel, const char* who) {
    if (panel.n_regressors() == 0) {
        throw ValidationError(std::string(who) + " needs at least one regressor");
    }
}

// beta minimizing sum_ij (y_ij - sum_c beta_c x_c,ij)^2 for N x J matrices.
Vector frobenius_ls(const Matrix& y, const std::vector<Matrix>& x, const char* what) {
    const Eigen::Index p = static_cast<Eigen::Index>(x.size());
    Matrix gram(p, p);
    Vector rhs(p);
    for (Eigen::Index a = 0; a < p; ++a) {
        const auto& xa = x[static_cast<std::size_t>(a)];
        rhs(a) = xa.cwiseProduct(y).sum();
        for (Eigen::Index b = 0; b <= a; ++b) {
            gram(a, b) = gram(b, a) = xa.cwiseProduct(x[static_cast<std::size_t>(b)]).sum();
        }
    }
    return linalg::solve(gram, rhs, what);
}

Matrix remove_fit(const PanelData& panel, const Vector& beta) {
    Matrix w = panel.y();
    for (Eigen::Index c = 0; c < panel.n_regressors(); ++c) w -= beta(c) * panel.x(c);
    return w;
}

}  // namespace

SlopeFit pooled_ols(const PanelData& panel) {
    require_regressors(panel, "pooled OLS");
    SlopeFit fit;
    fit.method = SlopeMethod::Ols;
    fit.beta = frobenius_ls(panel.y(), panel.regressors(), "pooled regressor cross-product");
    fit.iterations = 1;
    return fit;
}

SlopeFit cce_mean_group(const PanelData& panel) {
    require_regressors(panel, "CCE mean group");
    const Eigen::Index n = panel.n_subjects();
    const Eigen::Index jt = panel.n_groups();
    const Eigen::Index p = panel.n_regressors();
    if (jt <= p + 2) {
        throw ValidationError("CCE needs J > p + 2; got J = " + std::to_string(jt) + ", p = " + std::to_string(p));
    }
    const Eigen::Index k = 2 * p + 1;
    Matrix base(jt, k);  // columns p.. hold the cross-sectional averages
    base.col(p) = panel.y().colwise().mean().transpose();
    for (Eigen::Index c = 0; c < p; ++c) base.col(p + 1 + c) = panel.x(c).colwise().mean().transpose();

    Vector sum = Vector::Zero(p);
    int used = 0;
    int skipped = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        Matrix design = base;
        for (Eigen::Index c = 0; c < p; ++c) design.col(c) = panel.x(c).row(i).transpose();
        try {
            const Matrix coef = linalg::least_squares(design, panel.y().row(i).transpose(), "CCE subject design");
            sum += coef.col(0).head(p);
            ++used;
        } catch (const RankError&) {
            ++skipped;
        }
    }
    if (2 * used < n) {
        throw RankError("CCE: only " + std::to_string(used) + " of " + std::to_string(n) +
                        " subjects have a full-rank augmented design");
    }
    SlopeFit fit;
    fit.method = SlopeMethod::CceMg;
    fit.beta = sum / static_cast<double>(used);
    fit.skipped_subjects = skipped;
    fit.iterations = 1;
    return fit;
}

SlopeFit iee(const PanelData& panel, int r, int max_iter, double tol, bool no_throw) {
    require_regressors(panel, "IEE");
    const Eigen::Index jt = panel.n_groups();
    if (r < 1) throw ValidationError("IEE needs r >= 1");
    if (r >= jt) throw ValidationError("IEE needs r < J");
    if (max_iter < 1) throw ValidationError("IEE needs max_iter >= 1");
    if (!(tol >= 0.0)) throw ValidationError("IEE tolerance must be nonnegative");

    SlopeFit fit;
    fit.method = SlopeMethod::Iee;
    fit.r_used = r;
    fit.converged = false;
    Vector beta = frobenius_ls(panel.y(), panel.regressors(), "pooled regressor cross-product");
    Vector prev = Vector::Zero(beta.size());

    auto swept_objective = [&](const Vector& b, const Matrix& f) {
        const Matrix w = remove_fit(panel, b);
        return (w - (w * f) * f.transpose()).squaredNorm();
    };
    auto top_factors = [&](const Vector& b) {
        const Matrix w = remove_fit(panel, b);
        Eigen::SelfAdjointEigenSolver<Matrix> eig(w.transpose() * w);
        if (eig.info() != Eigen::Success) throw ConvergenceError("IEE eigen decomposition failed");
        return Matrix(eig.eigenvectors().rightCols(r));
    };

    for (int it = 1; it <= max_iter; ++it) {
        if (it > 1) {
            const Matrix f = top_factors(beta);
            std::vector<Matrix> xs;
            xs.reserve(panel.regressors().size());
            for (const Matrix& x : panel.regressors()) xs.push_back(x - (x * f) * f.transpose());
            const Matrix ys = panel.y() - (panel.y() * f) * f.transpose();
            prev = beta;
            beta = frobenius_ls(ys, xs, "factor-swept regressor cross-product");
        }
        fit.objective.push_back(swept_objective(beta, top_factors(beta)));
        fit.iterations = it;
        if ((beta - prev).cwiseAbs().maxCoeff() < tol) {
            fit.converged = true;
            break;
        }
        prev = beta;
    }
    fit.beta = beta;
    if (!fit.converged && !no_throw) {
        throw ConvergenceError("IEE did not converge in " + std::to_string(max_iter) + " iterations");
    }
    return fit;
}

SlopeFit two_way_fe(const PanelData& panel) {
    require_regressors(panel, "two-way fixed effects");
    std::vector<Matrix> xs;
    for (const Matrix& x : panel.regressors()) xs.push_back(two_way_demean(x));
    SlopeFit fit;
    fit.method = SlopeMethod::TwoWayFe;
    fit.beta = frobenius_ls(two_way_demean(panel.y()), xs, "demeaned regressor cross-product");
    fit.iterations = 1;
    return fit;
}

Matrix two_way_demean(const Matrix& values) {
    const Vector row = values.rowwise().mean();
    const Eigen::RowVectorXd col = values.colwise().mean();
    const double grand = values.mean();
    Matrix out = values;
    out.colwise() -= row;
    out.rowwise() -= col;
    out.array() += grand;
    return out;
}

ResidualPanel two_way_demean(const PanelData& panel) {
    return ResidualPanel{two_way_demean(panel.y()), Vector()};
}

}  // namespace gve
