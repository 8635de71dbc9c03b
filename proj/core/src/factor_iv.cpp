#include "gve/factor_iv.hpp"

#include "gve/errors.hpp"
#include "gve/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gve {

namespace {

constexpr double kWeakInstrumentF = 1e-6;

// Smallest partial F over the endogenous design columns, computed from the
// normal equations that estimate_gve already holds.
double partial_first_stage_f(const StackedSystem& sys, const Matrix& w, const Matrix& w_inv_q,
                             const Matrix& q) {
    const Eigen::Index rows = sys.design.rows();
    const Eigen::Index kz = sys.k_z();
    const Eigen::Index n_endog = static_cast<Eigen::Index>(sys.m_a0()) * sys.scheme.r;
    const auto& exo = sys.exogenous_instruments;
    const Eigen::Index q_excl = kz - static_cast<Eigen::Index>(exo.size());
    const Eigen::Index dof = rows - kz;
    if (q_excl <= 0 || dof <= 0) return std::numeric_limits<double>::infinity();

    Matrix w_exo(exo.size(), exo.size());
    Matrix q_exo(exo.size(), n_endog);
    for (std::size_t a = 0; a < exo.size(); ++a) {
        for (std::size_t b = 0; b < exo.size(); ++b) w_exo(a, b) = w(exo[a], exo[b]);
        q_exo.row(static_cast<Eigen::Index>(a)) = q.row(exo[a]).head(n_endog);
    }
    Matrix w_exo_inv_q;
    if (!exo.empty()) w_exo_inv_q = w_exo.colPivHouseholderQr().solve(q_exo);

    double f_min = std::numeric_limits<double>::infinity();
    for (Eigen::Index c = 0; c < n_endog; ++c) {
        const double total = sys.design.col(c).squaredNorm();
        const double fit_u = q.col(c).dot(w_inv_q.col(c));
        const double fit_r = exo.empty() ? 0.0 : q_exo.col(c).dot(w_exo_inv_q.col(c));
        const double ssr_u = std::max(total - fit_u, 0.0);
        const double ssr_r = std::max(total - fit_r, 0.0);
        const double gain = std::max(ssr_r - ssr_u, 0.0) / static_cast<double>(q_excl);
        if (ssr_u <= 1e-14 * total) {
            if (gain > 0.0) continue;  // perfect first stage
            f_min = 0.0;
            continue;
        }
        f_min = std::min(f_min, gain / (ssr_u / static_cast<double>(dof)));
    }
    return f_min;
}

}  // namespace

Matrix GveFit::theta_se() const {
    Matrix se(theta.rows(), theta.cols());
    for (Eigen::Index c = 0; c < theta.size(); ++c) se(c) = std::sqrt(std::max(vcov(c, c), 0.0));
    return se;
}

GveFit estimate_gve(const StackedSystem& sys) {
    const Matrix& z = sys.instruments;
    const Matrix& x = sys.design;
    const Vector y = sys.stacked_lhs();
    const Eigen::Index m = sys.m_a0();
    const int r = sys.scheme.r;

    const Matrix w = z.transpose() * z;
    const Matrix q = z.transpose() * x;
    const Vector b = z.transpose() * y;

    const Matrix w_inv_q = linalg::solve(w, q, "instrument cross-product sum Z'Z");

    Matrix h = q.transpose() * w_inv_q;
    linalg::symmetrize(h);
    // Bread G = H^{-1} Q' W^{-1}; delta = G b.
    const Matrix bread = linalg::solve(h, w_inv_q.transpose(), "Q' W^{-1} Q");

    GveFit fit;
    fit.scheme = sys.scheme;
    fit.instrument_kind = sys.kind;
    fit.p = sys.p;
    fit.delta = bread * b;

    const Vector resid = y - x * fit.delta;
    fit.influence.resize(sys.n, x.cols());
    Vector moment = Vector::Zero(z.cols());
    for (Eigen::Index i = 0; i < sys.n; ++i) {
        const Vector score = sys.instrument_block(i).transpose() * resid.segment(i * m, m);
        moment += score;
        fit.influence.row(i) = (bread * score).transpose();
    }
    fit.vcov = fit.influence.transpose() * fit.influence;
    linalg::symmetrize(fit.vcov);
    fit.moment_norm = moment.cwiseAbs().maxCoeff();

    fit.theta.resize(r, m);
    for (Eigen::Index e = 0; e < m; ++e) fit.theta.col(e) = fit.delta.segment(e * r, r);

    fit.first_stage_f = partial_first_stage_f(sys, w, w_inv_q, q);
    fit.weak_instruments = fit.first_stage_f < kWeakInstrumentF;

    // Mean of the BJ instrument entries times the residual, per equation.
    const Eigen::Index width = sys.k_z() / m;
    fit.residual_cross_moment = Vector::Zero(m);
    for (Eigen::Index i = 0; i < sys.n; ++i) {
        for (Eigen::Index e = 0; e < m; ++e) {
            const Eigen::Index row = i * m + e;
            const double inst = sys.kind == InstrumentKind::Z1
                                    ? sys.instruments.block(row, e * r, 1, r).mean()
                                    : sys.instruments.block(row, e * width, 1, sys.scheme.m_bj()).mean();
            fit.residual_cross_moment(e) += inst * resid(row);
        }
    }
    fit.residual_cross_moment /= static_cast<double>(sys.n);
    return fit;
}

double ratio_iv(const PanelData& panel, int a0, int aj, int bj) {
    if (panel.n_regressors() != 0) throw ValidationError("ratio_iv requires a panel without regressors");
    const Eigen::Index jt = panel.n_groups();
    for (int g : {a0, aj, bj}) {
        if (g < 0 || g >= jt) throw ValidationError("ratio_iv group index out of range");
    }
    if (a0 == aj || a0 == bj || aj == bj) throw OverlapError("ratio_iv needs three distinct groups");
    const auto y = panel.y();
    const double num = y.col(bj).dot(y.col(a0));
    const double den = y.col(bj).dot(y.col(aj));
    const double scale = y.col(bj).norm() * y.col(aj).norm();
    if (den == 0.0 || std::abs(den) < 1e-12 * scale) {
        throw ZeroDenominator("instrument is orthogonal to the normalization group");
    }
    return num / den;
}

double reparametrize_share(double theta, int m_r) {
    const double den = theta + static_cast<double>(m_r);
    if (std::abs(den) < 1e-300) throw ZeroDenominator("theta + m_r is zero");
    return theta / den;
}

FactorEstimate factor_estimate(const GveFit& fit) {
    FactorEstimate out;
    out.theta = fit.theta;
    out.groups = fit.scheme.a0;
    out.normalization = "inverse of AJ block-average factors";
    return out;
}

LoadingEstimate estimate_loadings(const ResidualPanel& residuals, const FactorEstimate& theta,
                                  const PartitionScheme* scheme) {
    const Matrix& rv = residuals.values;
    const Eigen::Index r = theta.theta.rows();
    if (static_cast<Eigen::Index>(theta.groups.size()) != theta.theta.cols()) {
        throw ValidationError("factor estimate has mismatched group list");
    }
    std::vector<Vector> cols;
    std::vector<Vector> thetas;
    for (std::size_t c = 0; c < theta.groups.size(); ++c) {
        const int g = theta.groups[c];
        if (g < 0 || g >= rv.cols()) throw ValidationError("factor group index out of range");
        cols.emplace_back(rv.col(g));
        thetas.emplace_back(theta.theta.col(static_cast<Eigen::Index>(c)));
    }
    if (scheme != nullptr) {
        const bool covered = std::all_of(scheme->aj.begin(), scheme->aj.end(), [&](int g) {
            return std::find(theta.groups.begin(), theta.groups.end(), g) != theta.groups.end();
        });
        if (!covered) {
            if (scheme->r != r) throw ValidationError("scheme r does not match factor estimate");
            const Matrix avg = group_averages(rv, *scheme, GroupSet::AJ);
            for (Eigen::Index k = 0; k < r; ++k) {
                cols.emplace_back(avg.col(k));
                thetas.emplace_back(Vector::Unit(r, k));
            }
        }
    }
    const Eigen::Index g = static_cast<Eigen::Index>(cols.size());
    if (g < r) throw RankError("fewer usable groups than factors for loading regression");
    Matrix big_theta(r, g);
    Matrix rsub(rv.rows(), g);
    for (Eigen::Index c = 0; c < g; ++c) {
        big_theta.col(c) = thetas[static_cast<std::size_t>(c)];
        rsub.col(c) = cols[static_cast<std::size_t>(c)];
    }
    if (!big_theta.allFinite()) throw ValidationError("normalized factors are not finite");
    const Matrix gram = big_theta * big_theta.transpose();
    const Matrix coef = linalg::solve(gram, big_theta * rsub.transpose(), "normalized factor Gram matrix");
    return LoadingEstimate{coef.transpose()};
}

FactorEstimate pca_factors(const ResidualPanel& residuals, int r, PcaNormalization normalize_to,
                           const PartitionScheme* scheme) {
    const Matrix& rv = residuals.values;
    const Eigen::Index n = rv.rows();
    const Eigen::Index jt = rv.cols();
    if (r < 1 || n <= r || jt <= r) throw ValidationError("pca_factors needs N > r and J > r");
    if (normalize_to == PcaNormalization::AjAverage && scheme == nullptr) {
        throw ValidationError("AJ-average normalization needs a partition scheme");
    }

    Matrix cross = rv.transpose() * rv;
    Eigen::SelfAdjointEigenSolver<Matrix> eig(cross);
    if (eig.info() != Eigen::Success) throw ConvergenceError("eigen decomposition of R'R failed");
    // Eigenvalues ascend; take the last r columns in descending order.
    Matrix v(jt, r);
    for (int k = 0; k < r; ++k) v.col(k) = eig.eigenvectors().col(jt - 1 - k);

    Matrix denom(r, r);  // columns are the normalizing factor vectors
    if (normalize_to == PcaNormalization::FirstGroup) {
        for (int k = 0; k < r; ++k) denom.col(k) = v.row(k).transpose();
    } else {
        if (scheme->j_total != jt || scheme->r != r) throw ValidationError("scheme does not match residuals");
        const AveragingMap map = averaging_map(*scheme);
        Matrix f_aj(r, scheme->m_aj());
        for (int c = 0; c < scheme->m_aj(); ++c) f_aj.col(c) = v.row(scheme->aj[static_cast<std::size_t>(c)]).transpose();
        denom = f_aj * map.m.transpose();
    }
    // Sign convention: each factor positive in its own normalization column.
    for (int k = 0; k < r; ++k) {
        if (denom(k, k) < 0.0) {
            v.col(k) = -v.col(k);
            denom.row(k) = -denom.row(k);
        }
    }

    FactorEstimate out;
    out.theta = linalg::solve(denom, v.transpose(), "normalizing factor block");
    out.groups.resize(static_cast<std::size_t>(jt));
    for (Eigen::Index j = 0; j < jt; ++j) out.groups[static_cast<std::size_t>(j)] = static_cast<int>(j);
    out.normalization = normalize_to == PcaNormalization::FirstGroup ? "first r groups" : "AJ block averages";
    out.factors = std::move(v);
    return out;
}

}  // namespace gve
