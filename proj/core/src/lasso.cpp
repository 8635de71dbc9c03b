#include "gve/lasso.hpp"

#include "gve/errors.hpp"
#include "gve/linalg.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <string>

namespace gve {

namespace {

double soft_threshold(double z, double t) {
    if (z > t) return z - t;
    if (z < -t) return z + t;
    return 0.0;
}

struct CdResult {
    Vector pi;
    int sweeps = 0;
    double gap = 0.0;
};

// Primal ||r||^2 + lambda sum ups |pi| and its duality gap, from a fresh residual.
struct GapCheck {
    double primal;
    double gap;
};

GapCheck duality_gap(const Vector& y, const Matrix& x, const Vector& pi, double lambda, const Vector& ups) {
    const Vector r = y - x * pi;
    const Vector xr = x.transpose() * r;
    const double rr = r.squaredNorm();
    double pen = 0.0;
    double s = 1.0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
        pen += ups(k) * std::abs(pi(k));
        const double bound = 0.5 * lambda * ups(k);
        const double a = std::abs(xr(k));
        if (a > bound) s = std::min(s, bound / a);
    }
    const double primal = rr + lambda * pen;
    // Dual point nu = s r of  max 0.5|y|^2 - 0.5|y - nu|^2  s.t. |x_k' nu| <= lambda ups_k / 2.
    const double yr = y.dot(r);
    const double dual = 2.0 * s * yr - s * s * rr;
    return {primal, std::max(primal - dual, 0.0)};
}

// Exact minimizer on a fixed support and sign pattern:
// pi_S = G_SS^{-1} (x_S'y - lambda/2 ups_S sign_S), accepted only if the signs
// agree and every coordinate outside S satisfies its KKT bound.
bool solve_on_support(const Matrix& gram, const Vector& xy, double lambda, const Vector& ups, const Vector& sign,
                      const std::vector<Eigen::Index>& support, Vector& pi) {
    const Eigen::Index m = pi.size();
    const auto s = static_cast<Eigen::Index>(support.size());
    Matrix g_ss(s, s);
    Vector rhs(s);
    for (Eigen::Index a = 0; a < s; ++a) {
        const Eigen::Index ka = support[static_cast<std::size_t>(a)];
        rhs(a) = xy(ka) - 0.5 * lambda * ups(ka) * sign(ka);
        for (Eigen::Index b = 0; b < s; ++b) g_ss(a, b) = gram(ka, support[static_cast<std::size_t>(b)]);
    }
    Vector sol;
    const Eigen::LLT<Matrix> llt(g_ss);
    if (llt.info() == Eigen::Success) {
        sol = llt.solve(rhs);
    } else {
        const Eigen::ColPivHouseholderQR<Matrix> qr(g_ss);
        if (qr.rank() < s) return false;
        sol = qr.solve(rhs);
    }
    Vector candidate = Vector::Zero(m);
    for (Eigen::Index a = 0; a < s; ++a) {
        const Eigen::Index ka = support[static_cast<std::size_t>(a)];
        const double pen = lambda * ups(ka);
        if (pen > 0.0 && (sol(a) > 0.0) != (sign(ka) > 0.0)) return false;
        candidate(ka) = sol(a);
    }
    const Vector grad = xy - gram * candidate;
    for (Eigen::Index k = 0; k < m; ++k) {
        if (candidate(k) != 0.0 || gram(k, k) <= 0.0) continue;
        const double bound = 0.5 * lambda * ups(k);
        if (std::abs(grad(k)) > bound * (1.0 + 1e-10) + 1e-12 * std::sqrt(gram(k, k))) return false;
    }
    pi = std::move(candidate);
    return true;
}

// Tries the current support, then, when its Gram block is near singular, the
// subsets from its numerical rank down to 1.
bool polish(const Matrix& gram, const Vector& xy, double lambda, const Vector& ups, Vector& pi, bool subsets) {
    constexpr int kMaxSubsets = 512;
    const Eigen::Index m = pi.size();
    std::vector<Eigen::Index> support;
    Vector sign = Vector::Zero(m);
    for (Eigen::Index k = 0; k < m; ++k) {
        if (pi(k) != 0.0) {
            support.push_back(k);
            sign(k) = pi(k) > 0.0 ? 1.0 : -1.0;
        }
    }
    const auto s = static_cast<Eigen::Index>(support.size());
    if (s == 0) return false;
    if (solve_on_support(gram, xy, lambda, ups, sign, support, pi)) return true;
    if (!subsets) return false;

    Matrix g_ss(s, s);
    for (Eigen::Index a = 0; a < s; ++a) {
        for (Eigen::Index b = 0; b < s; ++b) {
            g_ss(a, b) = gram(support[static_cast<std::size_t>(a)], support[static_cast<std::size_t>(b)]);
        }
    }
    const Vector sv = Eigen::JacobiSVD<Matrix>(g_ss).singularValues();
    if (sv(s - 1) > 1e-8 * sv(0)) return false;
    Eigen::Index rank = 0;
    while (rank < s && sv(rank) > 1e-12 * sv(0)) ++rank;
    int tried = 0;
    for (Eigen::Index size = std::clamp<Eigen::Index>(rank, 1, s - 1); size >= 1; --size) {
        std::vector<bool> pick(static_cast<std::size_t>(s), false);
        std::fill(pick.begin(), pick.begin() + size, true);
        do {
            if (++tried > kMaxSubsets) return false;
            std::vector<Eigen::Index> subset;
            for (Eigen::Index a = 0; a < s; ++a) {
                if (pick[static_cast<std::size_t>(a)]) subset.push_back(support[static_cast<std::size_t>(a)]);
            }
            if (solve_on_support(gram, xy, lambda, ups, sign, subset, pi)) return true;
        } while (std::prev_permutation(pick.begin(), pick.end()));
    }
    return false;
}

constexpr int kSubsetSweeps = 1000;

CdResult coordinate_descent(const Vector& y, const Matrix& x, const Matrix& gram, const Vector& xy,
                            double lambda, const Vector& ups, Vector pi, int max_sweeps, double tol) {
    const Eigen::Index m = x.cols();
    Vector grad = xy - gram * pi;  // x'r
    const double yy = y.squaredNorm();
    const double step_scale = std::sqrt(yy);
    CdResult out;
    std::vector<bool> last_support;
    std::vector<bool> tried_support;
    for (int sweep = 1; sweep <= max_sweeps; ++sweep) {
#ifndef NDEBUG
        const double before = duality_gap(y, x, pi, lambda, ups).primal;
#endif
        double max_change = 0.0;
        for (Eigen::Index k = 0; k < m; ++k) {
            const double gkk = gram(k, k);
            if (gkk <= 0.0) continue;
            const double old = pi(k);
            const double z = grad(k) + gkk * old;
            const double updated = soft_threshold(z, 0.5 * lambda * ups(k)) / gkk;
            const double delta = updated - old;
            if (delta != 0.0) {
                pi(k) = updated;
                grad.noalias() -= gram.col(k) * delta;
                max_change = std::max(max_change, std::abs(delta) * std::sqrt(gkk));
            }
        }
#ifndef NDEBUG
        assert(duality_gap(y, x, pi, lambda, ups).primal <= before * (1.0 + 1e-12) + 1e-12);
#endif
        out.sweeps = sweep;

        // Once the support stops moving, try the exact solve on it.
        std::vector<bool> support(static_cast<std::size_t>(m));
        for (Eigen::Index k = 0; k < m; ++k) support[static_cast<std::size_t>(k)] = pi(k) != 0.0;
        // Slow progress usually means a near-singular support; retry with subsets.
        const bool subsets = sweep >= kSubsetSweeps;
        if (sweep == kSubsetSweeps) tried_support.clear();
        if (support == last_support && support != tried_support) {
            tried_support = support;
            Vector polished = pi;
            if (polish(gram, xy, lambda, ups, polished, subsets)) {
                if (lambda == 0.0) {
                    out.pi = std::move(polished);
                    return out;
                }
                const GapCheck g = duality_gap(y, x, polished, lambda, ups);
                if (g.gap <= tol * std::max(g.primal, 1e-300)) {
                    out.pi = std::move(polished);
                    out.gap = g.gap;
                    return out;
                }
            }
        }
        last_support = std::move(support);

        if (lambda == 0.0) {
            if (max_change <= tol * step_scale) {
                out.pi = std::move(pi);
                return out;
            }
            continue;
        }
        if (max_change <= 1e-3 * std::sqrt(tol) * step_scale) {
            const GapCheck g = duality_gap(y, x, pi, lambda, ups);
            if (g.gap <= tol * std::max(g.primal, 1e-300) || g.primal == 0.0 || max_change == 0.0) {
                out.pi = std::move(pi);
                out.gap = g.gap;
                return out;
            }
        }
    }
    throw ConvergenceError("coordinate descent did not converge in " + std::to_string(max_sweeps) + " sweeps");
}

Vector column_loadings(const Matrix& x, const Vector& e) {
    const double n = static_cast<double>(x.rows());
    const Vector e2 = e.cwiseAbs2();
    Vector ups(x.cols());
    for (Eigen::Index k = 0; k < x.cols(); ++k) ups(k) = std::sqrt(x.col(k).cwiseAbs2().dot(e2) / n);
    return ups;
}

}  // namespace

double plug_in_lambda(Eigen::Index n, Eigen::Index m, double c, double gamma) {
    if (n < 1 || m < 1) throw ValidationError("plug-in penalty needs N >= 1 and m >= 1");
    if (!(gamma > 0.0 && gamma < 2.0 * static_cast<double>(m))) {
        throw ValidationError("plug-in gamma must lie in (0, 2m)");
    }
    const boost::math::normal_distribution<double> std_normal;
    const double q = boost::math::quantile(std_normal, 1.0 - gamma / (2.0 * static_cast<double>(m)));
    return 2.0 * c * std::sqrt(static_cast<double>(n)) * q;
}

LassoFit lasso_first_stage(const Vector& endogenous, const Matrix& instruments, const PenaltySpec& penalty) {
    const Eigen::Index n = instruments.rows();
    const Eigen::Index m = instruments.cols();
    if (n < 2) throw ValidationError("Lasso needs at least 2 observations");
    if (m < 1) throw ValidationError("Lasso needs at least one instrument");
    if (endogenous.size() != n) throw ValidationError("Lasso outcome length does not match instruments");
    if (!instruments.allFinite() || !endogenous.allFinite()) {
        throw ValidationError("Lasso input has non-finite entries");
    }
    if (penalty.max_sweeps < 1) throw ValidationError("max_sweeps must be positive");

    const Matrix gram = instruments.transpose() * instruments;
    const Vector xy = instruments.transpose() * endogenous;

    LassoFit fit;
    Vector pi = Vector::Zero(m);
    int sweeps = 0;
    double gap = 0.0;
    if (penalty.kind == PenaltySpec::Kind::Fixed) {
        if (!(penalty.lambda >= 0.0)) throw ValidationError("Lasso penalty must be nonnegative");
        fit.lambda = penalty.lambda;
        if (penalty.loadings) {
            if (penalty.loadings->size() != m) throw ValidationError("loading vector has the wrong length");
            if ((penalty.loadings->array() < 0.0).any()) throw ValidationError("loadings must be nonnegative");
            fit.loadings = *penalty.loadings;
        } else {
            fit.loadings = column_loadings(instruments, Vector::Ones(n));
        }
        const CdResult cd = coordinate_descent(endogenous, instruments, gram, xy, fit.lambda, fit.loadings, pi,
                                               penalty.max_sweeps, penalty.tolerance);
        pi = cd.pi;
        sweeps = cd.sweeps;
        gap = cd.gap;
    } else {
        const double gamma = penalty.gamma.value_or(
            0.1 / std::log(static_cast<double>(std::max(n, m))));
        fit.lambda = plug_in_lambda(n, m, penalty.c, gamma);
        Vector e = endogenous;
        for (int pass = 0; pass <= std::max(penalty.loading_refreshes, 0); ++pass) {
            fit.loadings = column_loadings(instruments, e);
            const CdResult cd = coordinate_descent(endogenous, instruments, gram, xy, fit.lambda, fit.loadings,
                                                   pi, penalty.max_sweeps, penalty.tolerance);
            pi = cd.pi;
            sweeps += cd.sweeps;
            gap = cd.gap;
            e = endogenous - instruments * pi;
        }
    }

    fit.pi = std::move(pi);
    fit.sweeps = sweeps;
    fit.duality_gap = gap;
    fit.fitted = instruments * fit.pi;
    for (Eigen::Index k = 0; k < m; ++k) {
        if (fit.pi(k) != 0.0) fit.active_set.push_back(static_cast<int>(k));
    }
    fit.residual_rms = std::sqrt((endogenous - fit.fitted).squaredNorm() / static_cast<double>(n));
    return fit;
}

double kkt_violation(const LassoFit& fit, const Vector& endogenous, const Matrix& instruments) {
    const double n = static_cast<double>(instruments.rows());
    const Vector grad = (2.0 / n) * (instruments.transpose() * (endogenous - instruments * fit.pi));
    double worst = 0.0;
    for (Eigen::Index k = 0; k < instruments.cols(); ++k) {
        const double bound = fit.lambda * fit.loadings(k) / n;
        if (fit.pi(k) == 0.0) {
            worst = std::max(worst, std::abs(grad(k)) - bound);
        } else {
            const double sign = fit.pi(k) > 0.0 ? 1.0 : -1.0;
            worst = std::max(worst, std::abs(grad(k) - sign * bound));
        }
    }
    return std::max(worst, 0.0);
}

LassoIvFit estimate_theta_lasso_iv(const ResidualPanel& residuals, const PartitionScheme& scheme,
                                   const PenaltySpec& penalty) {
    const Matrix& rv = residuals.values;
    const int r = scheme.r;
    if (rv.cols() != scheme.j_total) throw ValidationError("partition was built for a different number of groups");
    if (scheme.m_aj() != r) throw SizeError("Lasso-IV needs m_AJ = r");
    const Eigen::Index n = rv.rows();
    const int m = scheme.m_a0();

    Matrix r_bj(n, scheme.m_bj());
    for (int b = 0; b < scheme.m_bj(); ++b) r_bj.col(b) = rv.col(scheme.bj[static_cast<std::size_t>(b)]);
    Matrix r_aj(n, r);
    for (int k = 0; k < r; ++k) r_aj.col(k) = rv.col(scheme.aj[static_cast<std::size_t>(k)]);

    LassoIvFit out;
    out.scheme = scheme;
    Matrix l_hat(n, r);
    for (int k = 0; k < r; ++k) {
        out.first_stage.push_back(lasso_first_stage(r_aj.col(k), r_bj, penalty));
        l_hat.col(k) = out.first_stage.back().fitted;
    }

    const Matrix a = l_hat.transpose() * r_aj;
    if (l_hat.isZero(0.0)) throw RankError("every Lasso first stage selected no instruments");
    out.theta.resize(r, m);
    Matrix rhs(r, m);
    for (int e = 0; e < m; ++e) rhs.col(e) = l_hat.transpose() * rv.col(scheme.a0[static_cast<std::size_t>(e)]);
    // A^{-1} is reused for the influence rows.
    const Matrix a_inv = linalg::solve(a, Matrix::Identity(r, r), "Lasso-IV moment matrix Lhat' R_AJ");
    out.theta = a_inv * rhs;

    out.influence.resize(n, static_cast<Eigen::Index>(r) * m);
    for (int e = 0; e < m; ++e) {
        const Vector resid = rv.col(scheme.a0[static_cast<std::size_t>(e)]) - r_aj * out.theta.col(e);
        for (Eigen::Index i = 0; i < n; ++i) {
            out.influence.block(i, static_cast<Eigen::Index>(e) * r, 1, r) =
                (a_inv * l_hat.row(i).transpose() * resid(i)).transpose();
        }
    }
    out.vcov = out.influence.transpose() * out.influence;
    linalg::symmetrize(out.vcov);
    return out;
}

}  // namespace gve
