#include "gve/panel.hpp"

#include "gve/errors.hpp"

#include <algorithm>
#include <string>

namespace gve {

namespace {

std::string describe(const IndexSet& s) {
    std::string out = "{";
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ",";
        out += std::to_string(s[k]);
    }
    return out + "}";
}

void sort_unique(IndexSet& s, const char* name, int j_total) {
    std::sort(s.begin(), s.end());
    if (std::adjacent_find(s.begin(), s.end()) != s.end()) {
        throw OverlapError(std::string(name) + " contains a repeated group: " + describe(s));
    }
    for (int g : s) {
        if (g < 0 || g >= j_total) {
            throw ValidationError(std::string(name) + " index " + std::to_string(g) +
                                  " outside 0.." + std::to_string(j_total - 1));
        }
    }
}

bool intersects(const IndexSet& a, const IndexSet& b) {
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (*ia == *ib) return true;
        if (*ia < *ib) ++ia; else ++ib;
    }
    return false;
}

}  // namespace

PanelData::PanelData(Matrix y, std::vector<Matrix> x, std::vector<std::string> group_labels,
                     std::vector<std::string> subject_labels)
    : y_(std::move(y)),
      x_(std::move(x)),
      group_labels_(std::move(group_labels)),
      subject_labels_(std::move(subject_labels)) {
    if (y_.rows() < 2) throw ValidationError("panel needs at least 2 subjects");
    if (y_.cols() < 3) throw ValidationError("panel needs at least 3 groups");
    if (!y_.allFinite()) throw ValidationError("outcome matrix has missing or non-finite entries");
    for (const auto& xk : x_) {
        if (xk.rows() != y_.rows() || xk.cols() != y_.cols()) {
            throw ValidationError("regressor dimensions do not match the outcome matrix");
        }
        if (!xk.allFinite()) throw ValidationError("regressor has non-finite entries");
    }
    if (!group_labels_.empty() && static_cast<Eigen::Index>(group_labels_.size()) != y_.cols()) {
        throw ValidationError("group label count does not match J");
    }
    if (!subject_labels_.empty() &&
        static_cast<Eigen::Index>(subject_labels_.size()) != y_.rows()) {
        throw ValidationError("subject label count does not match N");
    }
}

Vector PanelData::x_at(Eigen::Index i, Eigen::Index j) const {
    Vector out(n_regressors());
    for (Eigen::Index k = 0; k < n_regressors(); ++k) out(k) = x_[static_cast<std::size_t>(k)](i, j);
    return out;
}

PanelData PanelData::with_outcome(Matrix y) const {
    return PanelData(std::move(y), {}, group_labels_, subject_labels_);
}

PartitionScheme make_partition(int j_total, int r, IndexSet a0, IndexSet aj, IndexSet bj) {
    if (r < 1) throw SizeError("number of factors r must be at least 1");
    if (j_total < 3) throw SizeError("need at least 3 groups");
    sort_unique(a0, "A0", j_total);
    sort_unique(aj, "AJ", j_total);
    sort_unique(bj, "BJ", j_total);
    if (a0.empty()) throw SizeError("A0 is empty");
    if (intersects(a0, aj)) throw OverlapError("A0 and AJ intersect: " + describe(a0) + " " + describe(aj));
    if (intersects(a0, bj)) throw OverlapError("A0 and BJ intersect: " + describe(a0) + " " + describe(bj));
    if (intersects(aj, bj)) throw OverlapError("AJ and BJ intersect: " + describe(aj) + " " + describe(bj));
    const int m_aj = static_cast<int>(aj.size());
    const int m_bj = static_cast<int>(bj.size());
    if (m_aj < r) throw SizeError("m_AJ = " + std::to_string(m_aj) + " is smaller than r = " + std::to_string(r));
    if (m_bj < r) throw SizeError("m_BJ = " + std::to_string(m_bj) + " is smaller than r = " + std::to_string(r));
    if (m_aj % r != 0) {
        throw SizeError("m_AJ = " + std::to_string(m_aj) + " is not divisible by r = " + std::to_string(r));
    }
    return PartitionScheme{j_total, r, std::move(a0), std::move(aj), std::move(bj)};
}

AveragingMap averaging_map(const PartitionScheme& scheme) {
    const int r = scheme.r;
    const int m_r = scheme.m_r();
    AveragingMap out;
    out.d = Matrix::Zero(scheme.m_aj(), r);
    out.m = Matrix::Zero(r, scheme.m_aj());
    for (int k = 0; k < r; ++k) {
        out.d.block(k * m_r, k, m_r, 1).setOnes();
        out.m.block(k, k * m_r, 1, m_r).setConstant(1.0 / m_r);
    }
    return out;
}

Matrix group_averages(const Matrix& values, const PartitionScheme& scheme, GroupSet which) {
    const IndexSet& groups = which == GroupSet::AJ ? scheme.aj : scheme.bj;
    const int block = which == GroupSet::AJ ? scheme.m_r() : scheme.m_r_bj();
    Matrix out = Matrix::Zero(values.rows(), scheme.r);
    for (int k = 0; k < scheme.r; ++k) {
        for (int b = 0; b < block; ++b) {
            out.col(k) += values.col(groups[static_cast<std::size_t>(k * block + b)]);
        }
        out.col(k) /= static_cast<double>(block);
    }
    return out;
}

Matrix group_averages(const PanelData& panel, const PartitionScheme& scheme, GroupSet which) {
    if (panel.n_groups() != scheme.j_total) {
        throw ValidationError("partition was built for a different number of groups");
    }
    return group_averages(panel.y(), scheme, which);
}

Eigen::Index parameter_count(int m_a0, int r, int p) noexcept {
    return static_cast<Eigen::Index>(m_a0) * r * (1 + p) + p;
}

Vector StackedSystem::stacked_lhs() const {
    Vector out(lhs.size());
    const Eigen::Index m = lhs.cols();
    for (Eigen::Index i = 0; i < lhs.rows(); ++i) out.segment(i * m, m) = lhs.row(i).transpose();
    return out;
}

StackedSystem build_stacked_system(const PanelData& panel, const PartitionScheme& scheme,
                                   InstrumentKind kind) {
    if (panel.n_groups() != scheme.j_total) {
        throw ValidationError("partition was built for a different number of groups");
    }
    const Eigen::Index n = panel.n_subjects();
    const Eigen::Index jt = panel.n_groups();
    const int r = scheme.r;
    const int p = static_cast<int>(panel.n_regressors());
    const int m = scheme.m_a0();
    const Eigen::Index k = parameter_count(m, r, p);
    const Eigen::Index beta_off = static_cast<Eigen::Index>(m) * r;
    const Eigen::Index gamma_off = beta_off + p;
    const Eigen::Index rp = static_cast<Eigen::Index>(r) * p;

    const Matrix ybar_aj = group_averages(panel.y(), scheme, GroupSet::AJ);
    const Matrix ybar_bj = group_averages(panel.y(), scheme, GroupSet::BJ);
    // xbar[k] is N x r: regressor k averaged over the AJ blocks.
    std::vector<Matrix> xbar;
    xbar.reserve(static_cast<std::size_t>(p));
    for (int c = 0; c < p; ++c) xbar.push_back(group_averages(panel.x(c), scheme, GroupSet::AJ));

    StackedSystem sys;
    sys.scheme = scheme;
    sys.kind = kind;
    sys.p = p;
    sys.n = n;
    sys.lhs.resize(n, m);
    sys.design = Matrix::Zero(n * m, k);

    const Eigen::Index kz = kind == InstrumentKind::Z1
                                ? k
                                : static_cast<Eigen::Index>(m) * (scheme.m_bj() + p * jt);
    sys.instruments = Matrix::Zero(n * m, kz);

    for (Eigen::Index i = 0; i < n; ++i) {
        for (int e = 0; e < m; ++e) {
            const int j = scheme.a0[static_cast<std::size_t>(e)];
            const Eigen::Index row = i * m + e;
            sys.lhs(i, e) = panel.y()(i, j);
            sys.design.block(row, static_cast<Eigen::Index>(e) * r, 1, r) = ybar_aj.row(i);
            for (int c = 0; c < p; ++c) {
                sys.design(row, beta_off + c) = panel.x(c)(i, j);
                // vec(Xbar) column-major: factor block kk, regressor c.
                for (int kk = 0; kk < r; ++kk) {
                    sys.design(row, gamma_off + e * rp + kk * p + c) = xbar[static_cast<std::size_t>(c)](i, kk);
                }
            }
            if (kind == InstrumentKind::Z1) {
                sys.instruments.row(row) = sys.design.row(row);
                sys.instruments.block(row, static_cast<Eigen::Index>(e) * r, 1, r) = ybar_bj.row(i);
            } else {
                const Eigen::Index width = scheme.m_bj() + p * jt;
                const Eigen::Index off = e * width;
                for (int b = 0; b < scheme.m_bj(); ++b) {
                    sys.instruments(row, off + b) = panel.y()(i, scheme.bj[static_cast<std::size_t>(b)]);
                }
                for (Eigen::Index g = 0; g < jt; ++g) {
                    for (int c = 0; c < p; ++c) {
                        sys.instruments(row, off + scheme.m_bj() + g * p + c) = panel.x(c)(i, g);
                    }
                }
            }
        }
    }

    if (kind == InstrumentKind::Z1) {
        for (Eigen::Index c = beta_off; c < k; ++c) sys.exogenous_instruments.push_back(c);
    } else {
        const Eigen::Index width = scheme.m_bj() + p * jt;
        for (int e = 0; e < m; ++e) {
            for (Eigen::Index c = scheme.m_bj(); c < width; ++c) {
                sys.exogenous_instruments.push_back(e * width + c);
            }
        }
    }
    return sys;
}

ResidualPanel residualize(const PanelData& panel, const Vector& beta) {
    if (beta.size() != panel.n_regressors()) {
        throw ValidationError("beta has length " + std::to_string(beta.size()) + " but panel has " +
                              std::to_string(panel.n_regressors()) + " regressors");
    }
    ResidualPanel out{panel.y(), beta};
    for (Eigen::Index c = 0; c < panel.n_regressors(); ++c) out.values -= beta(c) * panel.x(c);
    return out;
}

}  // namespace gve
