#pragma once

// Core data model for the factor-augmented panel
//
//     y_ij = x_ij' beta + lambda_i' f_j + u_ij,   i = 1..N subjects, j = 1..J groups.
//
// Group indices are zero-based throughout the library; the CLI prints them
// one-based.

#include <Eigen/Dense>

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

namespace gve {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using IndexSet = std::vector<int>;

/// Balanced N x J panel with p regressors.
class PanelData {
public:
    /// `x` holds one N x J matrix per regressor (may be empty).
    PanelData(Matrix y, std::vector<Matrix> x = {},
              std::vector<std::string> group_labels = {},
              std::vector<std::string> subject_labels = {});

    Eigen::Index n_subjects() const noexcept { return y_.rows(); }
    Eigen::Index n_groups() const noexcept { return y_.cols(); }
    Eigen::Index n_regressors() const noexcept { return static_cast<Eigen::Index>(x_.size()); }

    const Matrix& y() const noexcept { return y_; }
    const Matrix& x(Eigen::Index k) const { return x_.at(static_cast<std::size_t>(k)); }
    const std::vector<Matrix>& regressors() const noexcept { return x_; }

    /// Regressor vector x_ij (length p).
    Vector x_at(Eigen::Index i, Eigen::Index j) const;

    const std::vector<std::string>& group_labels() const noexcept { return group_labels_; }
    const std::vector<std::string>& subject_labels() const noexcept { return subject_labels_; }

    /// Same subjects and groups, no regressors, outcome replaced.
    PanelData with_outcome(Matrix y) const;

private:
    Matrix y_;
    std::vector<Matrix> x_;
    std::vector<std::string> group_labels_;
    std::vector<std::string> subject_labels_;
};

/// One identification normalization: target groups A0, normalization groups
/// AJ and instrument groups BJ. All three sets are stored in ascending order.
struct PartitionScheme {
    int j_total = 0;
    int r = 1;
    IndexSet a0;
    IndexSet aj;
    IndexSet bj;

    int m_a0() const noexcept { return static_cast<int>(a0.size()); }
    int m_aj() const noexcept { return static_cast<int>(aj.size()); }
    int m_bj() const noexcept { return static_cast<int>(bj.size()); }
    /// Groups per factor average in AJ.
    int m_r() const noexcept { return m_aj() / r; }
    /// Groups per factor average in BJ; the trailing m_bj % r groups are unused.
    int m_r_bj() const noexcept { return m_bj() / r; }

    bool operator==(const PartitionScheme&) const = default;
};

/// Validates and normalizes a partition. Throws OverlapError or SizeError.
PartitionScheme make_partition(int j_total, int r, IndexSet a0, IndexSet aj, IndexSet bj);

/// D = I_r (x) iota_{m_r} and M = (D'D)^{-1} D'.
struct AveragingMap {
    Matrix d;
    Matrix m;
};

AveragingMap averaging_map(const PartitionScheme& scheme);

enum class GroupSet { AJ, BJ };

/// Per-subject block averages of y over AJ or BJ (N x r).
Matrix group_averages(const PanelData& panel, const PartitionScheme& scheme, GroupSet which);

/// Block averages of an arbitrary N x J matrix (used for regressors).
Matrix group_averages(const Matrix& values, const PartitionScheme& scheme, GroupSet which);

enum class InstrumentKind { Z1, Z2 };

/// Stacked reduced form y_iA0 = M_iA0 delta + v_iA0 for all subjects.
///
/// Row i * m_A0 + e of `design` / `instruments` belongs to subject i and
/// target group a0[e]. Columns of delta are ordered
///   (theta_{a0[0]}, ..., theta_{a0[m-1]}, beta, gamma_{a0[0]}, ..., gamma_{a0[m-1]})
/// with each theta block of length r and each gamma block of length r * p
/// (gamma_j pairs with vec(Xbar_iAJ), the p x r matrix of regressor block
/// averages, stored column-major).
struct StackedSystem {
    PartitionScheme scheme;
    InstrumentKind kind = InstrumentKind::Z1;
    int p = 0;
    Eigen::Index n = 0;
    Matrix lhs;          // N x m_A0
    Matrix design;       // (N m_A0) x k
    Matrix instruments;  // (N m_A0) x k_z
    /// Instrument columns built from regressors only; the first m_A0 * r
    /// design columns are the endogenous ones.
    std::vector<Eigen::Index> exogenous_instruments;

    Eigen::Index k() const noexcept { return design.cols(); }
    Eigen::Index k_z() const noexcept { return instruments.cols(); }
    int m_a0() const noexcept { return scheme.m_a0(); }

    auto design_block(Eigen::Index i) const { return design.middleRows(i * m_a0(), m_a0()); }
    auto instrument_block(Eigen::Index i) const {
        return instruments.middleRows(i * m_a0(), m_a0());
    }
    /// lhs stacked in the same row order as `design`.
    Vector stacked_lhs() const;
};

/// Number of parameters m_A0 r (1 + p) + p.
Eigen::Index parameter_count(int m_a0, int r, int p) noexcept;

StackedSystem build_stacked_system(const PanelData& panel, const PartitionScheme& scheme,
                                   InstrumentKind kind);

/// R_ij = y_ij - x_ij' beta.
struct ResidualPanel {
    Matrix values;
    Vector beta_used;

    Eigen::Index n_subjects() const noexcept { return values.rows(); }
    Eigen::Index n_groups() const noexcept { return values.cols(); }
    /// The residuals viewed as a regressor-free panel.
    PanelData as_panel() const { return PanelData(values); }
};

ResidualPanel residualize(const PanelData& panel, const Vector& beta);

}  // namespace gve
