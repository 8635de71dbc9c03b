#pragma once

#include "gve/panel.hpp"

#include <cstdint>
#include <random>

namespace gve::test {

using Rng = std::mt19937_64;

/// Panel with a known rank-r factor structure and optional regressors.
struct KnownPanel {
    PanelData panel;
    Matrix lambda;  // N x r
    Matrix f;       // J x r
    Vector beta;    // p
};

/// y = X beta + Lambda F' + noise * N(0,1). Loadings are U[0.5, 3.5] and
/// factors U[0.5, 2] so block averages stay well away from singular.
KnownPanel known_panel(Rng& rng, int n, int j, int r, double noise = 0.0, int p = 0);

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Independent +-1 entries.
Matrix sign_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols);

/// Sparse-recovery design: N=50, 100 sign instruments, y = x_3 - 0.8 x_41 + 0.1 N(0,1).
/// Gaussian columns would put each signal exactly at the plug-in selection
/// threshold (2N / (lambda sqrt(E x^4)) = 1.00 here).
struct SparseDesign {
    Matrix x;
    Vector y;
};
SparseDesign sparse_design(Rng& rng);

/// A A' / k + eps I with A gaussian; well-conditioned symmetric positive definite.
Matrix random_spd(Rng& rng, Eigen::Index dim, double eps = 0.1);

/// theta_j = Fbar_AJ^{-1} f_j for every j in a0 (r x m_A0).
Matrix true_theta(const Matrix& f, const PartitionScheme& scheme);

int uniform_int(Rng& rng, int lo, int hi);

}  // namespace gve::test
