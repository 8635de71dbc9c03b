#include "fixtures.hpp"

namespace gve::test {

int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

Matrix sign_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::bernoulli_distribution coin(0.5);
    Matrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = coin(rng) ? 1.0 : -1.0;
    }
    return out;
}

SparseDesign sparse_design(Rng& rng) {
    SparseDesign d;
    d.x = sign_matrix(rng, 50, 100);
    d.y = d.x.col(3) - 0.8 * d.x.col(41) + 0.1 * gaussian_matrix(rng, 50, 1);
    return d;
}

Matrix gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> z;
    Matrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) out(r, c) = z(rng);
    }
    return out;
}

Matrix random_spd(Rng& rng, Eigen::Index dim, double eps) {
    const Matrix a = gaussian_matrix(rng, dim, dim + 2);
    Matrix s = a * a.transpose() / static_cast<double>(dim + 2);
    s.diagonal().array() += eps;
    return s;
}

KnownPanel known_panel(Rng& rng, int n, int j, int r, double noise, int p) {
    std::uniform_real_distribution<double> load(0.5, 3.5);
    std::uniform_real_distribution<double> fac(0.5, 2.0);
    std::normal_distribution<double> z;
    KnownPanel out{PanelData(Matrix::Zero(n, j)), Matrix(n, r), Matrix(j, r), Vector(p)};
    for (int i = 0; i < n; ++i) {
        for (int k = 0; k < r; ++k) out.lambda(i, k) = load(rng);
    }
    for (int g = 0; g < j; ++g) {
        for (int k = 0; k < r; ++k) out.f(g, k) = fac(rng);
    }
    Matrix y = out.lambda * out.f.transpose();
    std::vector<Matrix> xs;
    for (int c = 0; c < p; ++c) {
        out.beta(c) = 1.0 + 0.5 * c;
        xs.push_back(gaussian_matrix(rng, n, j));
        y += out.beta(c) * xs.back();
    }
    if (noise > 0.0) {
        for (int g = 0; g < j; ++g) {
            for (int i = 0; i < n; ++i) y(i, g) += noise * z(rng);
        }
    }
    out.panel = PanelData(std::move(y), std::move(xs));
    return out;
}

Matrix true_theta(const Matrix& f, const PartitionScheme& scheme) {
    const int r = scheme.r;
    const int mr = scheme.m_r();
    Matrix fbar = Matrix::Zero(r, r);
    for (int k = 0; k < r; ++k) {
        for (int s = 0; s < mr; ++s) fbar.row(k) += f.row(scheme.aj[static_cast<std::size_t>(k * mr + s)]);
        fbar.row(k) /= mr;
    }
    Matrix theta(r, scheme.m_a0());
    const Eigen::FullPivLU<Matrix> lu(fbar.transpose());
    for (int e = 0; e < scheme.m_a0(); ++e) {
        theta.col(e) = lu.solve(f.row(scheme.a0[static_cast<std::size_t>(e)]).transpose());
    }
    return theta;
}

}  // namespace gve::test
