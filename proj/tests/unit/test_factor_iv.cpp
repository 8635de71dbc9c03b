#include "fixtures.hpp"
#include "oracle.hpp"

#include "gve/dgp.hpp"
#include "gve/errors.hpp"
#include "gve/factor_iv.hpp"

#include <doctest.h>

#include <cmath>

using namespace gve;
using gve::test::known_panel;
using gve::test::Rng;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("GVE recovers theta exactly on noiseless panels") {
    Rng rng(101);
    for (int r : {1, 2}) {
        for (int p : {0, 1, 2}) {
            const int j = 3 + 3 * r;
            const auto kp = known_panel(rng, 40, j, r, 0.0, p);
            IndexSet aj;
            for (int g = 2; g < 2 + 2 * r; ++g) aj.push_back(g);
            IndexSet bj;
            for (int g = 2 + 2 * r; g < j; ++g) bj.push_back(g);
            const PartitionScheme s = make_partition(j, r, {0, 1}, aj, bj);
            const GveFit fit = estimate_gve(build_stacked_system(kp.panel, s, InstrumentKind::Z1));
            CHECK(max_abs(fit.theta - gve::test::true_theta(kp.f, s)) < 1e-8);
            if (p > 0) CHECK(max_abs(fit.beta() - kp.beta) < 1e-8);
            // Noiseless outcomes have rank r, so more than r BJ groups are collinear.
            CHECK_THROWS_AS(estimate_gve(build_stacked_system(kp.panel, s, InstrumentKind::Z2)), RankError);
        }
    }
}

TEST_CASE("GVE matches the explicit-inverse 2SLS oracle") {
    Rng rng(202);
    for (int rep = 0; rep < 40; ++rep) {
        const int r = 1 + rep % 2;
        const int p = rep % 3;
        const int m_a0 = 1 + (rep / 3) % 2;
        const int j = m_a0 + 2 * r + r + 1;
        const auto kp = known_panel(rng, 60, j, r, 0.4, p);
        IndexSet a0;
        for (int g = 0; g < m_a0; ++g) a0.push_back(g);
        IndexSet aj;
        for (int g = m_a0; g < m_a0 + 2 * r; ++g) aj.push_back(g);
        IndexSet bj;
        for (int g = m_a0 + 2 * r; g < j; ++g) bj.push_back(g);
        const PartitionScheme s = make_partition(j, r, a0, aj, bj);
        const StackedSystem sys = build_stacked_system(kp.panel, s, InstrumentKind::Z1);
        const GveFit fit = estimate_gve(sys);
        const auto oracle = gve::test::naive_gve_z1(kp.panel, a0, aj, bj, r);
        // Rounding in the normal equations grows with the squared condition of Z'X.
        const Eigen::JacobiSVD<Matrix> svd(sys.instruments.transpose() * sys.design);
        const double cond = svd.singularValues()(0) / svd.singularValues().tail(1)(0);
        const double tol = std::max(1e-9, 1e-15 * cond * cond);
        CHECK(max_abs(fit.theta - oracle.theta) < tol * std::max(1.0, max_abs(oracle.theta)));
        if (p > 0) CHECK(max_abs(fit.beta() - oracle.beta) < tol * std::max(1.0, max_abs(oracle.beta)));
        CHECK(max_abs(fit.theta_vcov() - oracle.theta_vcov) < tol * max_abs(oracle.theta_vcov));
        CHECK(max_abs(fit.vcov - fit.influence.transpose() * fit.influence) < 1e-12 * max_abs(fit.vcov));
    }
}

TEST_CASE("Z2 matches the projection 2SLS oracle") {
    Rng rng(303);
    for (int rep = 0; rep < 20; ++rep) {
        const auto kp = known_panel(rng, 50, 7, 1, 0.5);
        const PartitionScheme s = make_partition(7, 1, {0}, {1}, {2, 3, 4, 5, 6});
        const GveFit fit = estimate_gve(build_stacked_system(kp.panel, s, InstrumentKind::Z2));
        const double oracle = gve::test::naive_gve_z2_theta(kp.panel.y(), 0, 1, s.bj);
        CHECK(std::abs(fit.theta(0, 0) - oracle) < 1e-10 * std::abs(oracle));
    }
}

TEST_CASE("ratio_iv closed form") {
    Matrix y(3, 3);
    y.rowwise() = Eigen::RowVector3d(2, 1, 1);
    CHECK(ratio_iv(PanelData(y), 0, 1, 2) == doctest::Approx(2.0).epsilon(1e-15));

    Matrix z(2, 3);
    z << 1, 2, 3,
         2, 1, 1;
    CHECK(ratio_iv(PanelData(z), 0, 1, 2) == doctest::Approx(5.0 / 7.0).epsilon(1e-15));

    Matrix same(4, 3);
    same << 1, 1, 3,
            2, 2, 1,
            0.5, 0.5, 2,
            3, 3, 1;
    CHECK(ratio_iv(PanelData(same), 0, 1, 2) == 1.0);

    Matrix orth(2, 3);
    orth << 1, 1, 1,
            1, -1, 1;
    CHECK_THROWS_AS(ratio_iv(PanelData(orth), 0, 1, 2), ZeroDenominator);
    CHECK_THROWS_AS(ratio_iv(PanelData(z), 0, 0, 2), OverlapError);
}

TEST_CASE("GVE on the three-group scheme equals ratio_iv") {
    Rng rng(404);
    for (int rep = 0; rep < 10; ++rep) {
        const auto kp = known_panel(rng, 30, 3, 1, 1.0);
        const GveFit fit = estimate_gve(build_stacked_system(kp.panel, make_partition(3, 1, {0}, {1}, {2}), InstrumentKind::Z1));
        const double ratio = ratio_iv(kp.panel, 0, 1, 2);
        CHECK(std::abs(fit.theta(0, 0) - ratio) <= 1e-10 * std::max(1.0, std::abs(ratio)));
    }
}

TEST_CASE("reparametrize_share") {
    const double theta = 2.0 * 1.0 / (1.0 + 1.0);
    CHECK(reparametrize_share(theta, 2) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
    CHECK(reparametrize_share(0.0, 3) == 0.0);
    CHECK(reparametrize_share(2.0, 2) == 0.5);
    CHECK_THROWS_AS(reparametrize_share(-2.0, 2), ZeroDenominator);
}

TEST_CASE("weak first stage is flagged, singular first stage raises") {
    const int n = 40;
    Matrix y(n, 3);
    for (int i = 0; i < n; ++i) {
        const double bj = (i % 2) ? 1.0 : -1.0;
        const double aj = ((i / 2) % 2) ? 1.0 : -1.0;
        y(i, 0) = 1.0 + 0.1 * i;
        y(i, 1) = aj + 1e-9 * bj;
        y(i, 2) = bj;
    }
    const PartitionScheme s = make_partition(3, 1, {0}, {1}, {2});
    const GveFit weak = estimate_gve(build_stacked_system(PanelData(y), s, InstrumentKind::Z1));
    CHECK(weak.weak_instruments);
    CHECK(weak.first_stage_f < 1e-6);

    Matrix exact = y;
    for (int i = 0; i < n; ++i) exact(i, 1) = ((i / 2) % 2) ? 1.0 : -1.0;
    CHECK_THROWS_AS(estimate_gve(build_stacked_system(PanelData(exact), s, InstrumentKind::Z1)), RankError);

    Rng rng(5);
    const auto kp = known_panel(rng, 60, 5, 1, 0.3);
    CHECK_FALSE(estimate_gve(build_stacked_system(kp.panel, make_partition(5, 1, {0}, {1}, {2, 3, 4}), InstrumentKind::Z1))
                    .weak_instruments);
}

TEST_CASE("Z1 rank error when N is smaller than the parameter count") {
    Rng rng(6);
    const auto kp = known_panel(rng, 2, 6, 1, 0.5, 2);
    const PartitionScheme s = make_partition(6, 1, {0, 1}, {2}, {3, 4, 5});
    CHECK_THROWS_AS(estimate_gve(build_stacked_system(kp.panel, s, InstrumentKind::Z1)), RankError);
}

TEST_CASE("estimate_loadings") {
    Rng rng(707);
    const auto kp = known_panel(rng, 30, 6, 1);
    const PartitionScheme s = make_partition(6, 1, {0, 1, 2}, {3, 4}, {5});
    const GveFit fit = estimate_gve(build_stacked_system(kp.panel, s, InstrumentKind::Z1));
    const ResidualPanel res = residualize(kp.panel, Vector());
    const LoadingEstimate le = estimate_loadings(res, factor_estimate(fit), &s);
    const double fbar = (kp.f(3, 0) + kp.f(4, 0)) / 2.0;
    CHECK(max_abs(le.lambda - kp.lambda * fbar) < 1e-8);

    Matrix c(4, 3);
    c.col(0).setConstant(2.5);
    c.col(1).setConstant(2.5);
    c.col(2).setConstant(2.5);
    c.row(1) *= -2.0;
    FactorEstimate ones;
    ones.theta = Matrix::Ones(1, 3);
    ones.groups = {0, 1, 2};
    const LoadingEstimate lc = estimate_loadings(ResidualPanel{c, Vector()}, ones);
    CHECK(lc.lambda(0, 0) == doctest::Approx(2.5));
    CHECK(lc.lambda(1, 0) == doctest::Approx(-5.0));

    FactorEstimate thin;
    thin.theta = Matrix::Ones(2, 1);
    thin.groups = {0};
    CHECK_THROWS_AS(estimate_loadings(ResidualPanel{c, Vector()}, thin), RankError);
}

TEST_CASE("estimated loadings track the truth on simulated data") {
    DgpSpec spec;
    spec.n = 100;
    spec.j = 10;
    spec.seed = 99;
    const DgpDraw d = gen_one_factor(spec);
    const ResidualPanel res = residualize(d.panel, Vector());
    const FactorEstimate pca = pca_factors(res, 1, PcaNormalization::FirstGroup);
    const LoadingEstimate le = estimate_loadings(res, pca);
    const Vector a = le.lambda.col(0).array() - le.lambda.col(0).mean();
    const Vector b = d.lambda.array() - d.lambda.mean();
    CHECK(a.dot(b) / (a.norm() * b.norm()) > 0.95);
}

TEST_CASE("PCA normalizations") {
    Rng rng(808);
    const auto kp = known_panel(rng, 20, 6, 1);
    const ResidualPanel res = residualize(kp.panel, Vector());
    const FactorEstimate first = pca_factors(res, 1, PcaNormalization::FirstGroup);
    for (int j = 0; j < 6; ++j) CHECK(first.theta(0, j) == doctest::Approx(kp.f(j, 0) / kp.f(0, 0)).epsilon(1e-10));

    const PartitionScheme s = make_partition(6, 1, {0}, {2, 3}, {4, 5});
    const FactorEstimate avg = pca_factors(res, 1, PcaNormalization::AjAverage, &s);
    const double fbar = (kp.f(2, 0) + kp.f(3, 0)) / 2.0;
    for (int j = 0; j < 6; ++j) CHECK(avg.theta(0, j) == doctest::Approx(kp.f(j, 0) / fbar).epsilon(1e-10));

    Matrix neg = -kp.panel.y();
    const FactorEstimate flipped = pca_factors(ResidualPanel{neg, Vector()}, 1, PcaNormalization::FirstGroup);
    CHECK(flipped.factors(0, 0) > 0.0);
    CHECK(max_abs(flipped.theta - first.theta) < 1e-10);

    Matrix with_zero(20, 7);
    with_zero << kp.panel.y(), Vector::Zero(20);
    const FactorEstimate z = pca_factors(ResidualPanel{with_zero, Vector()}, 1, PcaNormalization::FirstGroup);
    CHECK(std::abs(z.theta(0, 6)) < 1e-12);
}

TEST_CASE("PCA recovers two factors under the first-group normalization") {
    Rng rng(909);
    const auto kp = known_panel(rng, 30, 7, 2);
    const FactorEstimate est = pca_factors(residualize(kp.panel, Vector()), 2, PcaNormalization::FirstGroup);
    const Matrix f0 = kp.f.topRows(2);
    for (int j = 0; j < 7; ++j) {
        const Vector expected = f0.transpose().fullPivLu().solve(kp.f.row(j).transpose());
        CHECK(max_abs(est.theta.col(j) - expected) < 1e-8);
    }
}

TEST_CASE("Z1 residual orthogonality and cross moment") {
    Rng rng(1001);
    const auto kp = known_panel(rng, 80, 8, 1, 0.5, 1);
    const GveFit fit =
        estimate_gve(build_stacked_system(kp.panel, make_partition(8, 1, {0, 1}, {2, 3}, {4, 5, 6, 7}), InstrumentKind::Z1));
    CHECK(fit.moment_norm < 1e-8);
    CHECK(fit.residual_cross_moment.size() == 2);
    CHECK(fit.residual_cross_moment.allFinite());
    CHECK(fit.theta_se().rows() == 1);
    CHECK(fit.theta_se().cols() == 2);
}
