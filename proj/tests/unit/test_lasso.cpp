#include "fixtures.hpp"
#include "oracle.hpp"

#include "gve/errors.hpp"
#include "gve/lasso.hpp"
#include "gve/wgve.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace gve;
using gve::test::gaussian_matrix;
using gve::test::Rng;

namespace {

double max_abs(const Matrix& m) { return m.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("plug-in penalty level") {
    // 2 * 1.1 * sqrt(100) * Phi^{-1}(1 - 0.05 / 20); Phi^{-1}(0.9975) = 2.807033768...
    CHECK(plug_in_lambda(100, 10, 1.1, 0.05) == doctest::Approx(22.0 * 2.807033768343811).epsilon(1e-12));
    CHECK_THROWS_AS(plug_in_lambda(0, 10, 1.1, 0.05), ValidationError);
    CHECK_THROWS_AS(plug_in_lambda(10, 10, 1.1, 0.0), ValidationError);
}

TEST_CASE("lambda = 0 reproduces OLS") {
    Rng rng(1);
    for (int rep = 0; rep < 20; ++rep) {
        const Matrix x = gaussian_matrix(rng, 60, 8);
        const Vector y = gaussian_matrix(rng, 60, 1);
        const LassoFit fit = lasso_first_stage(y, x, PenaltySpec::fixed(0.0));
        CHECK(max_abs(fit.pi - gve::test::naive_ols(x, y)) < 1e-8);
    }
}

TEST_CASE("a huge penalty shrinks everything to zero") {
    Rng rng(2);
    const Matrix x = gaussian_matrix(rng, 30, 5);
    const Vector y = gaussian_matrix(rng, 30, 1);
    const LassoFit fit = lasso_first_stage(y, x, PenaltySpec::fixed(1e6));
    CHECK(fit.pi.isZero(0.0));
    CHECK(fit.fitted.isZero(0.0));
    CHECK(fit.active_set.empty());
    CHECK(fit.residual_rms == doctest::Approx(std::sqrt(y.squaredNorm() / 30.0)));
}

TEST_CASE("sparse recovery with the plug-in penalty") {
    Rng rng(3);
    int covered = 0;
    for (int rep = 0; rep < 200; ++rep) {
        const auto [x, y] = gve::test::sparse_design(rng);
        const LassoFit fit = lasso_first_stage(y, x, PenaltySpec::plug_in());
        const bool a = std::find(fit.active_set.begin(), fit.active_set.end(), 3) != fit.active_set.end();
        const bool b = std::find(fit.active_set.begin(), fit.active_set.end(), 41) != fit.active_set.end();
        covered += (a && b) ? 1 : 0;
        CHECK(kkt_violation(fit, y, x) <= 1e-8);
    }
    CHECK(covered >= 180);
}

TEST_CASE("fixed penalty defaults to column root-mean-square loadings") {
    Rng rng(4);
    const Matrix x = gaussian_matrix(rng, 40, 6);
    const Vector y = gaussian_matrix(rng, 40, 1);
    const LassoFit fit = lasso_first_stage(y, x, PenaltySpec::fixed(5.0));
    for (int k = 0; k < 6; ++k) CHECK(fit.loadings(k) == doctest::Approx(x.col(k).norm() / std::sqrt(40.0)));
    CHECK(kkt_violation(fit, y, x) <= 1e-8);
}

TEST_CASE("duplicate instrument columns are handled") {
    Rng rng(5);
    Matrix x = gaussian_matrix(rng, 40, 4);
    x.col(2) = x.col(1);
    const Vector y = 2.0 * x.col(1) + 0.1 * gaussian_matrix(rng, 40, 1);
    const LassoFit fit = lasso_first_stage(y, x, PenaltySpec::fixed(10.0));
    CHECK(kkt_violation(fit, y, x) <= 1e-8);
    CHECK(fit.pi(1) != 0.0);
}

TEST_CASE("lasso input validation") {
    const Matrix x = Matrix::Ones(5, 2);
    CHECK_THROWS_AS(lasso_first_stage(Vector::Ones(4), x, PenaltySpec::plug_in()), ValidationError);
    CHECK_THROWS_AS(lasso_first_stage(Vector::Ones(1), Matrix::Ones(1, 2), PenaltySpec::plug_in()), ValidationError);
    Matrix bad = x;
    bad(0, 0) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(lasso_first_stage(Vector::Ones(5), bad, PenaltySpec::plug_in()), ValidationError);
    CHECK_THROWS_AS(lasso_first_stage(Vector::Ones(5), x, PenaltySpec::fixed(-1.0)), ValidationError);
    PenaltySpec pen = PenaltySpec::fixed(1.0);
    pen.loadings = Vector::Ones(3);
    CHECK_THROWS_AS(lasso_first_stage(Vector::Ones(5), x, pen), ValidationError);
}

TEST_CASE("sweep budget exhaustion raises ConvergenceError") {
    Rng rng(6);
    const Matrix x = gaussian_matrix(rng, 50, 40);
    const Vector y = x.col(0) + x.col(1) + gaussian_matrix(rng, 50, 1);
    PenaltySpec pen = PenaltySpec::fixed(1.0);
    pen.max_sweeps = 1;
    CHECK_THROWS_AS(lasso_first_stage(y, x, pen), ConvergenceError);
}

TEST_CASE("Lasso-IV") {
    Rng rng(7);
    const auto kp = gve::test::known_panel(rng, 60, 10, 1);
    const ResidualPanel res = residualize(kp.panel, Vector());
    IndexSet bj;
    for (int g = 2; g < 10; ++g) bj.push_back(g);
    const PartitionScheme s = make_partition(10, 1, {0}, {1}, bj);
    const LassoIvFit fit = estimate_theta_lasso_iv(res, s, PenaltySpec::plug_in());
    CHECK(fit.theta(0, 0) == doctest::Approx(kp.f(0, 0) / kp.f(1, 0)).epsilon(1e-10));

    const auto noisy = gve::test::known_panel(rng, 80, 8, 1, 0.5);
    const ResidualPanel nr = residualize(noisy.panel, Vector());
    const PartitionScheme t = make_partition(8, 1, {0, 3}, {1}, {2, 4, 5, 6, 7});
    const LassoIvFit zero = estimate_theta_lasso_iv(nr, t, PenaltySpec::fixed(0.0));
    const GveFit two_sls = estimate_gve(build_stacked_system(noisy.panel, t, InstrumentKind::Z2));
    CHECK(max_abs(zero.theta - two_sls.theta) < 1e-8);

    CHECK_THROWS_AS(estimate_theta_lasso_iv(nr, make_partition(8, 1, {0}, {1, 2}, {3, 4, 5}), PenaltySpec::plug_in()),
                    SizeError);
    CHECK_THROWS_AS(estimate_theta_lasso_iv(nr, t, PenaltySpec::fixed(1e9)), RankError);
}

TEST_CASE("Lasso-IV influence rows reproduce its covariance") {
    Rng rng(8);
    const auto kp = gve::test::known_panel(rng, 70, 9, 2, 0.4);
    const PartitionScheme s = make_partition(9, 2, {0}, {1, 2}, {3, 4, 5, 6, 7, 8});
    const LassoIvFit fit = estimate_theta_lasso_iv(residualize(kp.panel, Vector()), s, PenaltySpec::plug_in());
    CHECK(fit.first_stage.size() == 2);
    CHECK(max_abs(fit.vcov - fit.influence.transpose() * fit.influence) < 1e-12 * max_abs(fit.vcov));
    CHECK(max_abs(fit.theta - gve::test::true_theta(kp.f, s)) < 0.5);
}
