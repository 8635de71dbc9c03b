#include "oracle.hpp"

#include "gve/dgp.hpp"
#include "gve/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace gve;

TEST_CASE("counter RNG streams are reproducible and distinct") {
    CounterRng a(1, 2, 3);
    CounterRng b(1, 2, 3);
    CounterRng c(1, 2, 4);
    bool differ = false;
    for (int k = 0; k < 100; ++k) {
        const auto x = a();
        CHECK(x == b());
        differ = differ || x != c();
    }
    CHECK(differ);
    CounterRng u(9, 9, 9);
    for (int k = 0; k < 1000; ++k) {
        const double v = u.uniform();
        CHECK(v >= 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("factor path without innovations decays geometrically") {
    DgpSpec spec;
    spec.j = 5;
    spec.innovation_scale = 0.0;
    const Vector f = gen_factor_path(spec);
    for (int j = 0; j < 5; ++j) CHECK(f(j) == doctest::Approx(std::pow(0.8, j + 50)).epsilon(1e-12));
}

TEST_CASE("factor path with rho = 0 is iid uniform") {
    DgpSpec spec;
    spec.j = 20000;
    spec.rho = 0.0;
    const Vector f = gen_factor_path(spec);
    CHECK(f.minCoeff() >= 0.0);
    CHECK(f.maxCoeff() < 1.0);
    CHECK(f.mean() == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("stationary factor mean") {
    DgpSpec spec;
    spec.j = 100000;
    spec.seed = 77;
    const Vector f = gen_factor_path(spec);
    CHECK(std::abs(f.mean() - 0.5 / (1.0 - 0.8)) < 0.05);
}

TEST_CASE("one-factor design") {
    DgpSpec spec;
    spec.n = 30;
    spec.j = 8;
    spec.error_scale = 0.0;
    const DgpDraw d = gen_one_factor(spec);
    Eigen::JacobiSVD<Matrix> svd(d.panel.y());
    CHECK(svd.singularValues()(1) < 1e-12 * svd.singularValues()(0));
    CHECK(d.lambda.minCoeff() >= 0.5);
    CHECK(d.lambda.maxCoeff() <= 3.5);
    CHECK(d.panel.n_regressors() == 0);

    spec.error_scale = 1.0;
    const DgpDraw a = gen_one_factor(spec);
    const DgpDraw b = gen_one_factor(spec);
    CHECK((a.panel.y().array() == b.panel.y().array()).all());
    spec.replication = 1;
    const DgpDraw c = gen_one_factor(spec);
    CHECK_FALSE((a.panel.y().array() == c.panel.y().array()).all());
}

TEST_CASE("t3 errors have heavier tails than Gaussian") {
    DgpSpec spec;
    spec.n = 1000;
    spec.j = 1000;
    spec.seed = 3;
    const double gauss = gen_one_factor(spec).u.cwiseAbs().mean();
    spec.error_law = ErrorLaw::T3;
    const Matrix t = gen_one_factor(spec).u;
    CHECK(t.cwiseAbs().mean() > gauss);
    // E|t_3| = 2 sqrt(3) / pi, E|N(0,1)| = sqrt(2 / pi).
    CHECK(t.cwiseAbs().mean() == doctest::Approx(2.0 * std::sqrt(3.0) / M_PI).epsilon(0.01));
    CHECK(gauss == doctest::Approx(std::sqrt(2.0 / M_PI)).epsilon(0.01));
}

TEST_CASE("factor-augmented design") {
    DgpSpec spec;
    spec.kind = DgpKind::FactorAugmented;
    spec.loading_design = LoadingDesign::StdNormal;
    spec.n = 5000;
    spec.j = 20;
    spec.seed = 5;
    const DgpDraw d = gen_factor_augmented(spec);
    REQUIRE(d.panel.n_regressors() == 2);
    CHECK(d.beta.size() == 2);
    const Matrix lf = d.lambda * d.f.transpose();
    const Vector x2 = d.panel.x(1).reshaped();
    const Vector v = lf.reshaped();
    const Vector a = x2.array() - x2.mean();
    const Vector b = v.array() - v.mean();
    CHECK(std::abs(a.dot(b) / (a.norm() * b.norm())) < 0.05);
}

TEST_CASE("first regressor loads on lambda and f with the configured coefficients") {
    DgpSpec spec;
    spec.kind = DgpKind::FactorAugmented;
    spec.n = 10000;
    spec.j = 5;
    spec.seed = 6;
    spec.slope.c[0] = 0.0;
    const DgpDraw d = gen_factor_augmented(spec);
    Matrix design(spec.n * spec.j, 2);
    Vector x1(spec.n * spec.j);
    for (int j = 0; j < spec.j; ++j) {
        for (int i = 0; i < spec.n; ++i) {
            const int row = j * spec.n + i;
            design(row, 0) = d.lambda(i);
            design(row, 1) = d.f(j);
            x1(row) = d.panel.x(0)(i, j);
        }
    }
    const Vector coef = gve::test::naive_ols(design, x1);
    CHECK(std::abs(coef(0) - 1.0) < 0.02);
    CHECK(std::abs(coef(1) - 2.0) < 0.02);
}

TEST_CASE("mixed loading design") {
    DgpSpec spec;
    spec.kind = DgpKind::FactorAugmented;
    spec.loading_design = LoadingDesign::Mixed;
    spec.n = 101;
    spec.j = 10;
    const DgpDraw d = gen_factor_augmented(spec);
    const int head = static_cast<int>(std::ceil(0.9 * spec.n));
    CHECK(head == 91);
    const Vector tail = d.lambda.tail(spec.n - head);
    CHECK(tail.minCoeff() >= 0.0);
    CHECK(tail.maxCoeff() <= 0.5);
    CHECK(tail.sum() == doctest::Approx(0.5).epsilon(1e-12));

    spec.mixture_sum_over_all = true;
    const DgpDraw all = gen_factor_augmented(spec);
    CHECK(all.lambda.tail(spec.n - head).sum() < 0.5);
    CHECK((all.lambda.head(head).array() == d.lambda.head(head).array()).all());
}

TEST_CASE("uniform loading mean") {
    DgpSpec spec;
    spec.n = 10000;
    spec.j = 3;
    spec.seed = 8;
    const DgpDraw d = gen_one_factor(spec);
    const double se = std::sqrt(0.75 / spec.n);  // U[0.5, 3.5] has variance 9 / 12
    CHECK(std::abs(d.lambda.mean() - 2.0) < 3.0 * se);
}

TEST_CASE("DGP settings validation") {
    DgpSpec spec;
    spec.n = 1;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.n = 10;
    spec.j = 2;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.j = 5;
    spec.rho = 1.0;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec.rho = 0.8;
    spec.factor_scale = 0.0;
    CHECK_THROWS_AS(gen_one_factor(spec), ValidationError);
}
