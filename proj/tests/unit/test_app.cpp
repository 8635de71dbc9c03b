#include "fixtures.hpp"

#include "gve/app/estimate.hpp"
#include "gve/app/mc.hpp"
#include "gve/app/partitions.hpp"
#include "gve/errors.hpp"

#include <doctest.h>

#include <cmath>
#include <string>

using namespace gve;
using namespace gve::app;

TEST_CASE("partition listing") {
    PartitionsQuery q;
    q.j_total = 5;
    q.m_a0 = 1;
    q.m_aj = 2;
    q.r = 1;
    q.cap = 10;
    const std::string text = describe_partitions(q);
    CHECK(text.find("Q_J=6\n") != std::string::npos);
    CHECK(text.find("Q_J*=n/a") != std::string::npos);
    CHECK(text.find("listed=6\n") != std::string::npos);
    CHECK(text.find("1,2 3,4 5\n") != std::string::npos);

    PartitionsQuery single;
    single.j_total = 3;
    const std::string one = describe_partitions(single);
    CHECK(one.find("Q_J=2\n") != std::string::npos);
    CHECK(one.find("Q_J*=1\n") != std::string::npos);
    CHECK(one.find("listed=1\n") != std::string::npos);

    PartitionsQuery big;
    big.j_total = 22;
    CHECK(describe_partitions(big).find("Q_J*=1\n") != std::string::npos);

    PartitionsQuery huge;
    huge.j_total = 71;
    huge.m_aj = 35;
    huge.r = 1;
    CHECK_THROWS_AS(describe_partitions(huge), CapacityError);
    huge.cap = 3;
    CHECK(describe_partitions(huge).find("listed=3\n") != std::string::npos);

    PartitionsQuery bad;
    bad.j_total = 2;
    CHECK_THROWS_AS(describe_partitions(bad), ValidationError);
}

TEST_CASE("Monte Carlo replications are deterministic and thread invariant") {
    McConfig cfg;
    cfg.grid = make_grid({30}, {10}, {ErrorLaw::Gaussian, ErrorLaw::T3}, {LoadingDesign::Uniform}, {SlopeStage::None});
    cfg.replications = 4;
    cfg.seed = 11;
    const ReplicationScores a = run_replication(cfg, cfg.grid[0], 2);
    const ReplicationScores b = run_replication(cfg, cfg.grid[0], 2);
    CHECK(a == b);
    CHECK(a.size() == all_estimators().size());

    const McReport serial = run_mc(cfg);
    cfg.threads = 3;
    const McReport threaded = run_mc(cfg);
    CHECK(format_mc_csv(serial, false) == format_mc_csv(threaded, false));
    REQUIRE(serial.cells.size() == 2);
    for (const auto& [e, s] : serial.cells[0].estimators) {
        CHECK(s.per_replication.size() == 4);
        CHECK(std::isfinite(s.rmse));
    }
}

TEST_CASE("Monte Carlo configuration errors name the field") {
    try {
        parse_estimator("XYZ");
        FAIL("expected ValidationError");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).rfind("estimators:", 0) == 0);
    }
    CHECK(parse_estimator("wgve") == Estimator::Wgve);
    CHECK_THROWS_AS(parse_error_law("cauchy"), ValidationError);
    McConfig cfg;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg.grid = make_grid({30}, {10}, {ErrorLaw::Gaussian}, {LoadingDesign::Uniform}, {SlopeStage::None});
    cfg.replications = 0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("paired t statistic") {
    CHECK(paired_t({2, 3, 4, 5}, {1, 1, 1, 1}) > 0.0);
    CHECK(paired_t({1, 1, 1, 1}, {2, 3, 4, 5}) < 0.0);
    const double nan = std::nan("");
    CHECK(std::isfinite(paired_t({1, nan, 2, 4}, {0, 1, 1, 1})));
}

TEST_CASE("estimate pipeline without slopes recovers exact PCA factors") {
    gve::test::Rng rng(1);
    const auto kp = gve::test::known_panel(rng, 40, 8, 1);
    EstimateConfig cfg;
    cfg.factor = FactorChoice::Pca;
    const EstimateOutput out = run_estimate(kp.panel, cfg);
    REQUIRE(out.result.theta.rows() == 1);
    for (std::size_t c = 0; c < out.result.groups.size(); ++c) {
        const int g = std::stoi(out.result.groups[c]) - 1;
        CHECK(out.result.theta(0, static_cast<Eigen::Index>(c)) == doctest::Approx(kp.f(g, 0) / kp.f(0, 0)).epsilon(1e-9));
    }
    CHECK(out.result.meta.at("slope") == "none");
}

TEST_CASE("estimate pipeline chains slope and factor stages") {
    gve::test::Rng rng(2);
    const auto kp = gve::test::known_panel(rng, 200, 10, 1, 0.2, 1);

    EstimateConfig gve_cfg;
    gve_cfg.slope = SlopeChoice::User;
    gve_cfg.user_beta = {kp.beta(0)};
    gve_cfg.aj = {"2"};
    gve_cfg.a0 = {"1"};
    gve_cfg.loadings = true;
    const EstimateOutput g = run_estimate(kp.panel, gve_cfg);
    CHECK(g.result.theta(0, 0) == doctest::Approx(kp.f(0, 0) / kp.f(1, 0)).epsilon(0.05));
    CHECK(g.result.lambda.rows() == 200);
    CHECK(g.result.meta.at("slope") == "user");

    EstimateConfig joint = gve_cfg;
    joint.slope = SlopeChoice::None;
    const EstimateOutput jg = run_estimate(kp.panel, joint);
    CHECK(jg.result.meta.at("slope") == "joint with GVE");
    CHECK(jg.result.theta(0, 0) == doctest::Approx(kp.f(0, 0) / kp.f(1, 0)).epsilon(0.05));

    EstimateConfig w;
    w.slope = SlopeChoice::TwoWayFe;
    w.factor = FactorChoice::Wgve;
    w.first_stage = FirstStage::BlockAverage;
    const EstimateOutput wo = run_estimate(kp.panel, w);
    CHECK(wo.result.meta.at("estimator") == "WGVE");
    CHECK(wo.result.theta.allFinite());

    EstimateConfig cce;
    cce.slope = SlopeChoice::Cce;
    cce.aj = {"2"};
    cce.a0 = {"1"};
    const auto plain = gve::test::known_panel(rng, 50, 8, 1, 0.1);
    CHECK_THROWS_AS(run_estimate(plain.panel, cce), ValidationError);

    EstimateConfig missing;
    CHECK_THROWS_AS(run_estimate(plain.panel, missing), ValidationError);
    missing.aj = {"99"};
    missing.a0 = {"1"};
    CHECK_THROWS_AS(run_estimate(plain.panel, missing), ValidationError);
    CHECK_THROWS_AS(run_estimate(EstimateConfig{}), ValidationError);
    CHECK_THROWS_AS(parse_slope_choice("magic"), ValidationError);
}
