#include "gve/app/estimate.hpp"
#include "gve/app/mc.hpp"
#include "gve/app/partitions.hpp"
#include "gve/errors.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <thread>

namespace {

struct Globals {
    std::uint64_t seed = 20240101;
    int threads = 0;
    std::string out;
};

void write_output(const std::string& text, const std::string& path) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw gve::IoError("cannot open " + path + " for writing");
    f << text;
    if (!f.flush()) throw gve::IoError("write failed for " + path);
}

int resolve_threads(int requested) {
    if (requested > 0) return requested;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Grouped variable estimation for factor-augmented panels"};
    app.set_config("--config", "", "INI config file; [mc-run], [estimate] and [partitions] sections hold subcommand keys");
    app.require_subcommand(1);

    Globals g;
    app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
    app.add_option("--threads", g.threads, "Worker threads (0 = hardware concurrency)");
    app.add_option("--out", g.out, "Output file ('-' or empty for stdout)");

    // mc-run
    auto* mc = app.add_subcommand("mc-run", "Monte Carlo tables of factor RMSE");
    mc->fallthrough();
    std::string design = "one-factor";
    std::vector<int> ns{50, 100};
    std::vector<int> js{10, 20};
    std::vector<std::string> errors{"gaussian"};
    std::vector<std::string> loadings{"uniform"};
    std::vector<std::string> first_stages;
    std::vector<std::string> estimators{"PCA", "IV", "LAS", "GVE", "WGVE"};
    int replications = 500;
    int iee_max_iter = 500;
    double iee_tol = 1e-6;
    mc->add_option("--design", design, "one-factor or factor-augmented")->capture_default_str();
    mc->add_option("--n", ns, "Subject counts")->delimiter(',')->capture_default_str();
    mc->add_option("--j", js, "Group counts")->delimiter(',')->capture_default_str();
    mc->add_option("--errors", errors, "gaussian, t3")->delimiter(',')->capture_default_str();
    mc->add_option("--loadings", loadings, "uniform, normal, mixed")->delimiter(',')->capture_default_str();
    mc->add_option("--first-stage", first_stages, "CCE, IEE (factor-augmented design)")->delimiter(',');
    mc->add_option("--estimators", estimators, "Subset of PCA, IV, LAS, GVE, WGVE")->delimiter(',')->capture_default_str();
    mc->add_option("--replications", replications, "Replications per cell")->capture_default_str();
    mc->add_option("--iee-max-iter", iee_max_iter, "IEE iteration cap")->capture_default_str();
    mc->add_option("--iee-tol", iee_tol, "IEE convergence tolerance")->capture_default_str();

    // estimate
    auto* est = app.add_subcommand("estimate", "Estimate normalized factors from a long CSV");
    est->fallthrough();
    gve::app::EstimateConfig ec;
    std::string slope = "none";
    std::string factor = "gve";
    std::string instruments = "averages";
    std::string wgve_first_stage = "lasso";
    std::string weights = "equal";
    std::string order = "lexicographic";
    std::uint64_t cap = 0;
    std::uint64_t truncation_c = 0;
    est->add_option("--data", ec.data_path, "Long-format CSV")->required();
    est->add_option("--subject-col", ec.columns.subject, "Subject id column")->capture_default_str();
    est->add_option("--group-col", ec.columns.group, "Group id column")->capture_default_str();
    est->add_option("--y-col", ec.columns.y, "Outcome column")->capture_default_str();
    est->add_option("--x-cols", ec.columns.x, "Regressor columns")->delimiter(',');
    est->add_option("--group-order", ec.columns.group_order, "Explicit group order")->delimiter(',');
    est->add_option("--slope", slope, "none, fe, cce, iee or user")->capture_default_str();
    est->add_option("--beta", ec.user_beta, "Slopes for --slope user")->delimiter(',');
    est->add_option("--factor", factor, "pca, gve or wgve")->capture_default_str();
    est->add_option("--r", ec.r, "Number of factors")->capture_default_str();
    est->add_option("--a0", ec.a0, "Target groups")->delimiter(',');
    est->add_option("--aj", ec.aj, "Normalization groups")->delimiter(',');
    est->add_option("--bj", ec.bj, "Instrument groups")->delimiter(',');
    est->add_option("--instruments", instruments, "GVE instruments: averages or all")->capture_default_str();
    est->add_option("--m-aj", ec.m_aj, "WGVE normalization set size (default r)");
    est->add_option("--cap", cap, "WGVE partition cap");
    est->add_option("--truncation-c", truncation_c, "WGVE truncation constant C");
    est->add_option("--order", order, "WGVE partition order: lexicographic or random")->capture_default_str();
    est->add_option("--wgve-first-stage", wgve_first_stage, "lasso, average or 2sls")->capture_default_str();
    est->add_option("--weights", weights, "equal or optimal")->capture_default_str();
    est->add_flag("--loadings", ec.loadings, "Also estimate subject loadings");

    // partitions
    auto* parts = app.add_subcommand("partitions", "Count and list normalization partitions");
    parts->fallthrough();
    gve::app::PartitionsQuery pq;
    std::uint64_t parts_cap = 0;
    parts->add_option("--J", pq.j_total, "Number of groups")->required();
    parts->add_option("--m-a0", pq.m_a0, "Target set size")->capture_default_str();
    parts->add_option("--m-aj", pq.m_aj, "Normalization set size")->capture_default_str();
    parts->add_option("--r", pq.r, "Number of factors")->capture_default_str();
    parts->add_option("--C", pq.c, "Truncation constant")->capture_default_str();
    parts->add_option("--cap", parts_cap, "List at most this many partitions");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    }

    try {
        if (mc->parsed()) {
            gve::app::McConfig cfg;
            if (design == "one-factor") {
                cfg.kind = gve::DgpKind::OneFactor;
            } else if (design == "factor-augmented") {
                cfg.kind = gve::DgpKind::FactorAugmented;
            } else {
                throw gve::ValidationError("design: unknown design '" + design + "'");
            }
            std::vector<gve::ErrorLaw> el;
            for (const auto& s : errors) el.push_back(gve::app::parse_error_law(s));
            std::vector<gve::LoadingDesign> ld;
            for (const auto& s : loadings) ld.push_back(gve::app::parse_loading_design(s));
            std::vector<gve::app::SlopeStage> ss;
            for (const auto& s : first_stages) ss.push_back(gve::app::parse_slope_stage(s));
            if (ss.empty()) {
                ss.push_back(cfg.kind == gve::DgpKind::OneFactor ? gve::app::SlopeStage::None : gve::app::SlopeStage::Cce);
            }
            cfg.estimators.clear();
            for (const auto& s : estimators) cfg.estimators.push_back(gve::app::parse_estimator(s));
            cfg.grid = gve::app::make_grid(ns, js, el, ld, ss);
            cfg.replications = replications;
            cfg.seed = g.seed;
            cfg.threads = resolve_threads(g.threads);
            cfg.iee_max_iter = iee_max_iter;
            cfg.iee_tol = iee_tol;
            const gve::app::McReport report = gve::app::run_mc(cfg);
            write_output(gve::app::format_mc_csv(report), g.out);
            for (const auto& cell : report.cells) {
                if (cell.flagged) {
                    std::cerr << "warning: cell n=" << cell.cell.n << " j=" << cell.cell.j
                              << " has estimators failing in more than 1% of replications\n";
                }
            }
        } else if (est->parsed()) {
            ec.slope = gve::app::parse_slope_choice(slope);
            ec.factor = gve::app::parse_factor_choice(factor);
            if (instruments == "averages") ec.instruments = gve::InstrumentKind::Z1;
            else if (instruments == "all") ec.instruments = gve::InstrumentKind::Z2;
            else throw gve::ValidationError("instruments: expected averages or all");
            if (order == "lexicographic") ec.order = gve::PartitionOrder::Lexicographic;
            else if (order == "random") ec.order = gve::PartitionOrder::Random;
            else throw gve::ValidationError("order: expected lexicographic or random");
            ec.first_stage = gve::app::parse_first_stage(wgve_first_stage);
            ec.weighting = gve::app::parse_weighting(weights);
            if (cap > 0) ec.cap = cap;
            if (truncation_c > 0) ec.truncation_c = truncation_c;
            ec.seed = g.seed;
            const gve::app::EstimateOutput res = gve::app::run_estimate(ec);
            std::cerr << "normalization: " << res.normalization << '\n';
            for (const auto& note : res.notes) std::cerr << "note: " << note << '\n';
            write_output(gve::format_results_csv(res.result), g.out);
        } else if (parts->parsed()) {
            if (parts_cap > 0) pq.cap = parts_cap;
            write_output(gve::app::describe_partitions(pq), g.out);
        }
    } catch (const gve::ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
