#include "gve/app/mc.hpp"

#include "gve/errors.hpp"
#include "gve/factor_iv.hpp"
#include "gve/lasso.hpp"
#include "gve/wgve.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

namespace gve::app {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

double rmse(const Vector& est, const Vector& truth) {
    return std::sqrt((est - truth).squaredNorm() / static_cast<double>(est.size()));
}

std::uint64_t cell_seed(std::uint64_t seed, const McCell& cell) {
    std::uint64_t h = seed;
    for (std::uint64_t v : {static_cast<std::uint64_t>(cell.n), static_cast<std::uint64_t>(cell.j),
                            static_cast<std::uint64_t>(cell.error_law), static_cast<std::uint64_t>(cell.loading),
                            static_cast<std::uint64_t>(cell.slope)}) {
        h = CounterRng(h, v, 0)();
    }
    return h;
}

IndexSet without(int j_total, std::initializer_list<int> drop) {
    IndexSet out;
    for (int g = 0; g < j_total; ++g) {
        if (std::find(drop.begin(), drop.end(), g) == drop.end()) out.push_back(g);
    }
    return out;
}

// theta_j = f_j / f_0, with group 0 normalizing and the rest instrumenting.
template <typename ThetaFn>
double single_normalization_rmse(const ResidualPanel& res, const Vector& f, ThetaFn&& theta_for) {
    const int jt = static_cast<int>(res.n_groups());
    Vector est(jt);
    est(0) = 1.0;
    for (int j = 1; j < jt; ++j) {
        const PartitionScheme scheme = make_partition(jt, 1, {j}, {0}, without(jt, {0, j}));
        est(j) = theta_for(scheme);
    }
    return rmse(est, f / f(0));
}

double score_pca(const ResidualPanel& res, const Vector& f) {
    const FactorEstimate est = pca_factors(res, 1, PcaNormalization::FirstGroup);
    return rmse(est.theta.row(0).transpose(), f / f(0));
}

double score_iv(const ResidualPanel& res, const Vector& f) {
    const PanelData panel = res.as_panel();
    return single_normalization_rmse(res, f, [&](const PartitionScheme& s) {
        return estimate_gve(build_stacked_system(panel, s, InstrumentKind::Z2)).theta(0, 0);
    });
}

double score_las(const ResidualPanel& res, const Vector& f) {
    const PenaltySpec pen = PenaltySpec::plug_in();
    return single_normalization_rmse(res, f, [&](const PartitionScheme& s) {
        return estimate_theta_lasso_iv(res, s, pen).theta(0, 0);
    });
}

// For each target j the remaining groups split into J/2 - 1 normalizing and
// J/2 instrumenting groups; theta_j = f_j / mean(f over the normalizing groups).
double score_gve(const ResidualPanel& res, const Vector& f) {
    const int jt = static_cast<int>(res.n_groups());
    const int m_aj = std::max(jt / 2 - 1, 1);
    const PanelData panel = res.as_panel();
    Vector est(jt);
    Vector truth(jt);
    for (int j = 0; j < jt; ++j) {
        const IndexSet rest = without(jt, {j});
        const IndexSet aj(rest.begin(), rest.begin() + m_aj);
        const IndexSet bj(rest.begin() + m_aj, rest.end());
        const PartitionScheme scheme = make_partition(jt, 1, {j}, aj, bj);
        est(j) = estimate_gve(build_stacked_system(panel, scheme, InstrumentKind::Z1)).theta(0, 0);
        double fbar = 0.0;
        for (int g : aj) fbar += f(g);
        truth(j) = f(j) / (fbar / m_aj);
    }
    return rmse(est, truth);
}

// Every single-group normalization for each target, Lasso first stage,
// equal weights; the truth is the equally weighted f_j / f_a.
double score_wgve(const ResidualPanel& res, const Vector& f) {
    const int jt = static_cast<int>(res.n_groups());
    WgveOptions opts;
    opts.first_stage = FirstStage::Lasso;
    opts.weighting = Weighting::Equal;
    Vector est(jt);
    Vector truth(jt);
    for (int j = 0; j < jt; ++j) {
        const NormalizationSet set = enumerate_partitions(jt, {j}, 1, 1);
        const WgveFit fit = estimate_wgve(res, set, opts);
        est(j) = fit.vartheta(0, 0);
        double t = 0.0;
        for (const PartitionEstimate& pe : fit.per_partition) t += f(j) / f(pe.scheme.aj.front());
        truth(j) = t / static_cast<double>(fit.per_partition.size());
    }
    return rmse(est, truth);
}

}  // namespace

const std::vector<Estimator>& all_estimators() {
    static const std::vector<Estimator> all{Estimator::Pca, Estimator::Iv, Estimator::Las, Estimator::Gve,
                                            Estimator::Wgve};
    return all;
}

std::string to_string(Estimator e) {
    switch (e) {
        case Estimator::Pca: return "PCA";
        case Estimator::Iv: return "IV";
        case Estimator::Las: return "LAS";
        case Estimator::Gve: return "GVE";
        case Estimator::Wgve: return "WGVE";
    }
    return "?";
}

std::string to_string(SlopeStage s) {
    switch (s) {
        case SlopeStage::None: return "none";
        case SlopeStage::Cce: return "CCE";
        case SlopeStage::Iee: return "IEE";
    }
    return "?";
}

std::string to_string(ErrorLaw e) { return e == ErrorLaw::Gaussian ? "gaussian" : "t3"; }

std::string to_string(LoadingDesign d) {
    switch (d) {
        case LoadingDesign::Uniform: return "uniform";
        case LoadingDesign::StdNormal: return "normal";
        case LoadingDesign::Mixed: return "mixed";
    }
    return "?";
}

Estimator parse_estimator(const std::string& name, const std::string& field) {
    for (Estimator e : all_estimators()) {
        if (lower(to_string(e)) == lower(name)) return e;
    }
    throw ValidationError(field + ": unknown estimator '" + name + "' (expected PCA, IV, LAS, GVE or WGVE)");
}

SlopeStage parse_slope_stage(const std::string& name, const std::string& field) {
    const std::string s = lower(name);
    if (s == "none") return SlopeStage::None;
    if (s == "cce") return SlopeStage::Cce;
    if (s == "iee") return SlopeStage::Iee;
    throw ValidationError(field + ": unknown first stage '" + name + "' (expected none, CCE or IEE)");
}

ErrorLaw parse_error_law(const std::string& name, const std::string& field) {
    const std::string s = lower(name);
    if (s == "gaussian" || s == "normal") return ErrorLaw::Gaussian;
    if (s == "t3") return ErrorLaw::T3;
    throw ValidationError(field + ": unknown error law '" + name + "' (expected gaussian or t3)");
}

LoadingDesign parse_loading_design(const std::string& name, const std::string& field) {
    const std::string s = lower(name);
    if (s == "uniform" || s == "1") return LoadingDesign::Uniform;
    if (s == "normal" || s == "2") return LoadingDesign::StdNormal;
    if (s == "mixed" || s == "3") return LoadingDesign::Mixed;
    throw ValidationError(field + ": unknown loading design '" + name + "' (expected uniform, normal or mixed)");
}

void McConfig::validate() const {
    if (grid.empty()) throw ValidationError("grid: no cells configured");
    if (replications < 1) throw ValidationError("replications: must be at least 1");
    if (threads < 1) throw ValidationError("threads: must be at least 1");
    if (estimators.empty()) throw ValidationError("estimators: list is empty");
    if (iee_max_iter < 1) throw ValidationError("iee-max-iter: must be at least 1");
    for (const McCell& c : grid) {
        if (c.n < 2) throw ValidationError("n: must be at least 2");
        if (c.j < 4) throw ValidationError("j: must be at least 4");
        if (kind == DgpKind::FactorAugmented && c.slope == SlopeStage::None) {
            throw ValidationError("first-stage: the factor-augmented design needs CCE or IEE");
        }
        if (kind == DgpKind::OneFactor && c.slope != SlopeStage::None) {
            throw ValidationError("first-stage: the one-factor design has no regressors");
        }
    }
}

std::vector<McCell> make_grid(const std::vector<int>& ns, const std::vector<int>& js,
                              const std::vector<ErrorLaw>& errors, const std::vector<LoadingDesign>& loadings,
                              const std::vector<SlopeStage>& slopes) {
    std::vector<McCell> out;
    for (SlopeStage s : slopes)
        for (LoadingDesign d : loadings)
            for (ErrorLaw e : errors)
                for (int n : ns)
                    for (int j : js) out.push_back(McCell{n, j, e, d, s});
    return out;
}

ReplicationScores run_replication(const McConfig& config, const McCell& cell, std::uint64_t rep) {
    DgpSpec spec;
    spec.kind = config.kind;
    spec.n = cell.n;
    spec.j = cell.j;
    spec.error_law = cell.error_law;
    spec.loading_design = cell.loading;
    spec.seed = cell_seed(config.seed, cell);
    spec.replication = rep;
    const DgpDraw draw = generate(spec);

    ReplicationScores scores;
    for (Estimator e : config.estimators) scores[e] = kNaN;

    ResidualPanel res;
    try {
        switch (cell.slope) {
            case SlopeStage::None:
                res = ResidualPanel{draw.panel.y(), Vector()};
                break;
            case SlopeStage::Cce:
                res = residualize(draw.panel, cce_mean_group(draw.panel).beta);
                break;
            case SlopeStage::Iee:
                res = residualize(draw.panel, iee(draw.panel, 1, config.iee_max_iter, config.iee_tol, true).beta);
                break;
        }
    } catch (const Error&) {
        return scores;
    }

    for (Estimator e : config.estimators) {
        try {
            switch (e) {
                case Estimator::Pca: scores[e] = score_pca(res, draw.f); break;
                case Estimator::Iv: scores[e] = score_iv(res, draw.f); break;
                case Estimator::Las: scores[e] = score_las(res, draw.f); break;
                case Estimator::Gve: scores[e] = score_gve(res, draw.f); break;
                case Estimator::Wgve: scores[e] = score_wgve(res, draw.f); break;
            }
        } catch (const Error&) {
            scores[e] = kNaN;
        }
    }
    return scores;
}

McReport run_mc(const McConfig& config) {
    config.validate();
    const auto start = std::chrono::steady_clock::now();
    McReport report;
    report.design = config.kind == DgpKind::OneFactor ? "one-factor" : "factor-augmented";
    report.replications = config.replications;
    report.seed = config.seed;

    const auto r_total = static_cast<std::size_t>(config.replications);
    for (const McCell& cell : config.grid) {
        std::vector<ReplicationScores> results(r_total);
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        auto worker = [&] {
            for (;;) {
                const std::size_t rep = next.fetch_add(1);
                if (rep >= r_total) return;
                try {
                    results[rep] = run_replication(config, cell, rep);
                } catch (...) {
                    std::lock_guard<std::mutex> lock(failure_mutex);
                    if (!failure) failure = std::current_exception();
                    next = r_total;
                    return;
                }
            }
        };
        const int n_threads = std::min<int>(config.threads, static_cast<int>(r_total));
        std::vector<std::thread> pool;
        for (int t = 1; t < n_threads; ++t) pool.emplace_back(worker);
        worker();
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);

        CellReport cr;
        cr.cell = cell;
        for (Estimator e : config.estimators) {
            EstimatorSummary s;
            double sum = 0.0;
            double sq = 0.0;
            int ok = 0;
            for (const auto& rep : results) {
                const double v = rep.at(e);
                s.per_replication.push_back(v);
                if (std::isfinite(v)) {
                    sum += v;
                    sq += v * v;
                    ++ok;
                } else {
                    ++s.failures;
                }
            }
            s.rmse = ok > 0 ? sum / ok : kNaN;
            if (ok > 1) {
                const double var = std::max(sq - sum * sum / ok, 0.0) / (ok - 1);
                s.mc_se = std::sqrt(var / ok);
            }
            if (100 * s.failures > config.replications) cr.flagged = true;
            cr.estimators.emplace(e, std::move(s));
        }
        report.cells.push_back(std::move(cr));
    }
    report.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return report;
}

std::string format_mc_csv(const McReport& report, bool timestamp) {
    std::ostringstream os;
    if (timestamp) {
        const std::time_t now = std::time(nullptr);
        char buf[32];
        std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
        os << "# generated " << buf << ", wall time " << report.wall_seconds << " s\n";
    }
    os << "design,n,j,errors,loadings,first_stage,estimator,rmse,mc_se,failures,replications,seed,flagged\n";
    os.precision(6);
    for (const CellReport& cr : report.cells) {
        for (const auto& [e, s] : cr.estimators) {
            os << report.design << ',' << cr.cell.n << ',' << cr.cell.j << ',' << to_string(cr.cell.error_law) << ','
               << to_string(cr.cell.loading) << ',' << to_string(cr.cell.slope) << ',' << to_string(e) << ','
               << std::fixed << s.rmse << ',' << s.mc_se << std::defaultfloat << ',' << s.failures << ','
               << report.replications << ',' << report.seed << ',' << (cr.flagged ? 1 : 0) << '\n';
        }
    }
    return os.str();
}

double paired_t(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) throw ValidationError("paired_t: samples differ in length");
    double sum = 0.0;
    double sq = 0.0;
    int n = 0;
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (!std::isfinite(a[k]) || !std::isfinite(b[k])) continue;
        const double d = a[k] - b[k];
        sum += d;
        sq += d * d;
        ++n;
    }
    if (n < 2) return kNaN;
    const double mean = sum / n;
    const double var = std::max(sq - sum * sum / n, 0.0) / (n - 1);
    if (var == 0.0) return mean == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), mean);
    return mean / std::sqrt(var / n);
}

}  // namespace gve::app
