#include "gve/app/estimate.hpp"

#include "gve/errors.hpp"
#include "gve/factor_iv.hpp"
#include "gve/slope.hpp"

#include <algorithm>
#include <cctype>

namespace gve::app {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return s;
}

int group_index(const PanelData& panel, const std::string& label) {
    const auto& labels = panel.group_labels();
    if (!labels.empty()) {
        const auto it = std::find(labels.begin(), labels.end(), label);
        if (it != labels.end()) return static_cast<int>(it - labels.begin());
        throw ValidationError("unknown group '" + label + "'");
    }
    try {
        std::size_t used = 0;
        const int g = std::stoi(label, &used);
        if (used == label.size() && g >= 1 && g <= panel.n_groups()) return g - 1;
    } catch (const std::exception&) {
    }
    throw ValidationError("group '" + label + "' is not a 1-based group number");
}

IndexSet resolve(const PanelData& panel, const std::vector<std::string>& labels) {
    IndexSet out;
    for (const auto& l : labels) out.push_back(group_index(panel, l));
    return out;
}

IndexSet complement(int j_total, const IndexSet& a, const IndexSet& b) {
    IndexSet out;
    for (int g = 0; g < j_total; ++g) {
        if (std::find(a.begin(), a.end(), g) == a.end() && std::find(b.begin(), b.end(), g) == b.end()) {
            out.push_back(g);
        }
    }
    return out;
}

std::string describe(const PanelData& panel, const IndexSet& s) {
    std::string out = "{";
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ", ";
        out += panel.group_labels().empty() ? std::to_string(s[k] + 1)
                                            : panel.group_labels()[static_cast<std::size_t>(s[k])];
    }
    return out + "}";
}

PartitionScheme scheme_from(const PanelData& panel, const EstimateConfig& config) {
    const int jt = static_cast<int>(panel.n_groups());
    if (config.aj.empty()) throw ValidationError("aj: the normalization groups are required");
    const IndexSet aj = resolve(panel, config.aj);
    IndexSet a0 = resolve(panel, config.a0);
    IndexSet bj = resolve(panel, config.bj);
    if (a0.empty() && bj.empty()) throw ValidationError("a0/bj: give the target groups, the instrument groups, or both");
    if (bj.empty()) bj = complement(jt, a0, aj);
    if (a0.empty()) a0 = complement(jt, aj, bj);
    return make_partition(jt, config.r, a0, aj, bj);
}

}  // namespace

SlopeChoice parse_slope_choice(const std::string& name) {
    const std::string s = lower(name);
    if (s == "none") return SlopeChoice::None;
    if (s == "fe" || s == "two-way-fe" || s == "twoway") return SlopeChoice::TwoWayFe;
    if (s == "cce") return SlopeChoice::Cce;
    if (s == "iee") return SlopeChoice::Iee;
    if (s == "user") return SlopeChoice::User;
    throw ValidationError("slope: unknown stage '" + name + "' (expected none, fe, cce, iee or user)");
}

FactorChoice parse_factor_choice(const std::string& name) {
    const std::string s = lower(name);
    if (s == "pca") return FactorChoice::Pca;
    if (s == "gve") return FactorChoice::Gve;
    if (s == "wgve") return FactorChoice::Wgve;
    throw ValidationError("factor: unknown stage '" + name + "' (expected pca, gve or wgve)");
}

FirstStage parse_first_stage(const std::string& name) {
    const std::string s = lower(name);
    if (s == "lasso") return FirstStage::Lasso;
    if (s == "average" || s == "averages") return FirstStage::BlockAverage;
    if (s == "2sls" || s == "all") return FirstStage::AllGroups;
    throw ValidationError("wgve-first-stage: unknown value '" + name + "' (expected lasso, average or 2sls)");
}

Weighting parse_weighting(const std::string& name) {
    const std::string s = lower(name);
    if (s == "equal") return Weighting::Equal;
    if (s == "optimal") return Weighting::Optimal;
    throw ValidationError("weights: unknown value '" + name + "' (expected equal or optimal)");
}

EstimateOutput run_estimate(const PanelData& panel, const EstimateConfig& config) {
    const int jt = static_cast<int>(panel.n_groups());
    const Eigen::Index p = panel.n_regressors();
    if (config.r < 1) throw ValidationError("r: must be at least 1");
    EstimateOutput out;

    // Slope stage.
    bool joint_gve = false;
    ResidualPanel res;
    switch (config.slope) {
        case SlopeChoice::None:
            if (p > 0) {
                if (config.factor != FactorChoice::Gve) {
                    throw ValidationError("slope: regressors are present; pick a slope stage for " +
                                          std::string(config.factor == FactorChoice::Pca ? "PCA" : "WGVE"));
                }
                joint_gve = true;
            }
            res = residualize(panel, Vector::Zero(p));
            break;
        case SlopeChoice::TwoWayFe: {
            Vector beta = Vector::Zero(p);
            if (p > 0) beta = two_way_fe(panel).beta;
            res = ResidualPanel{two_way_demean(residualize(panel, beta).values), beta};
            out.notes.push_back("two-way demeaned residuals");
            break;
        }
        case SlopeChoice::Cce: {
            if (p == 0) throw ValidationError("slope: CCE needs regressors but the data has none");
            const SlopeFit fit = cce_mean_group(panel);
            if (fit.skipped_subjects > 0) {
                out.notes.push_back("CCE skipped " + std::to_string(fit.skipped_subjects) + " rank-deficient subjects");
            }
            res = residualize(panel, fit.beta);
            break;
        }
        case SlopeChoice::Iee: {
            if (p == 0) throw ValidationError("slope: IEE needs regressors but the data has none");
            const SlopeFit fit = iee(panel, config.r, config.iee_max_iter, config.iee_tol, true);
            if (!fit.converged) out.notes.push_back("IEE stopped at max-iter without converging");
            res = residualize(panel, fit.beta);
            break;
        }
        case SlopeChoice::User: {
            if (static_cast<Eigen::Index>(config.user_beta.size()) != p) {
                throw ValidationError("beta: expected " + std::to_string(p) + " values, got " +
                                      std::to_string(config.user_beta.size()));
            }
            res = residualize(panel, Eigen::Map<const Vector>(config.user_beta.data(), p));
            break;
        }
    }

    // Factor stage.
    FactorEstimate factors;
    std::optional<PartitionScheme> scheme;
    switch (config.factor) {
        case FactorChoice::Pca: {
            if (!config.aj.empty()) {
                const IndexSet aj = resolve(panel, config.aj);
                const IndexSet rest = complement(jt, aj, {});
                if (rest.empty()) throw ValidationError("aj: leaves no other groups");
                scheme = make_partition(jt, config.r, {rest.front()}, aj, IndexSet(rest.begin() + 1, rest.end()));
                factors = pca_factors(res, config.r, PcaNormalization::AjAverage, &*scheme);
                out.normalization = "PCA, theta_j = inverse of AJ block-average factors " + describe(panel, aj) + " times f_j";
            } else {
                factors = pca_factors(res, config.r, PcaNormalization::FirstGroup);
                IndexSet first;
                for (int k = 0; k < config.r; ++k) first.push_back(k);
                out.normalization = "PCA, theta_j = inverse of factors in groups " + describe(panel, first) + " times f_j";
            }
            out.result = make_result(factors, panel.group_labels());
            out.result.meta["estimator"] = "PCA";
            break;
        }
        case FactorChoice::Gve: {
            scheme = scheme_from(panel, config);
            const GveFit fit = joint_gve ? estimate_gve(build_stacked_system(panel, *scheme, config.instruments))
                                         : estimate_gve(build_stacked_system(res.as_panel(), *scheme, config.instruments));
            if (joint_gve) res = residualize(panel, fit.beta());
            if (fit.weak_instruments) out.notes.push_back("weak first stage: partial F below 1e-6");
            factors = factor_estimate(fit);
            out.result = make_result(fit, panel.group_labels());
            out.normalization = "GVE, theta_j = inverse of AJ block-average factors " + describe(panel, scheme->aj) +
                                " times f_j; instruments " + describe(panel, scheme->bj);
            break;
        }
        case FactorChoice::Wgve: {
            IndexSet a0 = resolve(panel, config.a0);
            if (a0.empty()) a0 = {0};
            const int m_aj = config.m_aj > 0 ? config.m_aj : config.r;
            std::optional<std::uint64_t> cap = config.cap;
            if (config.truncation_c) {
                const std::uint64_t q_star = truncation_q_star(jt, static_cast<int>(a0.size()), config.r, *config.truncation_c);
                cap = cap ? std::min(*cap, q_star) : q_star;
            }
            const NormalizationSet set = enumerate_partitions(jt, a0, m_aj, config.r, cap, config.order, config.seed);
            WgveOptions opts;
            opts.first_stage = config.first_stage;
            opts.weighting = config.weighting;
            const WgveFit fit = estimate_wgve(res, set, opts);
            if (fit.dropped > 0) out.notes.push_back("dropped " + std::to_string(fit.dropped) + " partitions with singular or weak first stages");
            if (fit.optimal_fallback) out.notes.push_back("optimal weights singular; fell back to equal weights");
            factors.theta = fit.vartheta;
            factors.groups = a0;
            std::sort(factors.groups.begin(), factors.groups.end());
            factors.normalization = "weighted";
            out.result = make_result(fit, panel.group_labels());
            out.normalization = "WGVE over " + std::to_string(fit.per_partition.size()) + " of " +
                                (set.q_total ? std::to_string(*set.q_total) : std::string("more than 2^64")) +
                                " AJ partitions, " + (config.weighting == Weighting::Optimal && !fit.optimal_fallback ? "optimal" : "equal") +
                                " weights";
            break;
        }
    }
    out.result.meta["slope"] = [&] {
        switch (config.slope) {
            case SlopeChoice::None: return joint_gve ? "joint with GVE" : "none";
            case SlopeChoice::TwoWayFe: return "two-way FE";
            case SlopeChoice::Cce: return "CCE";
            case SlopeChoice::Iee: return "IEE";
            case SlopeChoice::User: return "user";
        }
        return "?";
    }();
    out.result.meta["normalization"] = out.normalization;

    if (config.loadings) {
        const LoadingEstimate lam = estimate_loadings(res, factors, scheme ? &*scheme : nullptr);
        attach_loadings(out.result, lam, panel.subject_labels());
    }
    return out;
}

EstimateOutput run_estimate(const EstimateConfig& config) {
    if (config.data_path.empty()) throw ValidationError("data: no input file given");
    return run_estimate(load_long_csv(config.data_path, config.columns), config);
}

}  // namespace gve::app
