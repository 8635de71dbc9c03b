#pragma once

// End-to-end pipeline on a long CSV: slope stage, factor stage, loadings.

#include "gve/ingest.hpp"
#include "gve/wgve.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace gve::app {

enum class SlopeChoice { None, TwoWayFe, Cce, Iee, User };
enum class FactorChoice { Pca, Gve, Wgve };

SlopeChoice parse_slope_choice(const std::string& name);
FactorChoice parse_factor_choice(const std::string& name);
FirstStage parse_first_stage(const std::string& name);
Weighting parse_weighting(const std::string& name);

struct EstimateConfig {
    std::string data_path;
    LongCsvColumns columns;

    SlopeChoice slope = SlopeChoice::None;
    std::vector<double> user_beta;
    int iee_max_iter = 1000;
    double iee_tol = 1e-8;

    FactorChoice factor = FactorChoice::Gve;
    int r = 1;
    /// Group labels as they appear in the data.
    std::vector<std::string> a0;
    std::vector<std::string> aj;
    std::vector<std::string> bj;
    InstrumentKind instruments = InstrumentKind::Z1;

    // WGVE
    int m_aj = 0;  // defaults to r
    std::optional<std::uint64_t> cap;
    std::optional<std::uint64_t> truncation_c;
    PartitionOrder order = PartitionOrder::Lexicographic;
    std::uint64_t seed = 1;
    FirstStage first_stage = FirstStage::Lasso;
    Weighting weighting = Weighting::Equal;

    bool loadings = false;
};

struct EstimateOutput {
    EstimateResult result;
    std::string normalization;
    std::vector<std::string> notes;
};

/// Runs the configured chain on an already loaded panel.
EstimateOutput run_estimate(const PanelData& panel, const EstimateConfig& config);

/// Loads config.data_path and runs the chain.
EstimateOutput run_estimate(const EstimateConfig& config);

}  // namespace gve::app
