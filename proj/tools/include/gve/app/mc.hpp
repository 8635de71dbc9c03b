#pragma once

// Monte Carlo driver for the one-factor and factor-augmented designs.

#include "gve/dgp.hpp"
#include "gve/slope.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace gve::app {

enum class Estimator { Pca, Iv, Las, Gve, Wgve };
enum class SlopeStage { None, Cce, Iee };

const std::vector<Estimator>& all_estimators();
std::string to_string(Estimator e);
std::string to_string(SlopeStage s);
std::string to_string(ErrorLaw e);
std::string to_string(LoadingDesign d);

/// Parsers throw ValidationError naming `field` on unknown input.
Estimator parse_estimator(const std::string& name, const std::string& field = "estimators");
SlopeStage parse_slope_stage(const std::string& name, const std::string& field = "first-stage");
ErrorLaw parse_error_law(const std::string& name, const std::string& field = "errors");
LoadingDesign parse_loading_design(const std::string& name, const std::string& field = "loadings");

struct McCell {
    int n = 50;
    int j = 10;
    ErrorLaw error_law = ErrorLaw::Gaussian;
    LoadingDesign loading = LoadingDesign::Uniform;
    SlopeStage slope = SlopeStage::None;
};

struct McConfig {
    DgpKind kind = DgpKind::OneFactor;
    std::vector<McCell> grid;
    int replications = 500;
    std::uint64_t seed = 20240101;
    std::vector<Estimator> estimators = all_estimators();
    int threads = 1;
    int iee_max_iter = 500;
    double iee_tol = 1e-6;

    /// Throws ValidationError.
    void validate() const;
};

/// Builds the cross product of the listed values into config.grid.
std::vector<McCell> make_grid(const std::vector<int>& ns, const std::vector<int>& js,
                              const std::vector<ErrorLaw>& errors, const std::vector<LoadingDesign>& loadings,
                              const std::vector<SlopeStage>& slopes);

/// Per-estimator RMSE of one replication; NaN marks a failed estimator.
using ReplicationScores = std::map<Estimator, double>;

/// Runs one replication of `cell` with replication index `rep`.
ReplicationScores run_replication(const McConfig& config, const McCell& cell, std::uint64_t rep);

struct EstimatorSummary {
    double rmse = 0.0;
    double mc_se = 0.0;
    int failures = 0;
    /// Per-replication RMSE in replication order (NaN on failure).
    std::vector<double> per_replication;
};

struct CellReport {
    McCell cell;
    std::map<Estimator, EstimatorSummary> estimators;
    /// Set when any estimator failed in more than 1% of replications.
    bool flagged = false;
};

struct McReport {
    std::string design;
    int replications = 0;
    std::uint64_t seed = 0;
    std::vector<CellReport> cells;
    double wall_seconds = 0.0;
};

McReport run_mc(const McConfig& config);

/// CSV table. The first line is a timestamp comment unless `timestamp` is false.
std::string format_mc_csv(const McReport& report, bool timestamp = true);

/// Paired one-sided test of mean(a - b) > 0; returns mean / standard error
/// over replications where both are finite.
double paired_t(const std::vector<double>& a, const std::vector<double>& b);

}  // namespace gve::app
