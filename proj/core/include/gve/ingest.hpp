#pragma once

// Long-format CSV input and sectioned results output.
//
// Input: one row per (subject, group) with a header naming the columns.
// Output sections, each introduced by a marker line and followed by a header:
//
//   #meta    key,value
//   #theta   group,theta_1..theta_r
//   #se      group,se_1..se_r
//   #lambda  subject,lambda_1..lambda_r
//
// #se and #lambda are omitted when empty. Numbers carry 17 significant digits.

#include "gve/factor_iv.hpp"
#include "gve/panel.hpp"
#include "gve/wgve.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gve {

struct LongCsvColumns {
    std::string subject = "subject";
    std::string group = "group";
    std::string y = "y";
    std::vector<std::string> x;
    /// Explicit group order; first-appearance order when empty.
    std::vector<std::string> group_order;
};

/// Pivots a long CSV into a balanced panel. Subjects keep first-appearance
/// order. Throws IoError, ParseError, DuplicateError, UnbalancedError and
/// ValidationError (unknown columns or groups).
PanelData load_long_csv(const std::string& path, const LongCsvColumns& columns);

/// Same, from CSV text already in memory.
PanelData parse_long_csv(const std::string& text, const LongCsvColumns& columns);

struct EstimateResult {
    std::map<std::string, std::string> meta;
    /// One label per column of theta.
    std::vector<std::string> groups;
    Matrix theta;  // r x m
    Matrix se;     // r x m or empty
    std::vector<std::string> subjects;
    Matrix lambda;  // N x r or empty
};

/// Labels default to 1-based group numbers when the panel has none.
EstimateResult make_result(const GveFit& fit, const std::vector<std::string>& group_labels = {});
EstimateResult make_result(const WgveFit& fit, const std::vector<std::string>& group_labels = {});
EstimateResult make_result(const FactorEstimate& est, const std::vector<std::string>& group_labels = {});

/// Attaches loadings and subject labels (1-based numbers when empty).
void attach_loadings(EstimateResult& result, const LoadingEstimate& loadings,
                     const std::vector<std::string>& subject_labels = {});

void write_results_csv(const EstimateResult& result, const std::string& path);
void write_results_csv(const GveFit& fit, const std::string& path);
void write_results_csv(const WgveFit& fit, const std::string& path);
std::string format_results_csv(const EstimateResult& result);

EstimateResult read_results_csv(const std::string& path);
EstimateResult parse_results_csv(const std::string& text);

/// A double printed with 17 significant digits.
std::string format_number(double v);

}  // namespace gve
