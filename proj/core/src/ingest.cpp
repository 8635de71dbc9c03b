#include "gve/ingest.hpp"

#include "gve/errors.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace gve {

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream buf;
    buf << in.rdbuf();
    if (in.bad()) throw IoError("read failed for " + path);
    return buf.str();
}

// Splits CSV text into records of fields. Supports quoted fields with ""
// escapes, CRLF line ends and a leading UTF-8 byte order mark. Records carry
// the 1-based line number where they start.
struct Record {
    std::size_t line;
    std::vector<std::string> fields;
};

std::vector<Record> split_csv(const std::string& text) {
    std::vector<Record> out;
    std::size_t pos = 0;
    if (text.compare(0, 3, "\xEF\xBB\xBF") == 0) pos = 3;
    std::size_t line = 1;
    while (pos < text.size()) {
        Record rec{line, {}};
        std::string field;
        bool quoted = false;
        bool field_started = false;
        for (;;) {
            if (pos >= text.size()) {
                if (quoted) throw ParseError("unterminated quoted field", rec.line);
                rec.fields.push_back(std::move(field));
                break;
            }
            const char ch = text[pos++];
            if (quoted) {
                if (ch == '"') {
                    if (pos < text.size() && text[pos] == '"') {
                        field += '"';
                        ++pos;
                    } else {
                        quoted = false;
                    }
                } else {
                    if (ch == '\n') ++line;
                    field += ch;
                }
                continue;
            }
            if (ch == '"' && !field_started) {
                quoted = true;
                field_started = true;
            } else if (ch == ',') {
                rec.fields.push_back(std::move(field));
                field.clear();
                field_started = false;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && pos < text.size() && text[pos] == '\n') ++pos;
                ++line;
                rec.fields.push_back(std::move(field));
                break;
            } else {
                field += ch;
                field_started = true;
            }
        }
        const bool blank = rec.fields.size() == 1 && rec.fields[0].empty();
        if (!blank) out.push_back(std::move(rec));
    }
    return out;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

double parse_number(const std::string& raw, std::size_t line, const std::string& column) {
    const std::string s = trim(raw);
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    if (!s.empty() && *first == '+') ++first;
    const auto [ptr, ec] = std::from_chars(first, last, v);
    if (s.empty() || ec != std::errc() || ptr != last) {
        throw ParseError("column '" + column + "': cannot parse '" + raw + "' as a number", line);
    }
    if (!std::isfinite(v)) throw ParseError("column '" + column + "': non-finite value", line);
    return v;
}

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ValidationError("column '" + name + "' not found in header");
    return static_cast<std::size_t>(it - header.begin());
}

std::vector<std::string> default_labels(Eigen::Index n) {
    std::vector<std::string> out;
    for (Eigen::Index k = 0; k < n; ++k) out.push_back(std::to_string(k + 1));
    return out;
}

std::vector<std::string> pick_labels(const std::vector<std::string>& all, const IndexSet& groups) {
    std::vector<std::string> out;
    for (int g : groups) {
        out.push_back(all.empty() ? std::to_string(g + 1) : all.at(static_cast<std::size_t>(g)));
    }
    return out;
}

std::string join_scheme(const IndexSet& s) {
    std::string out;
    for (std::size_t k = 0; k < s.size(); ++k) {
        if (k) out += ' ';
        out += std::to_string(s[k] + 1);
    }
    return out;
}

void write_block(std::ostringstream& os, const char* marker, const char* key, const char* prefix,
                 const std::vector<std::string>& labels, const Matrix& values_by_row) {
    os << marker << '\n' << key;
    for (Eigen::Index c = 0; c < values_by_row.cols(); ++c) os << ',' << prefix << (c + 1);
    os << '\n';
    for (Eigen::Index i = 0; i < values_by_row.rows(); ++i) {
        os << labels.at(static_cast<std::size_t>(i));
        for (Eigen::Index c = 0; c < values_by_row.cols(); ++c) os << ',' << format_number(values_by_row(i, c));
        os << '\n';
    }
}

std::string quote_if_needed(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"') out += '"';
        out += ch;
    }
    return out + "\"";
}

}  // namespace

std::string format_number(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
    return std::string(buf, res.ptr);
}

PanelData parse_long_csv(const std::string& text, const LongCsvColumns& columns) {
    const std::vector<Record> records = split_csv(text);
    if (records.empty()) throw ParseError("missing header row", 1);
    std::vector<std::string> header;
    for (const auto& f : records.front().fields) header.push_back(trim(f));

    const std::size_t c_subj = column_index(header, columns.subject);
    const std::size_t c_group = column_index(header, columns.group);
    const std::size_t c_y = column_index(header, columns.y);
    std::vector<std::size_t> c_x;
    for (const auto& name : columns.x) c_x.push_back(column_index(header, name));

    std::vector<std::string> subjects;
    std::vector<std::string> groups = columns.group_order;
    std::unordered_map<std::string, std::size_t> subject_pos;
    std::unordered_map<std::string, std::size_t> group_pos;
    for (std::size_t g = 0; g < groups.size(); ++g) {
        if (!group_pos.emplace(groups[g], g).second) throw ValidationError("group order lists '" + groups[g] + "' twice");
    }
    const bool fixed_groups = !groups.empty();

    struct Cell {
        std::size_t subject;
        std::size_t group;
        std::size_t line;
        double y;
        std::vector<double> x;
    };
    std::vector<Cell> cells;
    cells.reserve(records.size());
    for (std::size_t r = 1; r < records.size(); ++r) {
        const Record& rec = records[r];
        if (rec.fields.size() != header.size()) {
            throw ParseError("expected " + std::to_string(header.size()) + " fields, found " +
                                 std::to_string(rec.fields.size()),
                             rec.line);
        }
        const std::string subj = trim(rec.fields[c_subj]);
        const std::string grp = trim(rec.fields[c_group]);
        if (subj.empty()) throw ParseError("empty subject id", rec.line);
        if (grp.empty()) throw ParseError("empty group id", rec.line);
        auto [sit, s_new] = subject_pos.emplace(subj, subjects.size());
        if (s_new) subjects.push_back(subj);
        auto git = group_pos.find(grp);
        if (git == group_pos.end()) {
            if (fixed_groups) throw ValidationError("group '" + grp + "' is not in the supplied group order");
            git = group_pos.emplace(grp, groups.size()).first;
            groups.push_back(grp);
        }
        Cell cell{sit->second, git->second, rec.line, parse_number(rec.fields[c_y], rec.line, columns.y), {}};
        for (std::size_t k = 0; k < c_x.size(); ++k) {
            cell.x.push_back(parse_number(rec.fields[c_x[k]], rec.line, columns.x[k]));
        }
        cells.push_back(std::move(cell));
    }

    const Eigen::Index n = static_cast<Eigen::Index>(subjects.size());
    const Eigen::Index jt = static_cast<Eigen::Index>(groups.size());
    Matrix y(n, jt);
    std::vector<Matrix> x(columns.x.size(), Matrix(n, jt));
    std::vector<std::size_t> seen(static_cast<std::size_t>(n * jt), 0);
    for (const Cell& cell : cells) {
        const std::size_t idx = cell.subject * static_cast<std::size_t>(jt) + cell.group;
        if (seen[idx] != 0) {
            throw DuplicateError("duplicate (subject, group) pair ('" + subjects[cell.subject] + "', '" +
                                 groups[cell.group] + "') on lines " + std::to_string(seen[idx]) + " and " +
                                 std::to_string(cell.line));
        }
        seen[idx] = cell.line;
        const auto i = static_cast<Eigen::Index>(cell.subject);
        const auto j = static_cast<Eigen::Index>(cell.group);
        y(i, j) = cell.y;
        for (std::size_t k = 0; k < x.size(); ++k) x[k](i, j) = cell.x[k];
    }
    std::vector<std::pair<std::string, std::string>> missing;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 0; j < jt; ++j) {
            if (seen[static_cast<std::size_t>(i * jt + j)] == 0) {
                missing.emplace_back(subjects[static_cast<std::size_t>(i)], groups[static_cast<std::size_t>(j)]);
            }
        }
    }
    if (!missing.empty()) {
        std::string what = "panel is unbalanced; " + std::to_string(missing.size()) + " missing (subject, group) pairs:";
        for (std::size_t k = 0; k < std::min<std::size_t>(missing.size(), 10); ++k) {
            what += " (" + missing[k].first + ", " + missing[k].second + ")";
        }
        if (missing.size() > 10) what += " ...";
        throw UnbalancedError(what, std::move(missing));
    }
    return PanelData(std::move(y), std::move(x), std::move(groups), std::move(subjects));
}

PanelData load_long_csv(const std::string& path, const LongCsvColumns& columns) {
    return parse_long_csv(read_file(path), columns);
}

EstimateResult make_result(const GveFit& fit, const std::vector<std::string>& group_labels) {
    EstimateResult out;
    out.meta["estimator"] = "GVE";
    out.meta["instruments"] = fit.instrument_kind == InstrumentKind::Z1 ? "block averages" : "all instrument groups";
    out.meta["normalization"] = "inverse of AJ block-average factors";
    out.meta["r"] = std::to_string(fit.scheme.r);
    out.meta["aj"] = join_scheme(fit.scheme.aj);
    out.meta["bj"] = join_scheme(fit.scheme.bj);
    out.groups = pick_labels(group_labels, fit.scheme.a0);
    out.theta = fit.theta;
    out.se = fit.theta_se();
    return out;
}

EstimateResult make_result(const WgveFit& fit, const std::vector<std::string>& group_labels) {
    EstimateResult out;
    out.meta["estimator"] = "WGVE";
    out.meta["normalization"] = "weighted over AJ partitions";
    out.meta["partitions"] = std::to_string(fit.per_partition.size());
    out.meta["dropped"] = std::to_string(fit.dropped);
    if (fit.optimal_fallback) out.meta["weights"] = "equal (optimal weights singular)";
    const PartitionScheme& first = fit.per_partition.front().scheme;
    out.meta["r"] = std::to_string(first.r);
    out.groups = pick_labels(group_labels, first.a0);
    out.theta = fit.vartheta;
    out.se = fit.vartheta_se();
    return out;
}

EstimateResult make_result(const FactorEstimate& est, const std::vector<std::string>& group_labels) {
    EstimateResult out;
    out.meta["normalization"] = est.normalization;
    out.meta["r"] = std::to_string(est.theta.rows());
    out.groups = pick_labels(group_labels, est.groups);
    out.theta = est.theta;
    return out;
}

void attach_loadings(EstimateResult& result, const LoadingEstimate& loadings,
                     const std::vector<std::string>& subject_labels) {
    result.lambda = loadings.lambda;
    result.subjects = subject_labels.empty() ? default_labels(loadings.lambda.rows()) : subject_labels;
    if (static_cast<Eigen::Index>(result.subjects.size()) != loadings.lambda.rows()) {
        throw ValidationError("subject label count does not match the loading rows");
    }
}

std::string format_results_csv(const EstimateResult& result) {
    if (static_cast<Eigen::Index>(result.groups.size()) != result.theta.cols()) {
        throw ValidationError("group label count does not match theta");
    }
    std::vector<std::string> groups;
    for (const auto& g : result.groups) groups.push_back(quote_if_needed(g));
    std::ostringstream os;
    os << "#meta\nkey,value\n";
    for (const auto& [k, v] : result.meta) os << quote_if_needed(k) << ',' << quote_if_needed(v) << '\n';
    write_block(os, "#theta", "group", "theta_", groups, result.theta.transpose());
    if (result.se.size() != 0) {
        if (result.se.rows() != result.theta.rows() || result.se.cols() != result.theta.cols()) {
            throw ValidationError("standard errors do not match theta");
        }
        write_block(os, "#se", "group", "se_", groups, result.se.transpose());
    }
    if (result.lambda.size() != 0) {
        std::vector<std::string> subjects;
        for (const auto& s : result.subjects) subjects.push_back(quote_if_needed(s));
        write_block(os, "#lambda", "subject", "lambda_", subjects, result.lambda);
    }
    return os.str();
}

void write_results_csv(const EstimateResult& result, const std::string& path) {
    const std::string text = format_results_csv(result);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    out.flush();
    if (!out) throw IoError("write failed for " + path);
}

void write_results_csv(const GveFit& fit, const std::string& path) { write_results_csv(make_result(fit), path); }

void write_results_csv(const WgveFit& fit, const std::string& path) { write_results_csv(make_result(fit), path); }

EstimateResult parse_results_csv(const std::string& text) {
    const std::vector<Record> records = split_csv(text);
    EstimateResult out;
    enum class Section { None, Meta, Theta, Se, Lambda } section = Section::None;
    bool expect_header = false;
    std::vector<std::vector<double>> theta_rows;
    std::vector<std::vector<double>> se_rows;
    std::vector<std::vector<double>> lambda_rows;
    std::vector<std::string> se_groups;

    for (const Record& rec : records) {
        const std::string first = trim(rec.fields.front());
        if (!first.empty() && first.front() == '#') {
            if (first == "#meta") section = Section::Meta;
            else if (first == "#theta") section = Section::Theta;
            else if (first == "#se") section = Section::Se;
            else if (first == "#lambda") section = Section::Lambda;
            else throw ParseError("unknown section marker '" + first + "'", rec.line);
            expect_header = true;
            continue;
        }
        if (section == Section::None) throw ParseError("data before the first section marker", rec.line);
        if (expect_header) {
            expect_header = false;
            continue;
        }
        if (section == Section::Meta) {
            if (rec.fields.size() != 2) throw ParseError("meta rows need two fields", rec.line);
            out.meta[rec.fields[0]] = rec.fields[1];
            continue;
        }
        std::vector<double> values;
        for (std::size_t k = 1; k < rec.fields.size(); ++k) values.push_back(parse_number(rec.fields[k], rec.line, "value"));
        switch (section) {
            case Section::Theta:
                out.groups.push_back(rec.fields[0]);
                theta_rows.push_back(std::move(values));
                break;
            case Section::Se:
                se_groups.push_back(rec.fields[0]);
                se_rows.push_back(std::move(values));
                break;
            case Section::Lambda:
                out.subjects.push_back(rec.fields[0]);
                lambda_rows.push_back(std::move(values));
                break;
            default:
                break;
        }
    }

    auto to_matrix = [](const std::vector<std::vector<double>>& rows, const char* name) {
        if (rows.empty()) return Matrix();
        Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].size() != rows.front().size()) throw ParseError(std::string("ragged ") + name + " section", 0);
            for (std::size_t c = 0; c < rows[i].size(); ++c) {
                m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = rows[i][c];
            }
        }
        return m;
    };
    if (theta_rows.empty()) throw ParseError("results file has no #theta section", records.empty() ? 1 : records.back().line);
    out.theta = to_matrix(theta_rows, "#theta").transpose();
    if (!se_rows.empty()) {
        if (se_groups != out.groups) throw ParseError("#se groups differ from #theta groups", 0);
        out.se = to_matrix(se_rows, "#se").transpose();
    }
    out.lambda = to_matrix(lambda_rows, "#lambda");
    return out;
}

EstimateResult read_results_csv(const std::string& path) { return parse_results_csv(read_file(path)); }

}  // namespace gve
