#include "genkit/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "genkit/errors.hpp"

namespace genkit::data {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

bool is_missing(double x) { return std::isnan(x); }

std::string row_label(Eigen::Index row) {
    // 1-based data row (header excluded), matching what a user sees in a file.
    return "data row " + std::to_string(row + 1);
}

} // namespace

Role role_from_string(const std::string& s) {
    if (s == "X" || s == "x") return Role::X;
    if (s == "Z" || s == "z") return Role::Z;
    if (s == "V" || s == "v") return Role::V;
    throw ConfigError("unknown covariate role '" + s + "' (expected X, Z or V)");
}

std::string role_to_string(Role role) {
    switch (role) {
        case Role::X: return "X";
        case Role::Z: return "Z";
        case Role::V: return "V";
    }
    return "?";
}

Eigen::Index StackedDataset::covariate_index(const std::string& name) const {
    for (std::size_t j = 0; j < covariate_names.size(); ++j) {
        if (covariate_names[j] == name) return static_cast<Eigen::Index>(j);
    }
    throw ValidationError("unknown covariate column '" + name + "'");
}

bool StackedDataset::has_covariate(const std::string& name) const {
    return std::find(covariate_names.begin(), covariate_names.end(), name) !=
           covariate_names.end();
}

std::vector<Eigen::Index> StackedDataset::rct_rows() const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n_rows(); ++i) {
        if (sample_indicator(i) == 1) rows.push_back(i);
    }
    return rows;
}

std::vector<Eigen::Index> StackedDataset::target_rows() const {
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < n_rows(); ++i) {
        if (sample_indicator(i) == 0) rows.push_back(i);
    }
    return rows;
}

void StackedDataset::validate(const RoleMap& roles) const {
    const Eigen::Index n = n_rows();
    if (treatment.size() != n || outcome.size() != n || covariates.rows() != n) {
        throw ValidationError("dataset: column lengths disagree");
    }
    if (static_cast<Eigen::Index>(covariate_names.size()) != covariates.cols()) {
        throw ValidationError("dataset: covariate names do not match matrix width");
    }
    std::set<std::string> seen;
    for (const auto& name : covariate_names) {
        if (!seen.insert(name).second) {
            throw ValidationError("dataset: duplicate covariate column '" + name + "'");
        }
    }
    for (const auto& [column, role] : roles) {
        (void)role;
        covariate_index(column);  // throws on unknown column
    }

    bool any_rct = false, any_target = false;
    for (Eigen::Index i = 0; i < n; ++i) {
        const int s = sample_indicator(i);
        if (s != 0 && s != 1) {
            throw ValidationError("dataset: sample indicator not binary at " + row_label(i));
        }
        if (s == 1) {
            any_rct = true;
            if (treatment(i) != 0 && treatment(i) != 1) {
                throw ValidationError("dataset: treatment not binary at RCT " + row_label(i));
            }
            if (is_missing(outcome(i))) {
                throw ValidationError("dataset: outcome missing at RCT " + row_label(i));
            }
        } else {
            any_target = true;
            if (treatment(i) != -1) {
                throw ValidationError("dataset: treatment present on target-sample " +
                                      row_label(i));
            }
            if (!is_missing(outcome(i))) {
                throw ValidationError("dataset: outcome present on target-sample " +
                                      row_label(i));
            }
        }
    }
    if (!any_rct) throw ValidationError("dataset: no RCT (S=1) rows");
    if (!any_target) throw ValidationError("dataset: no target-sample (S=0) rows");

    for (const auto& [column, role] : roles) {
        const Eigen::Index j = covariate_index(column);
        for (Eigen::Index i = 0; i < n; ++i) {
            const bool missing = is_missing(covariates(i, j));
            const bool target_row = sample_indicator(i) == 0;
            if (role == Role::V) {
                if (target_row && !missing) {
                    throw ValidationError(
                        "column '" + column + "' has role V but is observed on " +
                        row_label(i) + " (S=0); if it is measured in both samples, "
                        "assign role Z instead");
                }
                if (!target_row && missing) {
                    throw ValidationError("column '" + column +
                                          "' (role V) is missing on RCT " + row_label(i));
                }
            } else if (missing) {
                throw ValidationError("column '" + column + "' (role " +
                                      role_to_string(role) + ") is missing on " +
                                      row_label(i));
            }
        }
    }
}

LoadSpec LoadSpec::from_config(const KeyValueConfig& config) {
    LoadSpec spec;
    spec.s_column = config.at("s_column");
    spec.t_column = config.at("t_column");
    spec.y_column = config.at("y_column");
    for (const auto& [column, role] : config.group("roles")) {
        spec.roles[column] = role_from_string(role);
    }
    if (spec.roles.empty()) {
        throw ConfigError("config assigns no covariate roles (roles.<column> = X|Z|V)");
    }
    for (const auto& [column, value] : config.group("filter")) {
        try {
            spec.filters.emplace_back(column, std::stod(value));
        } catch (const std::exception&) {
            throw ConfigError("filter." + column + ": not a numeric value: '" + value + "'");
        }
    }
    for (const auto& [key, value] : config.entries()) {
        (void)value;
        if (key == "s_column" || key == "t_column" || key == "y_column") continue;
        if (key.rfind("roles.", 0) == 0 || key.rfind("filter.", 0) == 0) continue;
        throw ConfigError("unknown config key '" + key + "'");
    }
    return spec;
}

namespace {

double parse_cell(const std::string& text, const std::string& column,
                  Eigen::Index row) {
    if (text == kMissingToken || text.empty()) return kNaN;
    try {
        std::size_t consumed = 0;
        const double value = std::stod(text, &consumed);
        if (consumed != text.size()) throw std::invalid_argument(text);
        return value;
    } catch (const std::exception&) {
        throw ValidationError("column '" + column + "', " + row_label(row) +
                              ": cannot parse '" + text + "' as a number");
    }
}

int parse_binary(double value, const std::string& column, Eigen::Index row) {
    if (value == 0.0) return 0;
    if (value == 1.0) return 1;
    throw ValidationError("column '" + column + "', " + row_label(row) +
                          ": expected 0 or 1");
}

} // namespace

LoadedData load_csv_table(const CsvTable& table, const LoadSpec& spec,
                          const std::string& origin) {
    auto find_column = [&](const std::string& name) -> std::size_t {
        for (std::size_t j = 0; j < table.header.size(); ++j) {
            if (table.header[j] == name) return j;
        }
        throw ConfigError(origin + ": config names column '" + name +
                          "' absent from the CSV header");
    };

    const std::size_t s_col = find_column(spec.s_column);
    const std::size_t t_col = find_column(spec.t_column);
    const std::size_t y_col = find_column(spec.y_column);

    std::vector<std::pair<std::string, std::size_t>> covariate_cols;
    for (const auto& [column, role] : spec.roles) {
        (void)role;
        covariate_cols.emplace_back(column, find_column(column));
    }
    std::vector<std::pair<std::size_t, double>> filters;
    for (const auto& [column, value] : spec.filters) {
        filters.emplace_back(find_column(column), value);
    }

    std::vector<std::size_t> kept;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        bool keep = true;
        for (const auto& [col, value] : filters) {
            const double cell = parse_cell(table.rows[r][col], table.header[col],
                                           static_cast<Eigen::Index>(r));
            if (!(cell == value)) {
                keep = false;
                break;
            }
        }
        if (keep) kept.push_back(r);
    }
    if (kept.empty()) {
        throw ValidationError(origin + ": no rows remain after filtering");
    }

    const auto n = static_cast<Eigen::Index>(kept.size());
    StackedDataset data;
    data.covariate_names.reserve(covariate_cols.size());
    for (const auto& [column, col] : covariate_cols) {
        (void)col;
        data.covariate_names.push_back(column);
    }
    data.covariates.resize(n, static_cast<Eigen::Index>(covariate_cols.size()));
    data.sample_indicator.resize(n);
    data.treatment.resize(n);
    data.outcome.resize(n);

    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = table.rows[kept[static_cast<std::size_t>(i)]];
        const Eigen::Index src = static_cast<Eigen::Index>(kept[static_cast<std::size_t>(i)]);

        const double s_value = parse_cell(row[s_col], spec.s_column, src);
        if (is_missing(s_value)) {
            throw ValidationError("column '" + spec.s_column + "', " + row_label(src) +
                                  ": sample indicator may not be missing");
        }
        const int s = parse_binary(s_value, spec.s_column, src);
        data.sample_indicator(i) = s;

        const double t_value = parse_cell(row[t_col], spec.t_column, src);
        const double y_value = parse_cell(row[y_col], spec.y_column, src);
        if (s == 1) {
            if (is_missing(t_value)) {
                throw ValidationError("column '" + spec.t_column + "', " + row_label(src) +
                                      ": treatment missing on an RCT row");
            }
            if (is_missing(y_value)) {
                throw ValidationError("column '" + spec.y_column + "', " + row_label(src) +
                                      ": outcome missing on an RCT row");
            }
            data.treatment(i) = parse_binary(t_value, spec.t_column, src);
            data.outcome(i) = y_value;
        } else {
            if (!is_missing(t_value)) {
                throw ValidationError("column '" + spec.t_column + "', " + row_label(src) +
                                      ": treatment present on a target-sample row");
            }
            if (!is_missing(y_value)) {
                throw ValidationError("column '" + spec.y_column + "', " + row_label(src) +
                                      ": outcome present on a target-sample row");
            }
            data.treatment(i) = -1;
            data.outcome(i) = kNaN;
        }

        for (std::size_t c = 0; c < covariate_cols.size(); ++c) {
            data.covariates(i, static_cast<Eigen::Index>(c)) =
                parse_cell(row[covariate_cols[c].second], covariate_cols[c].first, src);
        }
    }

    data.validate(spec.roles);
    return LoadedData{std::move(data), spec.roles};
}

LoadedData load_csv(const std::filesystem::path& path, const LoadSpec& spec) {
    return load_csv_table(read_csv(path), spec, path.string());
}

namespace {

std::string format_number(double x) {
    if (std::isnan(x)) return kMissingToken;
    std::ostringstream out;
    out.precision(17);
    out << x;
    return out.str();
}

} // namespace

CsvTable dataset_to_csv(const StackedDataset& data, const LoadSpec& spec) {
    CsvTable table;
    table.header = {spec.s_column, spec.t_column, spec.y_column};
    table.header.insert(table.header.end(), data.covariate_names.begin(),
                        data.covariate_names.end());
    for (Eigen::Index i = 0; i < data.n_rows(); ++i) {
        std::vector<std::string> row;
        row.push_back(std::to_string(data.sample_indicator(i)));
        row.push_back(data.treatment(i) < 0 ? kMissingToken
                                            : std::to_string(data.treatment(i)));
        row.push_back(format_number(data.outcome(i)));
        for (Eigen::Index j = 0; j < data.n_covariates(); ++j) {
            row.push_back(format_number(data.covariates(i, j)));
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

namespace {

ColumnSummary summarize(const StackedDataset& data, Eigen::Index col,
                        const std::vector<Eigen::Index>& rows,
                        const Eigen::VectorXd* weights) {
    ColumnSummary s;
    s.n = static_cast<Eigen::Index>(rows.size());
    if (rows.empty()) return s;

    double wsum = 0.0, mean = 0.0;
    s.min = std::numeric_limits<double>::infinity();
    s.max = -std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double x = data.covariates(rows[k], col);
        const double w = weights ? (*weights)(static_cast<Eigen::Index>(k)) : 1.0;
        wsum += w;
        mean += w * x;
        s.min = std::min(s.min, x);
        s.max = std::max(s.max, x);
    }
    if (wsum <= 0.0) {
        throw EstimationError("degenerate weights: nonpositive weight total");
    }
    mean /= wsum;
    double ss = 0.0;
    for (std::size_t k = 0; k < rows.size(); ++k) {
        const double x = data.covariates(rows[k], col);
        const double w = weights ? (*weights)(static_cast<Eigen::Index>(k)) : 1.0;
        ss += w * (x - mean) * (x - mean);
    }
    s.mean = mean;
    s.sd = (wsum > 1.0) ? std::sqrt(ss / (wsum - 1.0)) : 0.0;
    return s;
}

} // namespace

SummaryTable sample_means(const StackedDataset& data, const RoleMap& roles,
                          const Eigen::VectorXd* rct_weights) {
    const auto rct = data.rct_rows();
    const auto target = data.target_rows();
    if (rct_weights != nullptr &&
        rct_weights->size() != static_cast<Eigen::Index>(rct.size())) {
        throw ValidationError("sample_means: weights length does not match RCT rows");
    }

    SummaryTable table;
    for (const auto& [column, role] : roles) {
        const Eigen::Index j = data.covariate_index(column);
        table.columns.push_back(column);
        table.rct.push_back(summarize(data, j, rct, nullptr));
        if (role == Role::V) {
            table.target.push_back(std::nullopt);
        } else {
            table.target.push_back(summarize(data, j, target, nullptr));
        }
        if (rct_weights != nullptr) {
            table.rct_weighted.push_back(summarize(data, j, rct, rct_weights));
        } else {
            table.rct_weighted.push_back(std::nullopt);
        }
    }
    return table;
}

namespace {

std::size_t summary_index(const SummaryTable& table, const std::string& column) {
    for (std::size_t i = 0; i < table.columns.size(); ++i) {
        if (table.columns[i] == column) return i;
    }
    throw ValidationError("summary table: no column '" + column + "'");
}

} // namespace

const ColumnSummary& SummaryTable::rct_summary(const std::string& column) const {
    return rct[summary_index(*this, column)];
}

const ColumnSummary& SummaryTable::target_summary(const std::string& column) const {
    const auto& opt = target[summary_index(*this, column)];
    if (!opt) {
        throw ValidationError("column '" + column + "' has no target-sample summary");
    }
    return *opt;
}

const ColumnSummary& SummaryTable::rct_weighted_summary(const std::string& column) const {
    const auto& opt = rct_weighted[summary_index(*this, column)];
    if (!opt) {
        throw ValidationError("column '" + column + "' has no weighted summary");
    }
    return *opt;
}

} // namespace genkit::data
