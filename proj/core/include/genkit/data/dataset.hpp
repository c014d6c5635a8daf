#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "genkit/data/config.hpp"
#include "genkit/data/csv.hpp"

namespace genkit::data {

// Covariate roles: X predicts the outcome without moderating treatment,
// Z moderates and is observed in both samples, V moderates but is observed
// in the RCT rows only.
enum class Role { X, Z, V };

Role role_from_string(const std::string& s);
std::string role_to_string(Role role);

using RoleMap = std::map<std::string, Role>;

// Rows from the RCT (S=1, with treatment and outcome) stacked with rows
// from the target-population sample (S=0, covariates only). Immutable
// after validation; V-role covariates are NaN exactly on the S=0 rows.
struct StackedDataset {
    std::vector<std::string> covariate_names;
    Eigen::MatrixXd covariates;      // n x k, column order = covariate_names
    Eigen::VectorXi sample_indicator;  // S: 1 = RCT, 0 = target sample
    Eigen::VectorXi treatment;         // 0/1 on RCT rows, -1 elsewhere
    Eigen::VectorXd outcome;           // real on RCT rows, NaN elsewhere

    Eigen::Index n_rows() const { return sample_indicator.size(); }
    Eigen::Index n_covariates() const { return covariates.cols(); }

    Eigen::Index covariate_index(const std::string& name) const;  // throws if absent
    bool has_covariate(const std::string& name) const;

    std::vector<Eigen::Index> rct_rows() const;
    std::vector<Eigen::Index> target_rows() const;

    // Role-consistent missingness, S/T/Y contracts, nonempty samples.
    void validate(const RoleMap& roles) const;
};

// Column selection and roles for loading, read from a flat config with keys
// s_column, t_column, y_column, roles.<col> = X|Z|V, and optional
// filter.<col> = <numeric value> row filters (kept rows match all filters).
struct LoadSpec {
    std::string s_column;
    std::string t_column;
    std::string y_column;
    RoleMap roles;
    std::vector<std::pair<std::string, double>> filters;

    static LoadSpec from_config(const KeyValueConfig& config);
};

struct LoadedData {
    StackedDataset dataset;
    RoleMap roles;
};

// Missing values must be written as the literal token NA.
inline constexpr const char* kMissingToken = "NA";

LoadedData load_csv(const std::filesystem::path& path, const LoadSpec& spec);
LoadedData load_csv_table(const CsvTable& table, const LoadSpec& spec,
                          const std::string& origin = "<table>");

// Inverse of load: S/T/Y plus covariates, with NA for missing fields.
CsvTable dataset_to_csv(const StackedDataset& data, const LoadSpec& spec);

struct ColumnSummary {
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    Eigen::Index n = 0;
};

// Per-covariate summaries by sample; `rct_weighted` present when weights
// were supplied. V-role columns carry no target-sample summary.
struct SummaryTable {
    std::vector<std::string> columns;
    std::vector<ColumnSummary> rct;
    std::vector<std::optional<ColumnSummary>> target;
    std::vector<std::optional<ColumnSummary>> rct_weighted;

    const ColumnSummary& rct_summary(const std::string& column) const;
    const ColumnSummary& target_summary(const std::string& column) const;
    const ColumnSummary& rct_weighted_summary(const std::string& column) const;
};

// Weighted statistics use Hajek normalization for the mean and the
// frequency-weight variance sum(w (x - m)^2) / (sum(w) - 1), matching OLS
// on a row-duplicated dataset for integer weights. Weights align with
// rct_rows() order and apply to the RCT rows only.
SummaryTable sample_means(const StackedDataset& data, const RoleMap& roles,
                          const Eigen::VectorXd* rct_weights = nullptr);

} // namespace genkit::data
