#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "genkit/data/dataset.hpp"
#include "genkit/estimators/estimators.hpp"
#include "genkit/sensitivity/sensitivity.hpp"
#include "genkit/sim/simulation.hpp"

namespace genkit::report {

inline constexpr int kSchemaVersion = 1;

// Serialized JSON report (2-space indented, keys in fixed order, newline
// terminated) so identical inputs produce byte-identical files.
std::string effect_report_json(const estimators::EffectEstimate& estimate,
                               const estimators::BalanceReport* balance);

std::string balance_report_json(const estimators::BalanceReport& balance);

std::string sensitivity_report_json(const sensitivity::SensitivityResult& result);

// Grid CSV: param1[,param2],tate,ci_lower,ci_upper.
std::string sensitivity_grid_csv(const sensitivity::SensitivityResult& result);

// correlation,method,model_spec,mean_bias,mc_se,n_ok,n_failed
std::string bias_curve_csv(const sim::BiasCurve& curve);

// index,weight rows aligned with the dataset's RCT rows (1-based dataset row).
std::string weights_csv(const data::StackedDataset& data,
                        const estimators::WeightVector& weights);

// FNV-1a 64-bit content digest, hex encoded.
std::string content_digest(const std::string& bytes);
std::string file_digest(const std::filesystem::path& path);

// Writes to a temporary file in the same directory and renames into place,
// so failed runs never leave partial outputs.
void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents);

} // namespace genkit::report
