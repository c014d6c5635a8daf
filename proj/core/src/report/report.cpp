#include "genkit/report/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>

#include <json.hpp>

#include "genkit/errors.hpp"
#include "genkit/version.hpp"

namespace genkit::report {

namespace {

using nlohmann::ordered_json;

std::string format_double(double x) {
    if (std::isnan(x)) return "nan";
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.12g", x);
    return buffer;
}

ordered_json estimate_to_json(const estimators::EffectEstimate& estimate) {
    ordered_json j;
    j["estimand"] = estimators::estimand_to_string(estimate.estimand);
    j["method"] = estimators::method_to_string(estimate.method);
    j["point"] = estimate.point;
    j["std_error"] = estimate.std_error;
    j["ci_level"] = estimate.ci_level;
    j["ci"] = {estimate.ci_lower, estimate.ci_upper};
    j["warnings"] = estimate.warnings;
    return j;
}

ordered_json balance_to_json(const estimators::BalanceReport& balance) {
    ordered_json entries = ordered_json::array();
    for (const auto& entry : balance.entries) {
        ordered_json e;
        e["column"] = entry.column;
        if (entry.smd_defined) {
            e["smd_before"] = entry.smd_before;
            e["smd_after"] = entry.smd_after;
        } else {
            e["smd_before"] = nullptr;
            e["smd_after"] = nullptr;
        }
        e["overlap_flag"] = entry.overlap_flag;
        if (entry.overlap_flag) e["overlap_detail"] = entry.overlap_detail;
        entries.push_back(std::move(e));
    }
    ordered_json j;
    j["columns"] = std::move(entries);
    j["warnings"] = balance.warnings;
    return j;
}

std::string dump(const ordered_json& j) {
    return j.dump(2) + "\n";
}

} // namespace

std::string effect_report_json(const estimators::EffectEstimate& estimate,
                               const estimators::BalanceReport* balance) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = kVersion;
    j["estimate"] = estimate_to_json(estimate);
    if (balance != nullptr) {
        j["balance"] = balance_to_json(*balance);
    }
    return dump(j);
}

std::string balance_report_json(const estimators::BalanceReport& balance) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = kVersion;
    j["balance"] = balance_to_json(balance);
    return dump(j);
}

std::string sensitivity_report_json(const sensitivity::SensitivityResult& result) {
    ordered_json j;
    j["schema_version"] = kSchemaVersion;
    j["tool_version"] = kVersion;
    j["method"] = result.method;
    j["param_names"] = result.param_names;
    j["ci_level"] = result.ci_level;
    j["n_grid_points"] = result.grid.size();
    j["warnings"] = result.warnings;
    return dump(j);
}

std::string sensitivity_grid_csv(const sensitivity::SensitivityResult& result) {
    const bool two_params = result.param_names.size() == 2;
    std::string out = result.param_names.front();
    if (two_params) out += "," + result.param_names[1];
    out += ",tate,ci_lower,ci_upper\n";
    for (const auto& point : result.grid) {
        out += format_double(point.param1);
        if (two_params) out += "," + format_double(point.param2);
        out += "," + format_double(point.tate);
        out += "," + format_double(point.ci_lower);
        out += "," + format_double(point.ci_upper);
        out += "\n";
    }
    return out;
}

std::string bias_curve_csv(const sim::BiasCurve& curve) {
    std::string out = "correlation,method,model_spec,mean_bias,mc_se,n_ok,n_failed\n";
    for (const auto& row : curve) {
        out += format_double(row.correlation);
        out += "," + sim::sens_method_to_string(row.spec.method);
        out += "," + sim::analysis_spec_to_string(row.spec.analysis);
        out += "," + format_double(row.mean_bias);
        out += "," + format_double(row.mc_se);
        out += "," + std::to_string(row.n_ok);
        out += "," + std::to_string(row.n_failed);
        out += "\n";
    }
    return out;
}

std::string weights_csv(const data::StackedDataset& data,
                        const estimators::WeightVector& weights) {
    const auto rct = data.rct_rows();
    if (weights.weights.size() != static_cast<Eigen::Index>(rct.size())) {
        throw ValidationError("weights_csv: weight length does not match RCT rows");
    }
    std::string out = "row,weight\n";
    for (std::size_t k = 0; k < rct.size(); ++k) {
        out += std::to_string(rct[k] + 1);  // 1-based dataset row
        out += "," + format_double(weights.weights(static_cast<Eigen::Index>(k)));
        out += "\n";
    }
    return out;
}

std::string content_digest(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buffer[17];
    std::snprintf(buffer, sizeof(buffer), "%016llx",
                  static_cast<unsigned long long>(hash));
    return buffer;
}

std::string file_digest(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ValidationError("cannot open for digest: " + path.string());
    }
    std::string bytes((std::istreambuf_iterator<char>(in)),
                      std::istreambuf_iterator<char>());
    return content_digest(bytes);
}

void write_file_atomic(const std::filesystem::path& path,
                       const std::string& contents) {
    const auto parent =
        path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
    std::random_device rd;
    const auto tmp =
        parent / (path.filename().string() + ".tmp" + std::to_string(rd()));
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) {
            throw ValidationError("cannot write to " + tmp.string());
        }
        out << contents;
        out.flush();
        if (!out) {
            std::filesystem::remove(tmp);
            throw ValidationError("write failed for " + tmp.string());
        }
    }
    std::filesystem::rename(tmp, path);
}

} // namespace genkit::report
