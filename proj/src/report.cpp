#include "paneldml/report.hpp"

#include "paneldml/error.hpp"

#include <fstream>
#include <iomanip>
#include <openssl/evp.h>
#include <sstream>

namespace paneldml {

const char* kToolVersion = "0.1.0";

namespace {

std::string pad(const std::string& s, std::size_t width) {
    if (s.size() >= width) return s + "  ";
    return s + std::string(width - s.size() + 2, ' ');
}

} // namespace

std::string render_lag_table(const Table1Report& report) {
    std::ostringstream out;
    out << pad("Lag", 21) << pad("ATE", 8) << "p-value\n";
    for (const auto& row : report.rows) {
        const std::string label = "MACRO_paros_lag_sem_" + std::to_string(row.lag);
        if (row.ok) {
            out << pad(label, 21) << pad(format_fixed4(row.effect.ame), 8)
                << format_fixed4(row.effect.p_value) << '\n';
        } else {
            out << pad(label, 21) << "failed: " << row.error << '\n';
        }
    }
    return out.str();
}

std::string render_dml_table(const DmlEstimate& estimate) {
    std::ostringstream out;
    out << pad("Parameter", 33) << pad("Estimate", 8) << pad("Std. Error", 10) << "p-value\n";
    out << pad("Strikes (Lag 2)", 33) << pad(format_fixed4(estimate.tau.estimate), 8)
        << pad(format_fixed4(estimate.tau.se), 10) << format_fixed4(estimate.tau.p_value) << '\n';
    out << pad("Interaction (Strikes x Inflation)", 33)
        << pad(format_fixed4(estimate.gamma.estimate), 8) << pad(format_fixed4(estimate.gamma.se), 10)
        << format_fixed4(estimate.gamma.p_value) << '\n';
    return out.str();
}

std::string render_placebo_table(const Table5Report& report) {
    std::ostringstream out;
    out << pad("Specification", 21) << pad("Coefficient", 11) << pad("Std. Error", 10)
        << pad("CI Lower", 8) << pad("CI Upper", 8) << "p-value\n";
    const auto& p = report.estimate.tau;
    out << pad("Placebo (Fake Strike)", 21) << pad(format_fixed4(p.estimate), 11)
        << pad(format_fixed4(p.se), 10) << pad(format_fixed4(p.ci_low), 8)
        << pad(format_fixed4(p.ci_high), 8) << format_fixed4(p.p_value) << '\n';
    return out.str();
}

nlohmann::json to_json(const AssemblyReport& report) {
    nlohmann::json cohorts = nlohmann::json::object();
    for (const auto& [year, n] : report.cohort_sizes) cohorts[std::to_string(year)] = n;
    nlohmann::json exclusions = nlohmann::json::object();
    for (const auto& [reason, n] : report.exclusions_by_reason) exclusions[reason] = n;
    return {{"input_rows", report.input_rows},
            {"retained_rows", report.retained_rows},
            {"exclusions_by_reason", exclusions},
            {"work_status_imputations", report.work_status_imputations},
            {"cohort_sizes", cohorts},
            {"warnings", report.warnings}};
}

nlohmann::json to_json(const MarginalEffect& effect) {
    return {{"variable", effect.variable}, {"ame", effect.ame},
            {"se", effect.se},             {"z", effect.z},
            {"p_value", effect.p_value},   {"ci_low", effect.ci_low},
            {"ci_high", effect.ci_high}};
}

nlohmann::json to_json(const Table1Report& report) {
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : report.rows) {
        nlohmann::json entry = {{"lag", row.lag}, {"ok", row.ok}, {"n_rows", row.n_rows}};
        if (row.ok)
            entry["effect"] = to_json(row.effect);
        else
            entry["error"] = row.error;
        rows.push_back(std::move(entry));
    }
    return {{"table", "lagged_logit_effects"}, {"rows", rows}};
}

nlohmann::json to_json(const ParamEstimate& param) {
    return {{"estimate", param.estimate}, {"se", param.se},
            {"z", param.z},               {"p_value", param.p_value},
            {"ci_low", param.ci_low},     {"ci_high", param.ci_high}};
}

nlohmann::json to_json(const DmlEstimate& estimate) {
    auto diag = [](const CrossfitDiagnostics& d) {
        return nlohmann::json{{"oof_mse", d.oof_mse}, {"warnings", d.warnings}};
    };
    return {{"tau", to_json(estimate.tau)},
            {"gamma", to_json(estimate.gamma)},
            {"alpha", to_json(estimate.alpha)},
            {"folds", estimate.folds},
            {"seed", estimate.seed},
            {"confidence", estimate.confidence},
            {"n_rows", estimate.n_rows},
            {"nuisance_diagnostics",
             {{"outcome", diag(estimate.outcome_diag)},
              {"treatment", diag(estimate.treatment_diag)},
              {"interaction", diag(estimate.interaction_diag)}}}};
}

nlohmann::json to_json(const Table5Report& report) {
    return {{"table", "placebo_test"},
            {"mode", to_string(report.mode)},
            {"n_rows", report.n_rows},
            {"placebo_main", to_json(report.estimate.tau)},
            {"placebo_interaction", to_json(report.estimate.gamma)},
            {"estimate", to_json(report.estimate)}};
}

nlohmann::json to_json(const SeedSweepResult& result) {
    auto summary = [](const ParameterSummary& s) {
        return nlohmann::json{{"mean", s.mean},
                              {"sd", s.sd},
                              {"min", s.min},
                              {"max", s.max},
                              {"sign_stability", s.sign_stability},
                              {"significant_fraction", s.significant_fraction}};
    };
    nlohmann::json records = nlohmann::json::array();
    for (const auto& rec : result.records) {
        nlohmann::json entry = {{"seed", rec.seed}, {"ok", rec.ok}};
        if (rec.ok) {
            entry["tau"] = to_json(rec.estimate.tau);
            entry["gamma"] = to_json(rec.estimate.gamma);
        } else {
            entry["error"] = rec.error;
        }
        records.push_back(std::move(entry));
    }
    return {{"records", records},
            {"summary", {{"tau", summary(result.tau)}, {"gamma", summary(result.gamma)}}},
            {"failures", result.failures}};
}

nlohmann::json to_json(const ScenarioResult& result) {
    nlohmann::json curves = nlohmann::json::object();
    for (const auto& [name, curve] : result.attrition) curves[name] = curve;
    nlohmann::json out = {{"horizon", result.horizon}, {"attrition", curves}};
    if (result.amplification)
        out["amplification"] = *result.amplification;
    else
        out["amplification"] = nullptr;
    return out;
}

nlohmann::json to_json(const GroundTruth& truth) {
    return {{"tau", truth.tau},
            {"gamma", truth.gamma},
            {"alpha", truth.alpha},
            {"preclip_violation_rate", truth.preclip_violation_rate},
            {"n_rows", truth.true_prob.size()}};
}

std::string sha256_hex(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("sha256: cannot open " + path.string());

    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx) throw NumericError("sha256: context allocation failed");
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);

    char buffer[1 << 16];
    while (in) {
        in.read(buffer, sizeof(buffer));
        const auto got = in.gcount();
        if (got > 0) EVP_DigestUpdate(ctx, buffer, static_cast<std::size_t>(got));
    }
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, digest, &len);
    EVP_MD_CTX_free(ctx);

    std::ostringstream hex;
    hex << std::hex << std::setfill('0');
    for (unsigned int i = 0; i < len; ++i) hex << std::setw(2) << static_cast<int>(digest[i]);
    return hex.str();
}

nlohmann::json to_json(const RunManifest& manifest) {
    nlohmann::json inputs = nlohmann::json::object();
    for (const auto& [path, digest] : manifest.inputs) inputs[path] = digest;
    return {{"command", manifest.command},
            {"tool_version", manifest.tool_version},
            {"seed", manifest.seed},
            {"inputs", inputs},
            {"config", manifest.config},
            {"outputs", manifest.outputs}};
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << content;
}

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
    write_text_file(path, doc.dump(2) + "\n");
}

} // namespace paneldml
