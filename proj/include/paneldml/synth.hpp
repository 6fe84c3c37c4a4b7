#pragma once

#include "paneldml/panel.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace paneldml {

/// Structural generator config. The dropout hazard at semester t is
///   link(alpha0 + tau*T + gamma*T*X + g(W))
/// with T the strike intensity two semesters earlier (exactly lag 2), X the
/// compounded inflation at entry, and g(W) the control surface:
///   g(W) = -gpa_coef*(gpa-6) + repeat_coef*(rr^2 or rr) + sin_coef*sin(t)
///          + inflation_main*X + work_coef*work.
struct DgpConfig {
    std::vector<std::pair<int, int>> cohorts;   // {entry year, students}
    std::map<int, double> inflation_by_cohort;  // X as a proportion
    StrikeCalendar calendar;

    double tau = 0.0;
    double gamma = 0.0;

    /// Strength of the cohort-level confounder: cohorts facing heavier strike
    /// exposure are drawn with lower mean ability, which also raises dropout.
    double confounding = 0.0;
    double confounding_gpa_shift = 1.3; // GPA shift per unit standardized burden

    bool nonlinear_g = true;

    enum class Link { linear, logistic } link = Link::linear;

    double alpha0 = 0.30;
    double gpa_coef = 0.04;
    double repeat_coef = 0.10;
    double sin_coef = 0.02;
    double inflation_main = 0.02;
    double work_coef = 0.04;

    int max_semesters = 8;
    double p_entry_second_half = 0.5;
    /// Share of non-enrollment events that are one-semester stop-outs (the
    /// student returns one calendar semester later) rather than exits. The
    /// outcome is "not enrolled next semester" either way.
    double stopout_return_prob = 0.0;
    double work_missing_rate = 0.08;
    double work_base_rate = 0.25;
    double work_inflation_slope = 0.15; // employment rises with inflation
    double clip_lo = 0.01, clip_hi = 0.99;

    std::uint64_t seed = 1;

    std::size_t n_students() const {
        std::size_t n = 0;
        for (const auto& [year, size] : cohorts) n += static_cast<std::size_t>(size);
        return n;
    }
};

struct GroundTruth {
    double tau = 0.0;
    double gamma = 0.0;
    double alpha = 0.0;
    std::vector<double> true_prob; // aligned with the emitted records
    double preclip_violation_rate = 0.0;
};

struct SynthOutput {
    std::vector<RawEnrollmentRecord> records;
    CpiMonthlySeries cpi;
    StrikeCalendar calendar;
    GroundTruth truth;
    std::vector<std::string> warnings;
};

SynthOutput generate(const DgpConfig& config);

struct GeneratedPanel {
    Panel panel;
    AssemblyReport report;
    GroundTruth truth;
    std::vector<std::string> warnings;
};

/// Generates records and pushes them through the real assembly pipeline.
GeneratedPanel generate_panel(const DgpConfig& config);

/// Named parameter sets used by the validation suites and the CLI --preset
/// flag: dual-stressor, null, confounded-null, lag-profile, amplification.
DgpConfig preset_config(const std::string& name, int n_students, std::uint64_t seed);
std::vector<std::string> preset_names();

// --- Scenario engine ------------------------------------------------------

/// Four-scenario grid: baseline, strikes-only, inflation-only, combined.
/// The combined scenario is exactly the union of the two single-stressor
/// overrides. Scenario runs share random-number streams, so differences
/// between scenarios are paired.
struct ScenarioConfig {
    double low_inflation = 0.05;
    double high_inflation = 1.5;
    int horizon = 8; // semester at which amplification is evaluated
};

struct ScenarioResult {
    std::vector<std::string> names; // baseline, strikes-only, inflation-only, combined
    std::map<std::string, std::vector<double>> attrition; // cumulative share per semester
    std::optional<double> amplification; // nullopt when the denominator vanishes
    int horizon = 8;
};

ScenarioResult run_scenarios(const DgpConfig& base, const ScenarioConfig& scenarios);

} // namespace paneldml
