#pragma once

#include "paneldml/dml.hpp"
#include "paneldml/panel.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace paneldml {

enum class PlaceboMode { permute, gaussian };

PlaceboMode placebo_mode_from_string(const std::string& s);
std::string to_string(PlaceboMode mode);

struct PlaceboSpec {
    PlaceboMode mode = PlaceboMode::permute;
    std::uint64_t seed = 0;
    bool within_cohort = false; // permute inside each cohort instead of globally
    bool rebuild_interaction = true;
};

/// A panel-aligned synthetic treatment column plus its rebuilt interaction.
/// Rows whose real treatment is missing stay missing.
struct PlaceboColumns {
    std::vector<std::optional<double>> fake_strike;
    std::vector<std::optional<double>> fake_interaction;
};

/// permute: a seeded permutation of the observed strikes_lag2 values (the
/// empirical distribution is preserved exactly); gaussian: i.i.d. standard
/// normal draws. All other variables are left untouched.
PlaceboColumns make_placebo_treatment(const Panel& panel, const PlaceboSpec& spec);

struct Table5Report {
    PlaceboMode mode = PlaceboMode::permute;
    DmlEstimate estimate;     // DML run with the placebo treatment substituted
    std::size_t n_rows = 0;
};

/// Same DML pipeline with Fake_Strike in place of strikes_lag2 and the
/// placebo interaction in place of the real one.
Table5Report placebo_test(const Panel& panel, const DmlConfig& config, const PlaceboSpec& spec);

/// Modeling table of the placebo run (exposed so audits can diff it against
/// the real pipeline's table).
DmlData build_placebo_dml_data(const Panel& panel, const PlaceboColumns& columns);

struct SeedRecord {
    std::uint64_t seed = 0;
    bool ok = false;
    std::string error;
    DmlEstimate estimate;
};

struct ParameterSummary {
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    double sign_stability = 0.0;       // share of seeds matching the mean's sign
    double significant_fraction = 0.0; // share with p < 0.05
};

struct SeedSweepResult {
    std::vector<SeedRecord> records; // sorted by seed
    ParameterSummary tau;
    ParameterSummary gamma;
    std::size_t failures = 0;
};

/// One dml_fit per master seed; failures are recorded and the sweep continues.
SeedSweepResult seed_sweep(const Panel& panel, const DmlConfig& base,
                           const std::vector<std::uint64_t>& seeds);

/// Default seed sequence for sweeps: base + 1000*i.
std::vector<std::uint64_t> sweep_seeds(std::uint64_t base, std::size_t count);

void write_sweep_csv(const std::filesystem::path& path, const SeedSweepResult& result);

} // namespace paneldml
