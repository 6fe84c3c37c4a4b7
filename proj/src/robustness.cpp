#include "paneldml/robustness.hpp"

#include "paneldml/error.hpp"
#include "paneldml/frame.hpp"
#include "paneldml/parallel.hpp"
#include "paneldml/rng.hpp"
#include "paneldml/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace paneldml {

PlaceboMode placebo_mode_from_string(const std::string& s) {
    if (s == "permute") return PlaceboMode::permute;
    if (s == "gaussian") return PlaceboMode::gaussian;
    throw SchemaError("unknown placebo mode '" + s + "' (expected permute|gaussian)");
}

std::string to_string(PlaceboMode mode) {
    return mode == PlaceboMode::permute ? "permute" : "gaussian";
}

PlaceboColumns make_placebo_treatment(const Panel& panel, const PlaceboSpec& spec) {
    PlaceboColumns out;
    out.fake_strike.resize(panel.rows.size());
    out.fake_interaction.resize(panel.rows.size());

    std::vector<std::size_t> present;
    for (std::size_t i = 0; i < panel.rows.size(); ++i)
        if (panel.rows[i].strikes_lag2) present.push_back(i);

    Rng rng(derive_seed(spec.seed, "placebo", static_cast<std::uint64_t>(spec.mode)));

    if (spec.mode == PlaceboMode::gaussian) {
        for (const std::size_t i : present) out.fake_strike[i] = rng.normal();
    } else if (!spec.within_cohort) {
        std::vector<double> values;
        values.reserve(present.size());
        for (const std::size_t i : present) values.push_back(*panel.rows[i].strikes_lag2);
        rng.shuffle(values);
        for (std::size_t j = 0; j < present.size(); ++j) out.fake_strike[present[j]] = values[j];
    } else {
        std::map<int, std::vector<std::size_t>> by_cohort;
        for (const std::size_t i : present) by_cohort[panel.rows[i].cohort_year].push_back(i);
        for (auto& [cohort, idx] : by_cohort) {
            std::vector<double> values;
            values.reserve(idx.size());
            for (const std::size_t i : idx) values.push_back(*panel.rows[i].strikes_lag2);
            rng.shuffle(values);
            for (std::size_t j = 0; j < idx.size(); ++j) out.fake_strike[idx[j]] = values[j];
        }
    }

    if (spec.rebuild_interaction)
        for (const std::size_t i : present)
            out.fake_interaction[i] = *out.fake_strike[i] * panel.rows[i].inflation_at_entry;

    return out;
}

DmlData build_placebo_dml_data(const Panel& panel, const PlaceboColumns& columns) {
    DmlData data = build_dml_data(panel);
    const std::size_t t_col = data.table.require(data.treatment_col);
    const std::size_t tx_col = data.table.require(data.interaction_col);
    for (std::size_t r = 0; r < data.table.n_rows; ++r) {
        const std::size_t panel_row = data.panel_rows[r];
        if (!columns.fake_strike[panel_row] || !columns.fake_interaction[panel_row])
            throw DataError("placebo column missing on a modeled row");
        data.table.at(r, t_col) = *columns.fake_strike[panel_row];
        data.table.at(r, tx_col) = *columns.fake_interaction[panel_row];
    }
    return data;
}

Table5Report placebo_test(const Panel& panel, const DmlConfig& config, const PlaceboSpec& spec) {
    const PlaceboColumns columns = make_placebo_treatment(panel, spec);
    const DmlData data = build_placebo_dml_data(panel, columns);

    Table5Report report;
    report.mode = spec.mode;
    report.estimate = dml_fit_data(data, config);
    report.n_rows = data.table.n_rows;
    return report;
}

std::vector<std::uint64_t> sweep_seeds(std::uint64_t base, std::size_t count) {
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t i = 0; i < count; ++i) seeds[i] = base + 1000 * i;
    return seeds;
}

namespace {

ParameterSummary summarize(const std::vector<const ParamEstimate*>& params) {
    ParameterSummary s;
    if (params.empty()) return s;
    std::vector<double> estimates;
    estimates.reserve(params.size());
    std::size_t significant = 0;
    for (const auto* p : params) {
        estimates.push_back(p->estimate);
        if (p->p_value < 0.05) ++significant;
    }
    s.mean = stats::mean(estimates);
    s.sd = stats::stddev(estimates);
    s.min = *std::min_element(estimates.begin(), estimates.end());
    s.max = *std::max_element(estimates.begin(), estimates.end());
    const double sign = s.mean >= 0.0 ? 1.0 : -1.0;
    std::size_t same_sign = 0;
    for (double e : estimates)
        if (e * sign > 0.0) ++same_sign;
    s.sign_stability = static_cast<double>(same_sign) / static_cast<double>(estimates.size());
    s.significant_fraction =
        static_cast<double>(significant) / static_cast<double>(estimates.size());
    return s;
}

} // namespace

SeedSweepResult seed_sweep(const Panel& panel, const DmlConfig& base,
                           const std::vector<std::uint64_t>& seeds) {
    if (seeds.size() < 2) throw DataError("seed_sweep: need at least 2 seeds");

    const DmlData data = build_dml_data(panel);

    SeedSweepResult result;
    result.records.resize(seeds.size());

    parallel_for(seeds.size(), base.threads, [&](std::size_t i) {
        SeedRecord rec;
        rec.seed = seeds[i];
        try {
            DmlConfig config = base;
            config.seed = seeds[i];
            config.threads = 1; // parallelism lives at the sweep level
            rec.estimate = dml_fit_data(data, config);
            rec.ok = true;
        } catch (const std::exception& e) {
            rec.ok = false;
            rec.error = e.what();
        }
        result.records[i] = std::move(rec);
    });

    std::sort(result.records.begin(), result.records.end(),
              [](const SeedRecord& a, const SeedRecord& b) { return a.seed < b.seed; });

    std::vector<const ParamEstimate*> taus, gammas;
    for (const auto& rec : result.records) {
        if (!rec.ok) {
            result.failures++;
            continue;
        }
        taus.push_back(&rec.estimate.tau);
        gammas.push_back(&rec.estimate.gamma);
    }
    result.tau = summarize(taus);
    result.gamma = summarize(gammas);
    return result;
}

void write_sweep_csv(const std::filesystem::path& path, const SeedSweepResult& result) {
    std::vector<std::vector<std::string>> rows;
    for (const auto& rec : result.records) {
        if (!rec.ok) continue;
        rows.push_back({std::to_string(rec.seed), format_double(rec.estimate.tau.estimate),
                        format_double(rec.estimate.tau.se), format_double(rec.estimate.tau.p_value),
                        format_double(rec.estimate.gamma.estimate),
                        format_double(rec.estimate.gamma.se),
                        format_double(rec.estimate.gamma.p_value),
                        format_double(rec.estimate.gamma.ci_low),
                        format_double(rec.estimate.gamma.ci_high)});
    }
    write_csv(path,
              {"seed", "tau", "tau_se", "tau_p", "gamma", "gamma_se", "gamma_p", "ci_low_gamma",
               "ci_high_gamma"},
              rows);
}

} // namespace paneldml
