// paneldml: panel construction, lagged logits, cross-fitted DML, placebo and
// seed audits, boosted-tree prediction with Shapley attribution, and a
// synthetic generator with known ground truth. File-based batch tool; every
// run writes a manifest that fully determines its outputs.

#include "paneldml/error.hpp"
#include "paneldml/frame.hpp"
#include "paneldml/report.hpp"
#include "paneldml/rng.hpp"

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace paneldml;

namespace {

struct CommonOptions {
    std::string panel_path;
    std::string out_dir = ".";
    std::uint64_t seed = 42;
    int folds = 5;
    int trees = 200;
    int depth = 3;
    double learning_rate = 0.05;
    double subsample = 0.8;
    int threads = 1;
};

DmlConfig dml_config_from(const CommonOptions& opt) {
    DmlConfig config;
    config.folds = opt.folds;
    config.seed = opt.seed;
    config.nuisance.n_trees = opt.trees;
    config.nuisance.max_depth = opt.depth;
    config.nuisance.learning_rate = opt.learning_rate;
    config.nuisance.subsample = opt.subsample;
    config.threads = opt.threads;
    return config;
}

nlohmann::json config_json(const CommonOptions& opt) {
    return {{"folds", opt.folds},
            {"trees", opt.trees},
            {"depth", opt.depth},
            {"learning_rate", opt.learning_rate},
            {"subsample", opt.subsample},
            {"threads", opt.threads}};
}

class RunWriter {
  public:
    RunWriter(std::string command, const std::string& out_dir, std::uint64_t seed)
        : out_dir_(out_dir) {
        fs::create_directories(out_dir_);
        manifest_.command = std::move(command);
        manifest_.tool_version = kToolVersion;
        manifest_.seed = seed;
    }

    void add_input(const std::string& path) { manifest_.inputs[path] = sha256_hex(path); }
    void set_config(nlohmann::json config) { manifest_.config = std::move(config); }

    fs::path out(const std::string& name) {
        manifest_.outputs.push_back(name);
        return out_dir_ / name;
    }

    void finish() {
        manifest_.outputs.push_back("manifest.json");
        write_json_file(out_dir_ / "manifest.json", to_json(manifest_));
    }

  private:
    fs::path out_dir_;
    RunManifest manifest_;
};

int run_build_panel(const std::string& enrollment, const std::string& cpi_path,
                    const std::string& strikes_path, const CommonOptions& opt) {
    RunWriter writer("build-panel", opt.out_dir, opt.seed);
    writer.add_input(enrollment);
    writer.add_input(cpi_path);
    writer.add_input(strikes_path);
    writer.set_config(nlohmann::json::object());

    const auto records = load_enrollment_csv(enrollment);
    const auto cpi = load_cpi_csv(cpi_path);
    const auto calendar = load_strikes_csv(strikes_path);
    AssemblyResult assembled = assemble_panel(records, cpi, calendar);

    const auto violations = validate_leakage(assembled.panel, records, cpi, calendar);
    nlohmann::json report = to_json(assembled.report);
    nlohmann::json violation_list = nlohmann::json::array();
    for (const auto& v : violations)
        violation_list.push_back({{"student_id", v.student_id},
                                  {"semester_number", v.semester_number},
                                  {"column", v.column},
                                  {"detail", v.detail}});
    report["leakage_violations"] = violation_list;

    write_panel_csv(writer.out("panel.csv"), assembled.panel);
    write_json_file(writer.out("assembly_report.json"), report);
    writer.finish();

    std::cout << "panel rows: " << assembled.panel.rows.size()
              << ", leakage violations: " << violations.size() << "\n";
    return violations.empty() ? 0 : 2;
}

int run_fit_lags(const CommonOptions& opt) {
    RunWriter writer("fit-lags", opt.out_dir, opt.seed);
    writer.add_input(opt.panel_path);
    writer.set_config(nlohmann::json::object());

    const Panel panel = read_panel_csv(opt.panel_path);
    const Table1Report report = fit_lag_profile(panel);

    write_json_file(writer.out("report.json"), to_json(report));
    const std::string text = render_lag_table(report);
    write_text_file(writer.out("report.txt"), text);
    writer.finish();
    std::cout << text;
    return 0;
}

int run_fit_dml(const CommonOptions& opt) {
    RunWriter writer("fit-dml", opt.out_dir, opt.seed);
    writer.add_input(opt.panel_path);
    writer.set_config(config_json(opt));

    const Panel panel = read_panel_csv(opt.panel_path);
    ResidualSet residuals;
    const DmlEstimate estimate = dml_fit(panel, dml_config_from(opt), &residuals);

    write_json_file(writer.out("report.json"), to_json(estimate));
    const std::string text = render_dml_table(estimate);
    write_text_file(writer.out("report.txt"), text);
    write_residuals_csv(writer.out("residuals.csv"), panel, residuals);
    writer.finish();
    std::cout << text;
    return 0;
}

int run_placebo(const CommonOptions& opt, const std::string& mode, bool within_cohort) {
    RunWriter writer("placebo", opt.out_dir, opt.seed);
    writer.add_input(opt.panel_path);
    nlohmann::json config = config_json(opt);
    config["placebo_mode"] = mode;
    config["within_cohort"] = within_cohort;
    writer.set_config(config);

    const Panel panel = read_panel_csv(opt.panel_path);
    PlaceboSpec spec;
    spec.mode = placebo_mode_from_string(mode);
    spec.seed = opt.seed;
    spec.within_cohort = within_cohort;
    const Table5Report report = placebo_test(panel, dml_config_from(opt), spec);

    write_json_file(writer.out("report.json"), to_json(report));
    const std::string text = render_placebo_table(report);
    write_text_file(writer.out("report.txt"), text);
    writer.finish();
    std::cout << text;
    return 0;
}

int run_seed_sweep(const CommonOptions& opt, std::size_t n_seeds) {
    RunWriter writer("seed-sweep", opt.out_dir, opt.seed);
    writer.add_input(opt.panel_path);
    nlohmann::json config = config_json(opt);
    config["seeds"] = n_seeds;
    writer.set_config(config);

    const Panel panel = read_panel_csv(opt.panel_path);
    const SeedSweepResult result =
        seed_sweep(panel, dml_config_from(opt), sweep_seeds(opt.seed, n_seeds));

    write_json_file(writer.out("report.json"), to_json(result));
    write_sweep_csv(writer.out("sweep.csv"), result);
    writer.finish();

    std::cout << "seeds: " << result.records.size() << ", failures: " << result.failures
              << ", gamma mean: " << format_fixed4(result.gamma.mean)
              << ", gamma significant fraction: "
              << format_fixed4(result.gamma.significant_fraction) << "\n";
    return 0;
}

int run_predict_shap(const CommonOptions& opt, double train_fraction, std::size_t background_rows,
                     std::size_t shap_rows) {
    RunWriter writer("predict-shap", opt.out_dir, opt.seed);
    writer.add_input(opt.panel_path);
    nlohmann::json config = config_json(opt);
    config["train_fraction"] = train_fraction;
    config["background_rows"] = background_rows;
    config["shap_rows"] = shap_rows;
    writer.set_config(config);

    const Panel panel = read_panel_csv(opt.panel_path);
    GbrtConfig gbrt;
    gbrt.n_trees = opt.trees;
    gbrt.max_depth = opt.depth;
    gbrt.learning_rate = opt.learning_rate;
    gbrt.subsample = opt.subsample;
    const PredictiveModel model = fit_predictive_model(panel, train_fraction, opt.seed, gbrt);

    const NumericTable background = background_sample(model, background_rows, opt.seed);
    const TreeShapExplainer explainer(model.ensemble, model.map, background);

    // Seeded evaluation subsample keeps attribution cost bounded.
    NumericTable dataset = model.players;
    if (dataset.n_rows > shap_rows) {
        std::vector<std::size_t> rows(model.players.n_rows);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        Rng rng(derive_seed(opt.seed, "shap-dataset"));
        rng.shuffle(rows);
        rows.resize(shap_rows);
        std::sort(rows.begin(), rows.end());
        NumericTable subset;
        subset.names = dataset.names;
        for (const std::size_t r : rows)
            subset.data.insert(subset.data.end(), dataset.row(r),
                               dataset.row(r) + dataset.n_cols());
        subset.n_rows = rows.size();
        dataset = std::move(subset);
    }

    const auto importance =
        global_importance(explainer, dataset, model.player_names, opt.threads);

    nlohmann::json reliability = nlohmann::json::array();
    for (const auto& bin : model.reliability)
        reliability.push_back({{"bin_low", bin.bin_low},
                               {"bin_high", bin.bin_high},
                               {"count", bin.count},
                               {"mean_predicted", bin.mean_predicted},
                               {"observed_rate", bin.observed_rate}});
    write_json_file(writer.out("auc.json"), {{"auc", model.auc},
                                             {"n_train", model.train_rows.size()},
                                             {"n_test", model.test_rows.size()},
                                             {"reliability", reliability}});

    std::vector<std::vector<std::string>> importance_rows;
    for (const auto& entry : importance)
        importance_rows.push_back({entry.name, format_double(entry.mean_abs_shap)});
    write_csv(writer.out("importance.csv"), {"feature", "mean_abs_shap"}, importance_rows);

    auto player_index = [&](const std::string& name) {
        return static_cast<int>(std::find(model.player_names.begin(), model.player_names.end(),
                                          name) -
                                model.player_names.begin());
    };
    const auto dump_dependence = [&](const std::string& feature, const std::string& color,
                                     const std::string& file) {
        const auto rows =
            dependence_data(explainer, dataset, player_index(feature), player_index(color),
                            opt.threads);
        std::vector<std::vector<std::string>> cells;
        cells.reserve(rows.size());
        for (const auto& r : rows)
            cells.push_back({format_double(r.feature_value), format_double(r.shap_value),
                             format_double(r.color_value)});
        write_csv(writer.out(file), {"feature_value", "shap_value", "color_value"}, cells);
    };
    dump_dependence("strikes_lag2", "inflation_at_entry", "dependence_strikes_lag2.csv");
    dump_dependence("inflation_at_entry", "strikes_lag2", "dependence_inflation_at_entry.csv");

    write_json_file(writer.out("model.json"), model.ensemble.to_json());
    writer.finish();

    std::cout << "test AUC: " << format_fixed4(model.auc) << "\n";
    return 0;
}

int run_synth(const CommonOptions& opt, const std::string& preset, int students) {
    RunWriter writer("synth", opt.out_dir, opt.seed);
    nlohmann::json config = {{"preset", preset}, {"students", students}};
    writer.set_config(config);

    const DgpConfig dgp = preset_config(preset, students, opt.seed);
    const SynthOutput synth = generate(dgp);

    write_enrollment_csv(writer.out("enrollment.csv"), synth.records);
    write_cpi_csv(writer.out("cpi.csv"), synth.cpi);
    write_strikes_csv(writer.out("strikes.csv"), synth.calendar);

    nlohmann::json truth = to_json(synth.truth);
    truth["preset"] = preset;
    truth["warnings"] = synth.warnings;
    write_json_file(writer.out("ground_truth.json"), truth);

    std::vector<std::vector<std::string>> prob_rows;
    prob_rows.reserve(synth.records.size());
    for (std::size_t i = 0; i < synth.records.size(); ++i)
        prob_rows.push_back({synth.records[i].student_id,
                             std::to_string(synth.records[i].semester_number),
                             format_double(synth.truth.true_prob[i])});
    write_csv(writer.out("true_probabilities.csv"), {"student_id", "semester_number", "true_prob"},
              prob_rows);
    writer.finish();

    std::cout << "records: " << synth.records.size() << ", tau: " << synth.truth.tau
              << ", gamma: " << synth.truth.gamma << "\n";
    return 0;
}

int run_scenarios(const CommonOptions& opt, const std::string& preset, int students, int horizon,
                  double low_inflation, double high_inflation) {
    RunWriter writer("scenarios", opt.out_dir, opt.seed);
    writer.set_config({{"preset", preset},
                       {"students", students},
                       {"horizon", horizon},
                       {"low_inflation", low_inflation},
                       {"high_inflation", high_inflation}});

    const DgpConfig dgp = preset_config(preset, students, opt.seed);
    ScenarioConfig scenarios;
    scenarios.horizon = horizon;
    scenarios.low_inflation = low_inflation;
    scenarios.high_inflation = high_inflation;
    const ScenarioResult result = run_scenarios(dgp, scenarios);

    write_json_file(writer.out("scenarios.json"), to_json(result));

    std::vector<std::vector<std::string>> rows;
    for (int t = 1; t <= dgp.max_semesters; ++t) {
        std::vector<std::string> cells = {std::to_string(t)};
        for (const auto& name : result.names)
            cells.push_back(format_double(result.attrition.at(name)[static_cast<std::size_t>(t - 1)]));
        rows.push_back(std::move(cells));
    }
    write_csv(writer.out("attrition.csv"),
              {"semester", "baseline", "strikes_only", "inflation_only", "combined"}, rows);
    writer.finish();

    if (result.amplification)
        std::cout << "amplification at semester " << result.horizon << ": "
                  << format_fixed4(*result.amplification) << "\n";
    else
        std::cout << "amplification undefined (isolated effects cancel)\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Panel causal-analysis toolkit: leak-aware panels, lagged logits, "
                 "cross-fitted DML, robustness audits, Shapley attribution, and a "
                 "synthetic benchmark generator"};
    app.require_subcommand(1);

    CommonOptions opt;
    std::string enrollment, cpi_path, strikes_path;
    std::string placebo_mode = "permute";
    bool within_cohort = false;
    std::size_t n_seeds = 30;
    double train_fraction = 0.7;
    std::size_t background_rows = 256;
    std::size_t shap_rows = 2000;
    std::string preset = "dual-stressor";
    int students = 2000;
    int horizon = 8;
    double low_inflation = 0.05;
    double high_inflation = 1.5;

    auto add_common = [&](CLI::App* cmd, bool needs_panel) {
        if (needs_panel)
            cmd->add_option("--panel", opt.panel_path, "panel CSV produced by build-panel")
                ->required();
        cmd->add_option("--out-dir", opt.out_dir, "output directory");
        cmd->add_option("--seed", opt.seed, "master seed");
        cmd->add_option("--threads", opt.threads, "worker cap (outputs are invariant to it)");
    };
    auto add_learner = [&](CLI::App* cmd) {
        cmd->add_option("--folds", opt.folds, "cross-fitting folds");
        cmd->add_option("--trees", opt.trees, "boosting rounds");
        cmd->add_option("--depth", opt.depth, "tree depth");
        cmd->add_option("--learning-rate", opt.learning_rate, "boosting learning rate");
        cmd->add_option("--subsample", opt.subsample, "row subsample fraction per round");
    };

    auto* build = app.add_subcommand("build-panel", "assemble the student-semester panel");
    build->add_option("--enrollment", enrollment, "enrollment CSV")->required();
    build->add_option("--cpi", cpi_path, "monthly CPI CSV")->required();
    build->add_option("--strikes", strikes_path, "strike calendar CSV")->required();
    add_common(build, false);

    auto* lags = app.add_subcommand("fit-lags", "lagged logit effects (report layout of the lag table)");
    add_common(lags, true);

    auto* dml = app.add_subcommand("fit-dml", "cross-fitted DML for the strike and interaction effects");
    add_common(dml, true);
    add_learner(dml);

    auto* placebo = app.add_subcommand("placebo", "DML with a synthetic treatment substituted");
    add_common(placebo, true);
    add_learner(placebo);
    placebo->add_option("--placebo-mode", placebo_mode, "permute|gaussian");
    placebo->add_flag("--within-cohort", within_cohort, "permute inside cohorts");

    auto* sweep = app.add_subcommand("seed-sweep", "re-estimate DML across master seeds");
    add_common(sweep, true);
    add_learner(sweep);
    sweep->add_option("--seeds", n_seeds, "number of seeds");

    auto* shap = app.add_subcommand("predict-shap",
                                    "gradient-boosted dropout model with Shapley attribution");
    add_common(shap, true);
    add_learner(shap);
    shap->add_option("--train-fraction", train_fraction, "stratified train share");
    shap->add_option("--background", background_rows, "Shapley background rows");
    shap->add_option("--shap-rows", shap_rows, "rows attributed for importance/dependence");

    auto* synth = app.add_subcommand("synth", "generate synthetic input CSVs with ground truth");
    add_common(synth, false);
    synth->add_option("--preset", preset, "dual-stressor|null|confounded-null|lag-profile|amplification");
    synth->add_option("--students", students, "total students across cohorts");

    auto* scen = app.add_subcommand("scenarios", "stressor scenario grid and amplification");
    add_common(scen, false);
    scen->add_option("--preset", preset, "generator preset");
    scen->add_option("--students", students, "total students");
    scen->add_option("--horizon", horizon, "semester at which amplification is evaluated");
    scen->add_option("--low-inflation", low_inflation, "inflation for non-inflation scenarios");
    scen->add_option("--high-inflation", high_inflation, "inflation for inflation scenarios");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (build->parsed()) return run_build_panel(enrollment, cpi_path, strikes_path, opt);
        if (lags->parsed()) return run_fit_lags(opt);
        if (dml->parsed()) return run_fit_dml(opt);
        if (placebo->parsed()) return run_placebo(opt, placebo_mode, within_cohort);
        if (sweep->parsed()) return run_seed_sweep(opt, n_seeds);
        if (shap->parsed()) return run_predict_shap(opt, train_fraction, background_rows, shap_rows);
        if (synth->parsed()) return run_synth(opt, preset, students);
        if (scen->parsed())
            return run_scenarios(opt, preset, students, horizon, low_inflation, high_inflation);
    } catch (const SchemaError& e) {
        std::cerr << "error (schema): " << e.what() << "\n";
        return 2;
    } catch (const DataError& e) {
        std::cerr << "error (data): " << e.what() << "\n";
        return 2;
    } catch (const NumericError& e) {
        std::cerr << "error (numeric): " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
