#include "fairaudit/experiment.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "fairaudit/rng.hpp"
#include "fairaudit/synthgen.hpp"

namespace fairaudit {

namespace {

// Seed-derivation salts; every random stream hangs off (experiment seed, salt).
constexpr std::uint64_t kSaltSynthGen = 0x73796e746867656eULL;
constexpr std::uint64_t kSaltValidation = 0x76616c69646174ULL;
constexpr std::uint64_t kSaltNnaaReal = 0x6e6e61615f72ULL;
constexpr std::uint64_t kSaltNnaaSynth = 0x6e6e61615f73ULL;
constexpr std::uint64_t kSaltArmReal = 0x61726d5f7265616cULL;
constexpr std::uint64_t kSaltArmSynth = 0x61726d5f73796eULL;
constexpr std::uint64_t kSaltHpsVal = 0x6870735f76616cULL;
constexpr std::uint64_t kSaltHpsTest = 0x6870735f74737464ULL;

const char* preset_name(PreprocessPreset p) {
    switch (p) {
        case PreprocessPreset::Cardio: return "cardio";
        case PreprocessPreset::OneHotAll: return "onehot_all";
        case PreprocessPreset::None: return "none";
    }
    return "none";
}

PreprocessPreset parse_preset(const std::string& name) {
    if (name == "cardio") return PreprocessPreset::Cardio;
    if (name == "onehot_all") return PreprocessPreset::OneHotAll;
    if (name == "none") return PreprocessPreset::None;
    throw ConfigError("unknown preprocess preset: '" + name + "'");
}

MitigationKind parse_mitigation(const std::string& name) {
    if (name == "eo_threshold") return MitigationKind::EoThreshold;
    if (name == "reweigh") return MitigationKind::Reweigh;
    if (name == "reduction") return MitigationKind::Reduction;
    if (name == "hps") return MitigationKind::Hps;
    throw ConfigError("unknown mitigation: '" + name + "'");
}

std::vector<double> default_reduction_grid() {
    std::vector<double> grid;
    for (int i = 0; i <= 10; ++i) grid.push_back(static_cast<double>(i - 5) / 5.0);
    return grid;
}

} // namespace

const char* mitigation_name(MitigationKind kind) {
    switch (kind) {
        case MitigationKind::EoThreshold: return "eo_threshold";
        case MitigationKind::Reweigh: return "reweigh";
        case MitigationKind::Reduction: return "reduction";
        case MitigationKind::Hps: return "hps";
    }
    return "eo_threshold";
}

void ExperimentConfig::validate() const {
    if (config_version != 1) throw ConfigError("unsupported config_version (expected 1)");
    if (dataset_path.empty()) throw ConfigError("dataset.path is required");
    if (!std::filesystem::exists(dataset_path)) {
        throw ConfigError("dataset file does not exist: " + dataset_path);
    }
    if (schema.columns.empty()) throw ConfigError("dataset.columns must not be empty");
    if (schema.label_column.empty()) throw ConfigError("dataset.label is required");
    if (schema.protected_column.empty()) throw ConfigError("dataset.protected is required");
    if (protected_pair.group_a.empty() || protected_pair.group_b.empty()) {
        throw ConfigError("protected_pair.group_a and group_b are required");
    }
    if (protected_pair.group_a == protected_pair.group_b) {
        throw ConfigError("protected_pair groups must differ");
    }
    if (seeds.empty()) throw ConfigError("seeds must not be empty");
    if (std::set<int>(seeds.begin(), seeds.end()).size() != seeds.size()) {
        throw ConfigError("seeds must be distinct");
    }
    if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must be in (0, 1)");
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
        throw ConfigError("validation_fraction must be in (0, 1)");
    }
    if (!(accuracy_floor >= 0.0 && accuracy_floor <= 1.0)) {
        throw ConfigError("accuracy_floor must be in [0, 1]");
    }
    if (synthetic_source == SyntheticSource::External) {
        if (synthetic_path.empty()) throw ConfigError("synthetic.path is required for an external source");
        if (!std::filesystem::exists(synthetic_path)) {
            throw ConfigError("synthetic file does not exist: " + synthetic_path);
        }
    } else if (synthetic_size < 1) {
        throw ConfigError("synthetic.size must be at least 1");
    }
    const bool has_reduction = std::find(mitigations.begin(), mitigations.end(),
                                         MitigationKind::Reduction) != mitigations.end();
    if (has_reduction && reduction_grid.empty()) {
        throw ConfigError("reduction_grid must not be empty when reduction is configured");
    }
    std::set<MitigationKind> unique(mitigations.begin(), mitigations.end());
    if (unique.size() != mitigations.size()) throw ConfigError("mitigations must be distinct");
    if (forest.n_trees < 1) throw ConfigError("forest.n_trees must be at least 1");
    if (forest.min_leaf < 1) throw ConfigError("forest.min_leaf must be at least 1");
    if (nnaa_max_rows < 2) throw ConfigError("nnaa_max_rows must be at least 2");
    if (output_dir.empty()) throw ConfigError("output_dir is required");
}

nlohmann::json ExperimentConfig::to_json() const {
    nlohmann::json cols = nlohmann::json::array();
    for (const ColumnSpec& c : schema.columns) {
        nlohmann::json jc = {{"name", c.name},
                             {"kind", c.kind == ColumnKind::Numeric ? "numeric" : "categorical"}};
        if (!c.levels.empty()) jc["levels"] = c.levels;
        cols.push_back(std::move(jc));
    }
    nlohmann::json dataset = {{"path", dataset_path},
                              {"columns", cols},
                              {"label", schema.label_column},
                              {"protected", schema.protected_column},
                              {"delimiter", std::string(1, schema.delimiter)},
                              {"ignore_columns", schema.ignore_columns}};
    if (schema.label_positive) dataset["label_positive"] = *schema.label_positive;

    nlohmann::json synthetic = {{"source", synthetic_source == SyntheticSource::Surrogate
                                               ? "surrogate"
                                               : "external"},
                                {"size", synthetic_size},
                                {"use_copula", synthetic_copula}};
    if (synthetic_source == SyntheticSource::External) synthetic["path"] = synthetic_path;

    std::vector<std::string> mit_names;
    for (MitigationKind m : mitigations) mit_names.emplace_back(mitigation_name(m));

    return nlohmann::json{
        {"config_version", config_version},
        {"dataset", dataset},
        {"preprocess", preset_name(preprocess)},
        {"cardio_columns",
         {{"age", cardio_columns.age},
          {"systolic", cardio_columns.systolic},
          {"diastolic", cardio_columns.diastolic}}},
        {"protected_pair", {{"group_a", protected_pair.group_a}, {"group_b", protected_pair.group_b}}},
        {"group_labels", group_labels},
        {"forest",
         {{"n_trees", forest.n_trees},
          {"max_depth", forest.max_depth},
          {"max_features", forest.max_features},
          {"min_leaf", forest.min_leaf},
          {"bootstrap", forest.bootstrap}}},
        {"seeds", seeds},
        {"split_ratio", split_ratio},
        {"validation_fraction", validation_fraction},
        {"synthetic", synthetic},
        {"mitigations", mit_names},
        {"mitigation_params", {{"accuracy_floor", accuracy_floor}, {"reduction_grid", reduction_grid}}},
        {"nnaa_max_rows", nnaa_max_rows},
        {"output_dir", output_dir}};
}

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
    ExperimentConfig cfg;
    try {
        cfg.config_version = j.at("config_version").get<int>();
        const auto& jd = j.at("dataset");
        cfg.dataset_path = jd.at("path").get<std::string>();
        for (const auto& jc : jd.at("columns")) {
            ColumnSpec c;
            c.name = jc.at("name").get<std::string>();
            const std::string kind = jc.at("kind").get<std::string>();
            if (kind == "numeric") c.kind = ColumnKind::Numeric;
            else if (kind == "categorical") c.kind = ColumnKind::Categorical;
            else throw ConfigError("unknown column kind: '" + kind + "'");
            if (jc.contains("levels")) c.levels = jc.at("levels").get<std::vector<std::string>>();
            cfg.schema.columns.push_back(std::move(c));
        }
        cfg.schema.label_column = jd.at("label").get<std::string>();
        cfg.schema.protected_column = jd.at("protected").get<std::string>();
        if (jd.contains("delimiter")) {
            const std::string d = jd.at("delimiter").get<std::string>();
            if (d.size() != 1) throw ConfigError("dataset.delimiter must be a single character");
            cfg.schema.delimiter = d[0];
        }
        if (jd.contains("ignore_columns")) {
            cfg.schema.ignore_columns = jd.at("ignore_columns").get<std::vector<std::string>>();
        }
        if (jd.contains("label_positive")) {
            cfg.schema.label_positive = jd.at("label_positive").get<std::string>();
        }

        if (j.contains("preprocess")) cfg.preprocess = parse_preset(j.at("preprocess").get<std::string>());
        if (j.contains("cardio_columns")) {
            const auto& jcc = j.at("cardio_columns");
            if (jcc.contains("age")) cfg.cardio_columns.age = jcc.at("age").get<std::string>();
            if (jcc.contains("systolic")) cfg.cardio_columns.systolic = jcc.at("systolic").get<std::string>();
            if (jcc.contains("diastolic")) cfg.cardio_columns.diastolic = jcc.at("diastolic").get<std::string>();
        }

        const auto& jp = j.at("protected_pair");
        cfg.protected_pair.attribute = cfg.schema.protected_column;
        cfg.protected_pair.group_a = jp.at("group_a").get<std::string>();
        cfg.protected_pair.group_b = jp.at("group_b").get<std::string>();
        if (j.contains("group_labels")) {
            cfg.group_labels = j.at("group_labels").get<std::map<std::string, std::string>>();
        }

        if (j.contains("forest")) {
            const auto& jf = j.at("forest");
            if (jf.contains("n_trees")) cfg.forest.n_trees = jf.at("n_trees").get<int>();
            if (jf.contains("max_depth")) cfg.forest.max_depth = jf.at("max_depth").get<int>();
            if (jf.contains("max_features")) cfg.forest.max_features = jf.at("max_features").get<int>();
            if (jf.contains("min_leaf")) cfg.forest.min_leaf = jf.at("min_leaf").get<int>();
            if (jf.contains("bootstrap")) cfg.forest.bootstrap = jf.at("bootstrap").get<bool>();
        }

        if (j.contains("seeds")) {
            cfg.seeds = j.at("seeds").get<std::vector<int>>();
        } else {
            for (int s = 1; s <= 10; ++s) cfg.seeds.push_back(s);
        }
        if (j.contains("split_ratio")) cfg.split_ratio = j.at("split_ratio").get<double>();
        if (j.contains("validation_fraction")) {
            cfg.validation_fraction = j.at("validation_fraction").get<double>();
        }

        if (j.contains("synthetic")) {
            const auto& js = j.at("synthetic");
            const std::string source = js.value("source", "surrogate");
            if (source == "surrogate") cfg.synthetic_source = SyntheticSource::Surrogate;
            else if (source == "external") cfg.synthetic_source = SyntheticSource::External;
            else throw ConfigError("unknown synthetic source: '" + source + "'");
            if (js.contains("path")) cfg.synthetic_path = js.at("path").get<std::string>();
            if (js.contains("size")) cfg.synthetic_size = js.at("size").get<std::size_t>();
            if (js.contains("use_copula")) cfg.synthetic_copula = js.at("use_copula").get<bool>();
        }

        if (j.contains("mitigations")) {
            for (const auto& jm : j.at("mitigations")) {
                cfg.mitigations.push_back(parse_mitigation(jm.get<std::string>()));
            }
        }
        cfg.reduction_grid = default_reduction_grid();
        if (j.contains("mitigation_params")) {
            const auto& jmp = j.at("mitigation_params");
            if (jmp.contains("accuracy_floor")) cfg.accuracy_floor = jmp.at("accuracy_floor").get<double>();
            if (jmp.contains("reduction_grid")) {
                cfg.reduction_grid = jmp.at("reduction_grid").get<std::vector<double>>();
            }
        }
        if (j.contains("nnaa_max_rows")) cfg.nnaa_max_rows = j.at("nnaa_max_rows").get<std::size_t>();
        if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config parse error: ") + e.what());
    }
    return cfg;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    return from_json(j);
}

std::string ExperimentConfig::fingerprint() const {
    const std::string dump = to_json().dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char byte : dump) h = mix64(h ^ byte);
    std::ostringstream out;
    out << std::hex << h;
    return out.str();
}

namespace {

Table apply_preset(const Table& t, const ExperimentConfig& cfg) {
    switch (cfg.preprocess) {
        case PreprocessPreset::Cardio: return preprocess_cardio(t, cfg.cardio_columns);
        case PreprocessPreset::OneHotAll: return one_hot_encode_all(t);
        case PreprocessPreset::None: return t;
    }
    return t;
}

std::uint64_t row_content_hash(const Table& t, std::size_t row) {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    for (const Column& col : t.columns) {
        if (col.kind == ColumnKind::Numeric) {
            h = hash_combine(h, std::bit_cast<std::uint64_t>(col.values[row]));
        } else {
            for (char c : col.level_of(row)) h = hash_combine(h, static_cast<std::uint64_t>(c));
            h = hash_combine(h, 0x1fULL);
        }
    }
    return h;
}

bool has_duplicate_rows(const Table& t) {
    std::vector<std::uint64_t> hashes(t.row_count());
    for (std::size_t r = 0; r < t.row_count(); ++r) hashes[r] = row_content_hash(t, r);
    std::sort(hashes.begin(), hashes.end());
    return std::adjacent_find(hashes.begin(), hashes.end()) != hashes.end();
}

// Generator-input hygiene: when the source data is duplicate-free, no test row
// may appear among the rows the synthetic generator was fitted on.
void check_no_test_leakage(const Table& train, const Table& test, bool source_has_duplicates) {
    if (source_has_duplicates) return;
    std::set<std::uint64_t> train_hashes;
    for (std::size_t r = 0; r < train.row_count(); ++r) train_hashes.insert(row_content_hash(train, r));
    for (std::size_t r = 0; r < test.row_count(); ++r) {
        if (train_hashes.count(row_content_hash(test, r))) {
            throw Error("internal invariant violated: test row found in generator fitting input");
        }
    }
}

Evaluation evaluate_predictions(std::span<const int> labels, std::span<const int> preds,
                                std::span<const std::string> groups, const ProtectedSpec& spec) {
    Evaluation eval;
    eval.balanced_accuracy = balanced_accuracy(labels, preds);
    const auto [ra, rb] = group_rates(labels, preds, groups, spec);
    eval.fairness = fairness_metrics(ra, rb, spec);
    eval.bands = fairness_band(eval.fairness);
    eval.rates_a = ra;
    eval.rates_b = rb;
    return eval;
}

struct EvalSet {
    std::vector<int> labels;
    std::vector<std::string> groups;
};

struct ArmOutput {
    BaselineResult baseline;
    std::vector<MitigationRecord> mitigations;
};

ArmOutput run_arm(const std::string& arm, const Table& fit, const Table& val, const Table& test,
                  const ExperimentConfig& cfg, int seed) {
    const ProtectedSpec& spec = cfg.protected_pair;
    ForestConfig forest_cfg = cfg.forest;
    forest_cfg.seed = hash_combine(static_cast<std::uint64_t>(seed),
                                   arm == "real" ? kSaltArmReal : kSaltArmSynth);

    const EvalSet vs{val.labels(), val.protected_values()};
    const EvalSet ts{test.labels(), test.protected_values()};

    const TrainedForest model = train_forest(forest_cfg, fit);
    const std::vector<double> scores_val = model.predict_rows(val);
    const std::vector<double> scores_test = model.predict_rows(test);

    ArmOutput out;
    const ThresholdResult sweep = threshold_sweep(scores_val, vs.labels);
    out.baseline.threshold = sweep.threshold;
    out.baseline.validation = evaluate_predictions(vs.labels, apply_threshold(scores_val, sweep.threshold),
                                                   vs.groups, spec);
    out.baseline.test = evaluate_predictions(ts.labels, apply_threshold(scores_test, sweep.threshold),
                                             ts.groups, spec);

    for (MitigationKind kind : cfg.mitigations) {
        MitigationRecord rec;
        rec.kind = kind;
        rec.arm = arm;
        switch (kind) {
            case MitigationKind::EoThreshold: {
                const EoThresholdResult r =
                    eo_threshold_search(scores_val, vs.labels, vs.groups, spec, cfg.accuracy_floor);
                rec.threshold = r.threshold;
                rec.floor_unmet = r.floor_unmet;
                rec.validation = evaluate_predictions(vs.labels, apply_threshold(scores_val, r.threshold),
                                                      vs.groups, spec);
                rec.test = evaluate_predictions(ts.labels, apply_threshold(scores_test, r.threshold),
                                                ts.groups, spec);
                break;
            }
            case MitigationKind::Reweigh: {
                const std::vector<double> weights = reweigh(fit.labels(), fit.protected_values());
                const TrainedForest reweighed = train_forest(forest_cfg, fit, weights);
                const std::vector<double> rw_val = reweighed.predict_rows(val);
                const std::vector<double> rw_test = reweighed.predict_rows(test);
                const EoThresholdResult r =
                    eo_threshold_search(rw_val, vs.labels, vs.groups, spec, cfg.accuracy_floor);
                rec.threshold = r.threshold;
                rec.floor_unmet = r.floor_unmet;
                rec.validation = evaluate_predictions(vs.labels, apply_threshold(rw_val, r.threshold),
                                                      vs.groups, spec);
                rec.test = evaluate_predictions(ts.labels, apply_threshold(rw_test, r.threshold),
                                                ts.groups, spec);
                break;
            }
            case MitigationKind::Reduction: {
                const WeightedTrainer trainer = [&](const Table& t, const std::vector<double>& w) {
                    return train_forest(forest_cfg, t, w);
                };
                const GridReductionResult r = grid_reduction(trainer, fit, val, spec,
                                                             cfg.reduction_grid, cfg.accuracy_floor);
                rec.threshold = r.selection.threshold;
                rec.selected_multiplier = r.selected_multiplier;
                rec.floor_unmet = r.floor_unmet || r.selection.floor_unmet;
                const std::vector<double> red_val = r.model.predict_rows(val);
                const std::vector<double> red_test = r.model.predict_rows(test);
                rec.validation = evaluate_predictions(
                    vs.labels, apply_threshold(red_val, r.selection.threshold), vs.groups, spec);
                rec.test = evaluate_predictions(
                    ts.labels, apply_threshold(red_test, r.selection.threshold), ts.groups, spec);
                break;
            }
            case MitigationKind::Hps: {
                const std::vector<int> base_val = apply_threshold(scores_val, sweep.threshold);
                const std::vector<int> base_test = apply_threshold(scores_test, sweep.threshold);
                const HpsPolicy policy = hps_fit(base_val, vs.labels, vs.groups, spec);
                rec.policy = policy;
                rec.threshold = sweep.threshold;  // base predictions taken at the sweep threshold
                const std::vector<int> out_val = hps_apply(
                    policy, base_val, vs.groups,
                    hash_combine(static_cast<std::uint64_t>(seed), forest_cfg.seed, kSaltHpsVal));
                const std::vector<int> out_test = hps_apply(
                    policy, base_test, ts.groups,
                    hash_combine(static_cast<std::uint64_t>(seed), forest_cfg.seed, kSaltHpsTest));
                rec.validation = evaluate_predictions(vs.labels, out_val, vs.groups, spec);
                rec.test = evaluate_predictions(ts.labels, out_test, ts.groups, spec);
                break;
            }
        }
        out.mitigations.push_back(std::move(rec));
    }
    return out;
}

SeedRecord run_seed(const ExperimentConfig& cfg, const Table& real, const Table* external_synth,
                    bool source_has_duplicates, int seed) {
    const ProtectedSpec& spec = cfg.protected_pair;
    SeedRecord record;
    record.seed = seed;

    const SplitPair split = train_test_split(real, static_cast<std::uint64_t>(seed), cfg.split_ratio);
    check_no_test_leakage(split.train, split.test, source_has_duplicates);

    Table synth;
    if (cfg.synthetic_source == SyntheticSource::Surrogate) {
        const MarginalGenerator generator = fit_generator(split.train, cfg.synthetic_copula);
        synth = generator.generate(cfg.synthetic_size,
                                   hash_combine(static_cast<std::uint64_t>(seed), kSaltSynthGen));
    } else {
        synth = *external_synth;
    }

    record.prevalence_real = prevalence_rates(split.train, spec.attribute);
    record.prevalence_synthetic = prevalence_rates(synth, spec.attribute);
    record.nnaa = nn_adversarial_accuracy(
        subsample_rows(split.train, cfg.nnaa_max_rows,
                       hash_combine(static_cast<std::uint64_t>(seed), kSaltNnaaReal)),
        subsample_rows(synth, cfg.nnaa_max_rows,
                       hash_combine(static_cast<std::uint64_t>(seed), kSaltNnaaSynth)));

    const Table train_pair = restrict_subgroups(split.train, spec);
    const Table test_pair = restrict_subgroups(split.test, spec);
    const Table synth_pair = restrict_subgroups(synth, spec);

    // Validation carve-out of the restricted real training side; both arms
    // select thresholds/mitigations here and report on the real test split.
    const SplitPair carve = train_test_split(
        train_pair, hash_combine(static_cast<std::uint64_t>(seed), kSaltValidation),
        1.0 - cfg.validation_fraction);
    const Table& fit_real = carve.train;
    const Table& validation = carve.test;

    ArmOutput real_arm = run_arm("real", fit_real, validation, test_pair, cfg, seed);
    ArmOutput synth_arm = run_arm("synthetic", synth_pair, validation, test_pair, cfg, seed);

    record.baseline_real = std::move(real_arm.baseline);
    record.baseline_synthetic = std::move(synth_arm.baseline);
    record.mitigations = std::move(real_arm.mitigations);
    for (MitigationRecord& rec : synth_arm.mitigations) record.mitigations.push_back(std::move(rec));
    return record;
}

double metric_value(const Evaluation& eval, const std::string& metric) {
    if (metric == "balanced_accuracy") return eval.balanced_accuracy;
    if (metric == "equal_opportunity_difference") return eval.fairness.equal_opportunity_difference;
    if (metric == "average_odds_difference") return eval.fairness.average_odds_difference;
    if (metric == "equalized_odds") return eval.fairness.equalized_odds;
    throw Error("unknown metric: " + metric);
}

const std::vector<std::string>& metric_names() {
    static const std::vector<std::string> names{
        "balanced_accuracy", "equal_opportunity_difference", "average_odds_difference",
        "equalized_odds"};
    return names;
}

void fill_significance_row(SignificanceRow& row, const std::string& metric,
                           const std::vector<double>& a, const std::vector<double>& b) {
    std::optional<TTestResult> result;
    try {
        result = paired_t_test(a, b);
    } catch (const DataError& e) {
        row.errors[metric] = e.what();
    }
    if (metric == "balanced_accuracy") row.balanced_accuracy = result;
    else if (metric == "average_odds_difference") row.average_odds = result;
    else if (metric == "equal_opportunity_difference") row.equal_opportunity = result;
    else if (metric == "equalized_odds") row.equalized_odds = result;
}

} // namespace

void aggregate_report(AuditReport& report, const ExperimentConfig& config) {
    report.prevalence.clear();
    report.significance.clear();
    report.summaries.clear();
    if (report.records.empty()) return;

    std::sort(report.records.begin(), report.records.end(),
              [](const SeedRecord& a, const SeedRecord& b) { return a.seed < b.seed; });

    // Prevalence table over the union of observed groups.
    std::set<std::string> groups;
    for (const SeedRecord& r : report.records) {
        for (const auto& [g, _] : r.prevalence_real) groups.insert(g);
        for (const auto& [g, _] : r.prevalence_synthetic) groups.insert(g);
    }
    for (const std::string& group : groups) {
        PrevalenceRow row;
        row.group = group;
        const auto label_it = config.group_labels.find(group);
        row.label = label_it != config.group_labels.end() ? label_it->second : group;
        std::vector<double> real_values, synth_values;
        for (const SeedRecord& r : report.records) {
            const auto ri = r.prevalence_real.find(group);
            const auto si = r.prevalence_synthetic.find(group);
            real_values.push_back(ri != r.prevalence_real.end() ? ri->second : 0.0);
            synth_values.push_back(si != r.prevalence_synthetic.end() ? si->second : 0.0);
        }
        row.real_mean = summarize_values(real_values).mean;
        row.synthetic_mean = summarize_values(synth_values).mean;
        if (row.real_mean != 0.0) row.change_percent = percent_change(row.real_mean, row.synthetic_mean);
        try {
            row.t_test = paired_t_test(real_values, synth_values);
        } catch (const DataError& e) {
            row.t_test_error = e.what();
        }
        report.prevalence.push_back(std::move(row));
    }

    // Baseline comparison: synthetic arm vs real arm, per metric.
    {
        SignificanceRow row;
        row.comparison = "baseline (synthetic vs real)";
        for (const std::string& metric : metric_names()) {
            std::vector<double> synth_values, real_values;
            for (const SeedRecord& r : report.records) {
                synth_values.push_back(metric_value(r.baseline_synthetic.test, metric));
                real_values.push_back(metric_value(r.baseline_real.test, metric));
            }
            fill_significance_row(row, metric, synth_values, real_values);
        }
        report.significance.push_back(std::move(row));
    }

    // Each mitigation against its own arm's baseline.
    for (const std::string& arm : {std::string("real"), std::string("synthetic")}) {
        for (MitigationKind kind : config.mitigations) {
            SignificanceRow row;
            row.comparison = std::string(mitigation_name(kind)) + " (" + arm + ") vs baseline";
            bool found = false;
            for (const std::string& metric : metric_names()) {
                std::vector<double> mitigated, baseline;
                for (const SeedRecord& r : report.records) {
                    for (const MitigationRecord& m : r.mitigations) {
                        if (m.kind != kind || m.arm != arm) continue;
                        mitigated.push_back(metric_value(m.test, metric));
                        baseline.push_back(metric_value(
                            arm == "real" ? r.baseline_real.test : r.baseline_synthetic.test, metric));
                        found = true;
                    }
                }
                if (!mitigated.empty()) fill_significance_row(row, metric, mitigated, baseline);
            }
            if (found) report.significance.push_back(std::move(row));
        }
    }

    // Per-technique distribution summaries for box plots.
    auto summarize_technique = [&](const std::string& arm, const std::string& technique,
                                   auto&& values_for) {
        TechniqueSummary summary;
        summary.arm = arm;
        summary.technique = technique;
        for (const std::string& metric : metric_names()) {
            std::vector<double> values;
            for (const SeedRecord& r : report.records) values_for(r, metric, values);
            if (!values.empty()) summary.metrics[metric] = summarize_values(values);
        }
        if (!summary.metrics.empty()) report.summaries.push_back(std::move(summary));
    };
    for (const std::string& arm : {std::string("real"), std::string("synthetic")}) {
        summarize_technique(arm, "baseline",
                            [&](const SeedRecord& r, const std::string& metric, std::vector<double>& out) {
                                out.push_back(metric_value(
                                    arm == "real" ? r.baseline_real.test : r.baseline_synthetic.test,
                                    metric));
                            });
        for (MitigationKind kind : config.mitigations) {
            summarize_technique(arm, mitigation_name(kind),
                                [&](const SeedRecord& r, const std::string& metric, std::vector<double>& out) {
                                    for (const MitigationRecord& m : r.mitigations) {
                                        if (m.kind == kind && m.arm == arm) {
                                            out.push_back(metric_value(m.test, metric));
                                        }
                                    }
                                });
        }
    }
}

AuditReport run_experiment(const ExperimentConfig& config, const std::vector<int>& seed_subset) {
    config.validate();

    std::vector<int> seeds = seed_subset.empty() ? config.seeds : seed_subset;
    for (int s : seeds) {
        if (std::find(config.seeds.begin(), config.seeds.end(), s) == config.seeds.end()) {
            throw ConfigError("seed subset contains seed " + std::to_string(s) +
                              " which is not in the configured seeds");
        }
    }
    std::sort(seeds.begin(), seeds.end());

    Table real = apply_preset(load_csv(config.dataset_path, config.schema), config);
    real.validate();
    const bool source_has_duplicates = has_duplicate_rows(real);

    Table external_synth;
    if (config.synthetic_source == SyntheticSource::External) {
        external_synth = apply_preset(load_csv(config.synthetic_path, config.schema), config);
        if (external_synth.row_count() == 0) throw DataError("external synthetic table is empty");
        if (external_synth.row_count() < config.synthetic_size) {
            std::cerr << "note: external synthetic table has " << external_synth.row_count()
                      << " rows, below the configured generation budget of " << config.synthetic_size
                      << "\n";
        }
    }

    AuditReport report;
    report.config = config.to_json();
    report.config_fingerprint = config.fingerprint();
    report.seeds_run = seeds;

    for (int seed : seeds) {
        try {
            report.records.push_back(run_seed(
                config, real,
                config.synthetic_source == SyntheticSource::External ? &external_synth : nullptr,
                source_has_duplicates, seed));
        } catch (const Error&) {
            std::cerr << "seed " << seed << " failed; aborting the run\n";
            throw;
        }
    }

    std::vector<int> configured = config.seeds;
    std::sort(configured.begin(), configured.end());
    report.complete = configured == seeds;
    aggregate_report(report, config);
    return report;
}

AuditReport merge_reports(const std::vector<AuditReport>& parts, const ExperimentConfig& config) {
    if (parts.empty()) throw ConfigError("no reports to merge");
    AuditReport merged;
    merged.config = config.to_json();
    merged.config_fingerprint = config.fingerprint();
    std::set<int> seen;
    for (const AuditReport& part : parts) {
        if (part.config_fingerprint != merged.config_fingerprint) {
            throw ConfigError("report fingerprint mismatch: reports come from different configs");
        }
        for (const SeedRecord& record : part.records) {
            if (!seen.insert(record.seed).second) {
                throw ConfigError("duplicate seed " + std::to_string(record.seed) + " across reports");
            }
            merged.records.push_back(record);
        }
    }
    merged.seeds_run.assign(seen.begin(), seen.end());
    std::vector<int> configured = config.seeds;
    std::sort(configured.begin(), configured.end());
    merged.complete = configured == merged.seeds_run;
    aggregate_report(merged, config);
    return merged;
}

} // namespace fairaudit
