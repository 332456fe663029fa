#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/dataset.hpp"
#include "fairaudit/fairness.hpp"
#include "fairaudit/forest.hpp"
#include "fairaudit/mitigation.hpp"
#include "fairaudit/stats.hpp"
#include "fairaudit/table.hpp"

namespace fairaudit {

enum class PreprocessPreset { Cardio, OneHotAll, None };
enum class SyntheticSource { Surrogate, External };
enum class MitigationKind { EoThreshold, Reweigh, Reduction, Hps };

const char* mitigation_name(MitigationKind kind);

struct ExperimentConfig {
    int config_version = 1;
    std::string dataset_path;
    TableSchema schema;
    PreprocessPreset preprocess = PreprocessPreset::None;
    CardioColumns cardio_columns;
    ProtectedSpec protected_pair;                  // attribute filled from schema
    std::map<std::string, std::string> group_labels;  // optional display names
    ForestConfig forest;
    std::vector<int> seeds;                        // default 1..10
    double split_ratio = 0.7;
    double validation_fraction = 0.25;             // carved from the training side
    SyntheticSource synthetic_source = SyntheticSource::Surrogate;
    std::string synthetic_path;                    // external source only
    std::size_t synthetic_size = 100000;
    bool synthetic_copula = true;
    std::vector<MitigationKind> mitigations;
    double accuracy_floor = kDefaultAccuracyFloor;
    std::vector<double> reduction_grid;            // default 11 points in [-1, 1]
    std::size_t nnaa_max_rows = 2000;
    std::string output_dir = "out";

    void validate() const;  // throws ConfigError
    nlohmann::json to_json() const;
    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig load(const std::string& path);
    std::string fingerprint() const;  // hash of the normalized config
};

// Metrics of one predictor on one evaluation set.
struct Evaluation {
    double balanced_accuracy = 0.0;
    FairnessScores fairness;
    FairnessBands bands;
    GroupRates rates_a;
    GroupRates rates_b;
};

struct BaselineResult {
    double threshold = 0.0;
    Evaluation test;
    Evaluation validation;
};

struct MitigationRecord {
    MitigationKind kind = MitigationKind::EoThreshold;
    std::string arm;  // "real" | "synthetic"
    std::optional<double> threshold;
    std::optional<double> selected_multiplier;  // reduction only
    std::optional<HpsPolicy> policy;            // hps only
    bool floor_unmet = false;
    Evaluation test;
    Evaluation validation;
};

struct SeedRecord {
    int seed = 0;
    std::map<std::string, double> prevalence_real;
    std::map<std::string, double> prevalence_synthetic;
    double nnaa = 0.0;
    BaselineResult baseline_real;
    BaselineResult baseline_synthetic;
    std::vector<MitigationRecord> mitigations;
};

struct PrevalenceRow {
    std::string group;
    std::string label;  // display name (falls back to the raw value)
    double real_mean = 0.0;
    double synthetic_mean = 0.0;
    std::optional<double> change_percent;  // absent when the real mean is zero
    std::optional<TTestResult> t_test;
    std::string t_test_error;  // set when the test is undefined
};

// Per-metric paired t-test p-values for one comparison, Table-style row.
struct SignificanceRow {
    std::string comparison;  // e.g. "reweigh (real) vs baseline"
    std::optional<TTestResult> balanced_accuracy;
    std::optional<TTestResult> average_odds;
    std::optional<TTestResult> equal_opportunity;
    std::optional<TTestResult> equalized_odds;
    std::map<std::string, std::string> errors;  // metric -> reason, when undefined
};

struct TechniqueSummary {
    std::string arm;
    std::string technique;  // "baseline" or a mitigation name
    std::map<std::string, Summary> metrics;  // metric name -> summary over seeds
};

struct AuditReport {
    int schema_version = 1;
    std::string config_fingerprint;
    nlohmann::json config;  // normalized echo of the experiment config
    std::vector<int> seeds_run;
    bool complete = false;  // all configured seeds present
    std::vector<SeedRecord> records;
    std::vector<PrevalenceRow> prevalence;
    std::vector<SignificanceRow> significance;
    std::vector<TechniqueSummary> summaries;

    nlohmann::json to_json() const;
    static AuditReport from_json(const nlohmann::json& j);
};

// Execute the full multi-seed protocol: per seed, split the real data,
// generate (or load) synthetic data from the training side only, restrict to
// the subgroup pair, train the real-data and synthetic-data models, select
// thresholds and mitigations on a validation carve-out of the training side,
// and evaluate everything on the held-out real test split. Aggregates and
// paired t-tests are recomputed from the per-seed records.
AuditReport run_experiment(const ExperimentConfig& config,
                           const std::vector<int>& seed_subset = {});

// Recompute prevalence/significance/summaries from the per-seed records.
void aggregate_report(AuditReport& report, const ExperimentConfig& config);

// Write report.json plus the CSV views (prevalence, significance, paired
// scatter, box-plot summaries, trade-off scatter) into `dir`. Partial reports
// write report.partial-<seeds>.json and no CSVs.
std::vector<std::string> emit_outputs(const AuditReport& report, const std::string& dir);

// Merge partial/complete reports (matching fingerprints, disjoint seeds) and
// re-aggregate under the given config.
AuditReport merge_reports(const std::vector<AuditReport>& parts, const ExperimentConfig& config);

} // namespace fairaudit
