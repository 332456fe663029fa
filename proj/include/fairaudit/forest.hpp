#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairaudit/table.hpp"

namespace fairaudit {

struct ForestConfig {
    int n_trees = 100;
    int max_depth = 0;     // 0 = unlimited
    int max_features = 0;  // 0 = floor(sqrt(feature count)), at least 1
    int min_leaf = 1;
    bool bootstrap = true;
    std::uint64_t seed = 0;
};

// Maps table columns onto a flat numeric feature vector: numeric columns pass
// through, categorical columns become one indicator per training-observed
// level (levels sorted). The label column is excluded. Unseen levels at
// prediction time encode as all-zero indicators.
struct FeatureEncoder {
    struct Block {
        std::string column;
        ColumnKind kind = ColumnKind::Numeric;
        std::vector<std::string> levels;  // sorted, categorical only
    };
    std::vector<Block> blocks;
    std::vector<std::string> feature_names;

    static FeatureEncoder fit(const Table& train);
    std::size_t feature_count() const { return feature_names.size(); }
    // Row-major n_rows x feature_count matrix. Throws DataError on missing
    // columns or kind mismatch.
    std::vector<double> encode(const Table& t) const;
};

struct TreeNode {
    std::int32_t feature = -1;  // -1 marks a leaf
    double threshold = 0.0;     // left: x < threshold, right: x >= threshold
    std::int32_t left = -1;
    std::int32_t right = -1;
    double positive_fraction = 0.0;  // weighted positive share at the node
};

struct DecisionTree {
    std::vector<TreeNode> nodes;
    double predict(std::span<const double> features) const;
};

// Bagged ensemble of Gini-impurity decision trees with per-tree seeds derived
// as hash(config.seed, tree_index), so serial and parallel training agree.
class TrainedForest {
public:
    TrainedForest() = default;
    TrainedForest(ForestConfig config, FeatureEncoder encoder, std::vector<DecisionTree> trees)
        : config_(config), encoder_(std::move(encoder)), trees_(std::move(trees)) {}

    const ForestConfig& config() const { return config_; }
    const FeatureEncoder& encoder() const { return encoder_; }
    const std::vector<DecisionTree>& trees() const { return trees_; }

    std::vector<double> predict_rows(const Table& rows) const;

    nlohmann::json to_json() const;
    static TrainedForest from_json(const nlohmann::json& j);

private:
    ForestConfig config_;
    FeatureEncoder encoder_;
    std::vector<DecisionTree> trees_;
};

// Fit a forest on `train`. Optional per-row nonnegative weights drive both the
// bootstrap sampling distribution and the split impurity. Training data is
// canonically sorted before sampling, so row order does not affect the model.
TrainedForest train_forest(const ForestConfig& config, const Table& train,
                           const std::vector<double>& weights = {});

// Mean over trees of the leaf positive-class fraction, one score per row.
std::vector<double> predict_scores(const TrainedForest& model, const Table& rows);

// (TPR + TNR) / 2. Errors when either class is absent from `labels`.
double balanced_accuracy(std::span<const int> labels, std::span<const int> preds);

struct ThresholdResult {
    double threshold = 0.0;
    double balanced_accuracy = 0.0;
};

// The fixed decision-threshold grid 0.01, 0.02, ..., 0.50.
std::vector<double> threshold_grid();

// Predictions at a threshold: positive iff score >= threshold.
std::vector<int> apply_threshold(std::span<const double> scores, double threshold);

// Grid threshold maximizing balanced accuracy; ties go to the smallest value.
ThresholdResult threshold_sweep(std::span<const double> scores, std::span<const int> labels);

} // namespace fairaudit
