#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "fairaudit/fairness.hpp"
#include "fairaudit/forest.hpp"
#include "fairaudit/table.hpp"

namespace fairaudit {

constexpr double kDefaultAccuracyFloor = 0.58;

struct EoThresholdResult {
    double threshold = 0.0;
    double balanced_accuracy = 0.0;
    FairnessScores fairness;
    bool floor_unmet = false;  // no grid threshold reached the accuracy floor
};

// Among grid thresholds with balanced accuracy >= floor, pick the one with the
// lowest equalized odds; ties resolve to higher accuracy, then the smaller
// threshold. When no threshold meets the floor, the best-accuracy threshold is
// returned with floor_unmet set.
EoThresholdResult eo_threshold_search(std::span<const double> scores,
                                      std::span<const int> labels,
                                      std::span<const std::string> groups,
                                      const ProtectedSpec& spec,
                                      double floor = kDefaultAccuracyFloor);

// Instance weights w(g,y) = (n_g * n_y) / (n * n_{g,y}) that make group and
// label independent under the weighted distribution. Errors on an empty
// (group, label) cell.
std::vector<double> reweigh(std::span<const int> labels, std::span<const std::string> groups);

using WeightedTrainer = std::function<TrainedForest(const Table& train, const std::vector<double>& weights)>;

struct GridReductionPoint {
    double multiplier = 0.0;
    EoThresholdResult selection;
    bool failed = false;
    std::string failure;
};

struct GridReductionResult {
    double selected_multiplier = 0.0;
    TrainedForest model;
    EoThresholdResult selection;  // threshold chosen for the selected model
    bool floor_unmet = false;     // no grid point met the floor
    std::vector<GridReductionPoint> points;
};

// Cost-sensitive retraining sweep. For each multiplier m, row costs are
//   c_i = 1 + m * s_i,  s_i = +1 for (group_a, y=1), -1 for (group_b, y=1), 0 otherwise;
// rows with c_i < 0 train with the flipped label and weight |c_i|, all others
// with label y_i and weight c_i. Each retrained model is threshold-selected on
// `eval` via eo_threshold_search; the model minimizing equalized odds subject
// to the accuracy floor wins (fallback: best equalized odds overall, flagged).
GridReductionResult grid_reduction(const WeightedTrainer& trainer,
                                   const Table& train,
                                   const Table& eval,
                                   const ProtectedSpec& spec,
                                   const std::vector<double>& grid,
                                   double floor = kDefaultAccuracyFloor);

// Group-conditional randomized relabeling of a base binary predictor.
struct HpsPolicy {
    struct GroupPolicy {
        std::string group;
        double p_keep_positive = 1.0;  // P(output 1 | base prediction 1)
        double p_flip_negative = 0.0;  // P(output 1 | base prediction 0)
    };
    GroupPolicy group_a;
    GroupPolicy group_b;
    double fit_gap_tpr = 0.0;  // achieved TPR_a - TPR_b on fitting data
    double fit_gap_fpr = 0.0;
    double expected_loss = 0.0;  // expected misclassification on fitting data
};

// Fit the four relabeling probabilities by exact vertex enumeration of the
// linear program: minimize expected misclassification subject to equal TPR and
// FPR across groups. Constant predictors are always feasible.
HpsPolicy hps_fit(std::span<const int> base_preds,
                  std::span<const int> labels,
                  std::span<const std::string> groups,
                  const ProtectedSpec& spec);

// Apply the policy with per-row randomization seeded as hash(seed, row_index).
std::vector<int> hps_apply(const HpsPolicy& policy,
                           std::span<const int> base_preds,
                           std::span<const std::string> groups,
                           std::uint64_t seed);

// Derived-predictor rates implied by the policy for one group, given the base
// predictor's (TPR, FPR) for that group.
std::pair<double, double> hps_policy_rates(const HpsPolicy::GroupPolicy& gp,
                                           double base_tpr, double base_fpr);

} // namespace fairaudit
