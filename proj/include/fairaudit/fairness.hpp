#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "fairaudit/table.hpp"

namespace fairaudit {

// Confusion counts and derived rates for one subgroup.
struct GroupRates {
    std::string group;
    long tp = 0, fp = 0, tn = 0, fn = 0;
    double tpr = 0.0, fpr = 0.0, tnr = 0.0, fnr = 0.0;

    long size() const { return tp + fp + tn + fn; }
};

struct FairnessScores {
    double equal_opportunity_difference = 0.0;  // TPR_a - TPR_b
    double average_odds_difference = 0.0;       // ((FPR_a - FPR_b) + (TPR_a - TPR_b)) / 2
    double equalized_odds = 0.0;                // max(|FPR_a - FPR_b|, |TPR_a - TPR_b|)
    ProtectedSpec pair;
};

// Exact integer confusion counts per group. Each group must contain at least
// one positive and one negative label, otherwise a rate is undefined and a
// DataError names the group and the missing class.
std::pair<GroupRates, GroupRates> group_rates(std::span<const int> labels,
                                              std::span<const int> preds,
                                              std::span<const std::string> groups,
                                              const ProtectedSpec& spec);

FairnessScores fairness_metrics(const GroupRates& a, const GroupRates& b,
                                const ProtectedSpec& spec = {});

enum class Band { Fair, UnfairTowardGroupA, UnfairTowardGroupB };

struct FairnessBands {
    Band equal_opportunity = Band::Fair;
    Band average_odds = Band::Fair;
    Band equalized_odds = Band::Fair;
};

const char* band_name(Band b);

// Difference metrics are fair within [-0.1, 0.1] (inclusive); a value above
// the band leans toward group_a, below toward group_b. Equalized odds is fair
// iff <= 0.1; outside, its direction comes from the larger signed gap.
FairnessBands fairness_band(const FairnessScores& scores);

} // namespace fairaudit
