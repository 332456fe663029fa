#include "fairaudit/fairness.hpp"

#include <cmath>

namespace fairaudit {

namespace {

GroupRates rates_for(const std::string& group, std::span<const int> labels,
                     std::span<const int> preds, std::span<const std::string> groups) {
    GroupRates r;
    r.group = group;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (groups[i] != group) continue;
        if (labels[i] == 1) {
            preds[i] == 1 ? ++r.tp : ++r.fn;
        } else {
            preds[i] == 1 ? ++r.fp : ++r.tn;
        }
    }
    if (r.size() == 0) throw DataError("group '" + group + "' has no rows");
    if (r.tp + r.fn == 0) {
        throw DataError("undefined TPR: group '" + group + "' has no positive labels");
    }
    if (r.fp + r.tn == 0) {
        throw DataError("undefined FPR: group '" + group + "' has no negative labels");
    }
    r.tpr = static_cast<double>(r.tp) / static_cast<double>(r.tp + r.fn);
    r.fnr = static_cast<double>(r.fn) / static_cast<double>(r.tp + r.fn);
    r.fpr = static_cast<double>(r.fp) / static_cast<double>(r.fp + r.tn);
    r.tnr = static_cast<double>(r.tn) / static_cast<double>(r.fp + r.tn);
    return r;
}

} // namespace

std::pair<GroupRates, GroupRates> group_rates(std::span<const int> labels,
                                              std::span<const int> preds,
                                              std::span<const std::string> groups,
                                              const ProtectedSpec& spec) {
    if (labels.size() != preds.size() || labels.size() != groups.size()) {
        throw DataError("labels, predictions and groups differ in length");
    }
    return {rates_for(spec.group_a, labels, preds, groups),
            rates_for(spec.group_b, labels, preds, groups)};
}

FairnessScores fairness_metrics(const GroupRates& a, const GroupRates& b,
                                const ProtectedSpec& spec) {
    FairnessScores s;
    s.pair = spec;
    const double d_tpr = a.tpr - b.tpr;
    const double d_fpr = a.fpr - b.fpr;
    s.equal_opportunity_difference = d_tpr;
    s.average_odds_difference = (d_fpr + d_tpr) / 2.0;
    s.equalized_odds = std::max(std::fabs(d_fpr), std::fabs(d_tpr));
    return s;
}

const char* band_name(Band b) {
    switch (b) {
        case Band::Fair: return "fair";
        case Band::UnfairTowardGroupA: return "unfair_toward_group_a";
        case Band::UnfairTowardGroupB: return "unfair_toward_group_b";
    }
    return "fair";
}

FairnessBands fairness_band(const FairnessScores& scores) {
    auto classify_signed = [](double v) {
        if (v >= -0.1 && v <= 0.1) return Band::Fair;
        return v > 0.1 ? Band::UnfairTowardGroupA : Band::UnfairTowardGroupB;
    };
    FairnessBands bands;
    bands.equal_opportunity = classify_signed(scores.equal_opportunity_difference);
    bands.average_odds = classify_signed(scores.average_odds_difference);
    if (scores.equalized_odds <= 0.1) {
        bands.equalized_odds = Band::Fair;
    } else {
        // Direction taken from the larger signed gap. The FPR gap is
        // recoverable as 2 * avg_odds - eq_opp.
        const double d_tpr = scores.equal_opportunity_difference;
        const double d_fpr = 2.0 * scores.average_odds_difference - d_tpr;
        const double dominant = std::fabs(d_tpr) >= std::fabs(d_fpr) ? d_tpr : d_fpr;
        bands.equalized_odds = dominant > 0.0 ? Band::UnfairTowardGroupA : Band::UnfairTowardGroupB;
    }
    return bands;
}

} // namespace fairaudit
