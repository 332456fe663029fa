#include "fairaudit/mitigation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>

#include "fairaudit/rng.hpp"

namespace fairaudit {

EoThresholdResult eo_threshold_search(std::span<const double> scores,
                                      std::span<const int> labels,
                                      std::span<const std::string> groups,
                                      const ProtectedSpec& spec,
                                      double floor) {
    if (scores.size() != labels.size() || scores.size() != groups.size()) {
        throw DataError("scores, labels and groups differ in length");
    }

    bool have_admissible = false;
    EoThresholdResult best_admissible;
    bool have_any = false;
    EoThresholdResult best_accuracy;

    for (double threshold : threshold_grid()) {
        EoThresholdResult candidate;
        candidate.threshold = threshold;
        try {
            const std::vector<int> preds = apply_threshold(scores, threshold);
            candidate.balanced_accuracy = balanced_accuracy(labels, preds);
            const auto [ra, rb] = group_rates(labels, preds, groups, spec);
            candidate.fairness = fairness_metrics(ra, rb, spec);
        } catch (const DataError&) {
            continue;  // undefined rate at this threshold
        }

        if (!have_any || candidate.balanced_accuracy > best_accuracy.balanced_accuracy) {
            best_accuracy = candidate;
            have_any = true;
        }
        if (candidate.balanced_accuracy >= floor) {
            const bool better =
                !have_admissible ||
                candidate.fairness.equalized_odds < best_admissible.fairness.equalized_odds ||
                (candidate.fairness.equalized_odds == best_admissible.fairness.equalized_odds &&
                 candidate.balanced_accuracy > best_admissible.balanced_accuracy);
            if (better) {
                best_admissible = candidate;
                have_admissible = true;
            }
        }
    }

    if (have_admissible) return best_admissible;
    if (!have_any) throw DataError("every threshold yields an undefined group rate");
    best_accuracy.floor_unmet = true;
    return best_accuracy;
}

std::vector<double> reweigh(std::span<const int> labels, std::span<const std::string> groups) {
    if (labels.size() != groups.size()) throw DataError("labels and groups differ in length");
    if (labels.empty()) throw DataError("cannot reweigh an empty dataset");

    std::map<std::string, std::array<std::size_t, 2>> cells;  // group -> counts per label
    std::array<std::size_t, 2> label_counts{0, 0};
    for (std::size_t i = 0; i < labels.size(); ++i) {
        cells[groups[i]][static_cast<std::size_t>(labels[i])]++;
        label_counts[static_cast<std::size_t>(labels[i])]++;
    }
    if (cells.size() < 2) throw DataError("reweighing needs at least two groups");
    if (label_counts[0] == 0 || label_counts[1] == 0) {
        throw DataError("reweighing needs both label classes");
    }
    for (const auto& [group, counts] : cells) {
        if (counts[0] == 0 || counts[1] == 0) {
            throw DataError("empty (group, label) cell: group '" + group + "', label " +
                            (counts[0] == 0 ? std::string("0") : std::string("1")));
        }
    }

    const double n = static_cast<double>(labels.size());
    std::vector<double> weights(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto& counts = cells[groups[i]];
        const double n_group = static_cast<double>(counts[0] + counts[1]);
        const double n_label = static_cast<double>(label_counts[static_cast<std::size_t>(labels[i])]);
        const double n_cell = static_cast<double>(counts[static_cast<std::size_t>(labels[i])]);
        weights[i] = (n_group * n_label) / (n * n_cell);
    }
    return weights;
}

GridReductionResult grid_reduction(const WeightedTrainer& trainer,
                                   const Table& train,
                                   const Table& eval,
                                   const ProtectedSpec& spec,
                                   const std::vector<double>& grid,
                                   double floor) {
    if (grid.empty()) throw DataError("reduction grid must not be empty");

    const std::vector<int> train_labels = train.labels();
    const std::vector<std::string> train_groups = train.protected_values();
    const std::vector<int> eval_labels = eval.labels();
    const std::vector<std::string> eval_groups = eval.protected_values();
    const std::size_t label_col = train.column_index(train.label_column);

    GridReductionResult result;
    std::vector<TrainedForest> models(grid.size());
    bool any_success = false;

    for (std::size_t gi = 0; gi < grid.size(); ++gi) {
        const double multiplier = grid[gi];
        GridReductionPoint point;
        point.multiplier = multiplier;
        try {
            // Signed per-row cost c = 1 + multiplier * s, where s is +1 for
            // (group_a, y=1) rows, -1 for (group_b, y=1) rows, 0 otherwise.
            // Negative costs flip the training label and keep |c| as weight.
            std::vector<double> weights(train.row_count(), 1.0);
            Table retrain = train;
            Column& label_column = retrain.columns[label_col];
            for (std::size_t i = 0; i < train.row_count(); ++i) {
                double s = 0.0;
                if (train_labels[i] == 1) {
                    if (train_groups[i] == spec.group_a) s = 1.0;
                    else if (train_groups[i] == spec.group_b) s = -1.0;
                }
                const double cost = 1.0 + multiplier * s;
                if (cost < 0.0) {
                    label_column.values[i] = train_labels[i] == 1 ? 0.0 : 1.0;
                    weights[i] = -cost;
                } else {
                    weights[i] = cost;
                }
            }
            models[gi] = trainer(retrain, weights);
            const std::vector<double> scores = models[gi].predict_rows(eval);
            point.selection = eo_threshold_search(scores, eval_labels, eval_groups, spec, floor);
            any_success = true;
        } catch (const std::exception& e) {
            point.failed = true;
            point.failure = e.what();
        }
        result.points.push_back(point);
    }
    if (!any_success) throw DataError("every reduction grid point failed to train");

    // Minimize equalized odds subject to the accuracy floor; ties go to higher
    // accuracy, then grid order. Fallback: best equalized odds overall.
    auto pick = [&](bool require_floor) -> std::ptrdiff_t {
        std::ptrdiff_t best = -1;
        for (std::size_t gi = 0; gi < result.points.size(); ++gi) {
            const GridReductionPoint& p = result.points[gi];
            if (p.failed) continue;
            if (require_floor && p.selection.floor_unmet) continue;
            if (best < 0) {
                best = static_cast<std::ptrdiff_t>(gi);
                continue;
            }
            const GridReductionPoint& b = result.points[static_cast<std::size_t>(best)];
            if (p.selection.fairness.equalized_odds < b.selection.fairness.equalized_odds ||
                (p.selection.fairness.equalized_odds == b.selection.fairness.equalized_odds &&
                 p.selection.balanced_accuracy > b.selection.balanced_accuracy)) {
                best = static_cast<std::ptrdiff_t>(gi);
            }
        }
        return best;
    };

    std::ptrdiff_t chosen = pick(true);
    if (chosen < 0) {
        chosen = pick(false);
        result.floor_unmet = true;
    }
    const auto ci = static_cast<std::size_t>(chosen);
    result.selected_multiplier = result.points[ci].multiplier;
    result.selection = result.points[ci].selection;
    result.model = std::move(models[ci]);
    return result;
}

namespace {

struct BaseRates {
    double tb_a, fb_a, tb_b, fb_b;      // base predictor TPR/FPR per group
    double pi_a1, pi_a0, pi_b1, pi_b0;  // (group, label) cell fractions
};

struct Candidate {
    std::array<double, 4> v;  // p2p_a, n2p_a, p2p_b, n2p_b
};

double derived_tpr(const std::array<double, 4>& v, const BaseRates& r, bool group_a) {
    return group_a ? v[0] * r.tb_a + v[1] * (1.0 - r.tb_a)
                   : v[2] * r.tb_b + v[3] * (1.0 - r.tb_b);
}

double derived_fpr(const std::array<double, 4>& v, const BaseRates& r, bool group_a) {
    return group_a ? v[0] * r.fb_a + v[1] * (1.0 - r.fb_a)
                   : v[2] * r.fb_b + v[3] * (1.0 - r.fb_b);
}

double expected_loss(const std::array<double, 4>& v, const BaseRates& r) {
    return r.pi_a1 * (1.0 - derived_tpr(v, r, true)) + r.pi_a0 * derived_fpr(v, r, true) +
           r.pi_b1 * (1.0 - derived_tpr(v, r, false)) + r.pi_b0 * derived_fpr(v, r, false);
}

} // namespace

std::pair<double, double> hps_policy_rates(const HpsPolicy::GroupPolicy& gp,
                                           double base_tpr, double base_fpr) {
    return {gp.p_keep_positive * base_tpr + gp.p_flip_negative * (1.0 - base_tpr),
            gp.p_keep_positive * base_fpr + gp.p_flip_negative * (1.0 - base_fpr)};
}

HpsPolicy hps_fit(std::span<const int> base_preds,
                  std::span<const int> labels,
                  std::span<const std::string> groups,
                  const ProtectedSpec& spec) {
    const auto [ra, rb] = group_rates(labels, base_preds, groups, spec);
    BaseRates rates{};
    rates.tb_a = ra.tpr;
    rates.fb_a = ra.fpr;
    rates.tb_b = rb.tpr;
    rates.fb_b = rb.fpr;
    const double n = static_cast<double>(ra.size() + rb.size());
    rates.pi_a1 = static_cast<double>(ra.tp + ra.fn) / n;
    rates.pi_a0 = static_cast<double>(ra.fp + ra.tn) / n;
    rates.pi_b1 = static_cast<double>(rb.tp + rb.fn) / n;
    rates.pi_b0 = static_cast<double>(rb.fp + rb.tn) / n;

    // Equality constraint coefficients over (p2p_a, n2p_a, p2p_b, n2p_b):
    // equal TPR and equal FPR between the derived predictors of both groups.
    const std::array<double, 4> c_tpr{rates.tb_a, 1.0 - rates.tb_a, -rates.tb_b, -(1.0 - rates.tb_b)};
    const std::array<double, 4> c_fpr{rates.fb_a, 1.0 - rates.fb_a, -rates.fb_b, -(1.0 - rates.fb_b)};

    constexpr double kBoxTolerance = 1e-11;
    constexpr double kResidualTolerance = 1e-9;

    std::vector<Candidate> candidates;

    // Hypercube corners (always includes the feasible constant predictors).
    for (int mask = 0; mask < 16; ++mask) {
        Candidate c;
        for (int k = 0; k < 4; ++k) c.v[static_cast<std::size_t>(k)] = (mask >> k) & 1 ? 1.0 : 0.0;
        candidates.push_back(c);
    }
    // Polytope vertices with two variables pinned at a bound: solve the two
    // equalities for the remaining pair.
    for (int i = 0; i < 4; ++i) {
        for (int j = i + 1; j < 4; ++j) {
            int k = -1, l = -1;
            for (int m = 0; m < 4; ++m) {
                if (m == i || m == j) continue;
                (k < 0 ? k : l) = m;
            }
            for (int corner = 0; corner < 4; ++corner) {
                const double vi = corner & 1 ? 1.0 : 0.0;
                const double vj = corner & 2 ? 1.0 : 0.0;
                const double r1 = -(c_tpr[static_cast<std::size_t>(i)] * vi + c_tpr[static_cast<std::size_t>(j)] * vj);
                const double r2 = -(c_fpr[static_cast<std::size_t>(i)] * vi + c_fpr[static_cast<std::size_t>(j)] * vj);
                const double a11 = c_tpr[static_cast<std::size_t>(k)], a12 = c_tpr[static_cast<std::size_t>(l)];
                const double a21 = c_fpr[static_cast<std::size_t>(k)], a22 = c_fpr[static_cast<std::size_t>(l)];
                const double det = a11 * a22 - a12 * a21;
                if (std::fabs(det) < 1e-12) continue;
                Candidate c;
                c.v[static_cast<std::size_t>(i)] = vi;
                c.v[static_cast<std::size_t>(j)] = vj;
                c.v[static_cast<std::size_t>(k)] = (r1 * a22 - a12 * r2) / det;
                c.v[static_cast<std::size_t>(l)] = (a11 * r2 - r1 * a21) / det;
                candidates.push_back(c);
            }
        }
    }

    bool found = false;
    std::array<double, 4> best{1.0, 0.0, 1.0, 0.0};
    double best_loss = 0.0;
    std::array<double, 4> best_key{};
    auto tie_key = [](const std::array<double, 4>& v) {
        // Identity-first preference among equal-loss vertices.
        return std::array<double, 4>{1.0 - v[0], v[1], 1.0 - v[2], v[3]};
    };

    for (Candidate& c : candidates) {
        bool in_box = true;
        for (double& value : c.v) {
            if (value < -kBoxTolerance || value > 1.0 + kBoxTolerance) {
                in_box = false;
                break;
            }
            value = std::clamp(value, 0.0, 1.0);
        }
        if (!in_box) continue;
        double res_tpr = 0.0, res_fpr = 0.0;
        for (int m = 0; m < 4; ++m) {
            res_tpr += c_tpr[static_cast<std::size_t>(m)] * c.v[static_cast<std::size_t>(m)];
            res_fpr += c_fpr[static_cast<std::size_t>(m)] * c.v[static_cast<std::size_t>(m)];
        }
        if (std::fabs(res_tpr) > kResidualTolerance || std::fabs(res_fpr) > kResidualTolerance) continue;

        const double loss = expected_loss(c.v, rates);
        const auto key = tie_key(c.v);
        if (!found || loss < best_loss - 1e-12 ||
            (std::fabs(loss - best_loss) <= 1e-12 && key < best_key)) {
            found = true;
            best = c.v;
            best_loss = loss;
            best_key = key;
        }
    }
    if (!found) throw DataError("relabeling program has no feasible vertex");  // unreachable: constants qualify

    HpsPolicy policy;
    policy.group_a = {spec.group_a, best[0], best[1]};
    policy.group_b = {spec.group_b, best[2], best[3]};
    const auto [tpr_a, fpr_a] = hps_policy_rates(policy.group_a, rates.tb_a, rates.fb_a);
    const auto [tpr_b, fpr_b] = hps_policy_rates(policy.group_b, rates.tb_b, rates.fb_b);
    policy.fit_gap_tpr = tpr_a - tpr_b;
    policy.fit_gap_fpr = fpr_a - fpr_b;
    policy.expected_loss = best_loss;
    return policy;
}

std::vector<int> hps_apply(const HpsPolicy& policy,
                           std::span<const int> base_preds,
                           std::span<const std::string> groups,
                           std::uint64_t seed) {
    if (base_preds.size() != groups.size()) throw DataError("predictions and groups differ in length");
    std::vector<int> out(base_preds.size());
    for (std::size_t i = 0; i < base_preds.size(); ++i) {
        const HpsPolicy::GroupPolicy* gp = nullptr;
        if (groups[i] == policy.group_a.group) gp = &policy.group_a;
        else if (groups[i] == policy.group_b.group) gp = &policy.group_b;
        else throw DataError("unknown group value '" + groups[i] + "' for relabeling policy");
        const double p = base_preds[i] == 1 ? gp->p_keep_positive : gp->p_flip_negative;
        SplitMix64 rng(hash_combine(seed, i));
        out[i] = rng.next_double() < p ? 1 : 0;
    }
    return out;
}

} // namespace fairaudit
