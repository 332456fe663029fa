#include "fairaudit/forest.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <thread>

#include "fairaudit/rng.hpp"

namespace fairaudit {

FeatureEncoder FeatureEncoder::fit(const Table& train) {
    FeatureEncoder enc;
    for (const Column& col : train.columns) {
        if (col.name == train.label_column) continue;
        Block b;
        b.column = col.name;
        b.kind = col.kind;
        if (col.kind == ColumnKind::Numeric) {
            enc.feature_names.push_back(col.name);
        } else {
            b.levels = col.levels;
            std::sort(b.levels.begin(), b.levels.end());
            for (const std::string& level : b.levels) {
                enc.feature_names.push_back(col.name + "=" + level);
            }
        }
        enc.blocks.push_back(std::move(b));
    }
    if (enc.feature_names.empty()) throw DataError("no feature columns to train on");
    return enc;
}

std::vector<double> FeatureEncoder::encode(const Table& t) const {
    const std::size_t n = t.row_count();
    const std::size_t f = feature_count();
    std::vector<double> x(n * f, 0.0);
    std::size_t offset = 0;
    for (const Block& b : blocks) {
        const Column& col = t.column(b.column);
        if (col.kind != b.kind) {
            throw DataError("column '" + b.column + "' kind differs from the training schema");
        }
        if (b.kind == ColumnKind::Numeric) {
            for (std::size_t r = 0; r < n; ++r) x[r * f + offset] = col.values[r];
            offset += 1;
        } else {
            // level code in t -> position in the sorted training levels (or none)
            std::vector<std::ptrdiff_t> remap(col.levels.size(), -1);
            for (std::size_t c = 0; c < col.levels.size(); ++c) {
                const auto it = std::lower_bound(b.levels.begin(), b.levels.end(), col.levels[c]);
                if (it != b.levels.end() && *it == col.levels[c]) remap[c] = it - b.levels.begin();
            }
            for (std::size_t r = 0; r < n; ++r) {
                const std::ptrdiff_t pos = remap[static_cast<std::size_t>(col.codes[r])];
                if (pos >= 0) x[r * f + offset + static_cast<std::size_t>(pos)] = 1.0;
            }
            offset += b.levels.size();
        }
    }
    return x;
}

double DecisionTree::predict(std::span<const double> features) const {
    std::int32_t i = 0;
    for (;;) {
        const TreeNode& node = nodes[static_cast<std::size_t>(i)];
        if (node.feature < 0) return node.positive_fraction;
        i = features[static_cast<std::size_t>(node.feature)] < node.threshold ? node.left : node.right;
    }
}

namespace {

struct TreeBuilder {
    const std::vector<double>& x;  // canonical-order row-major matrix
    const std::vector<int>& y;
    std::size_t n_features;
    int max_depth;
    std::size_t max_features;
    std::size_t min_leaf;
    SplitMix64& rng;

    std::vector<std::uint32_t> rows;  // sample entries (bootstrap may repeat rows)
    std::vector<double> weights;      // parallel entry weights
    std::vector<TreeNode> nodes;

    std::vector<std::uint32_t> feature_pool;
    std::vector<std::uint32_t> scratch_rows;
    std::vector<double> scratch_weights;

    struct Triple {
        double value;
        std::uint32_t row;
        double weight;
        int label;
    };
    std::vector<Triple> triples;

    double feature_at(std::uint32_t row, std::size_t f) const { return x[row * n_features + f]; }

    struct Frame {
        std::size_t begin;
        std::size_t end;
        int depth;
        std::int32_t parent;  // -1 for the root
        bool is_left;
    };

    // Depth-first preorder construction with an explicit stack; matches the
    // recursive formulation but is safe for very deep trees.
    void build_tree() {
        std::vector<Frame> stack;
        stack.push_back({0, rows.size(), 0, -1, false});
        while (!stack.empty()) {
            const Frame frame = stack.back();
            stack.pop_back();
            const std::int32_t node_id = grow_node(frame, stack);
            if (frame.parent >= 0) {
                TreeNode& parent = nodes[static_cast<std::size_t>(frame.parent)];
                (frame.is_left ? parent.left : parent.right) = node_id;
            }
        }
    }

    std::int32_t grow_node(const Frame& frame, std::vector<Frame>& stack) {
        const std::size_t begin = frame.begin;
        const std::size_t end = frame.end;
        const int depth = frame.depth;
        const std::size_t count = end - begin;
        double w_total = 0.0, w_pos = 0.0;
        for (std::size_t i = begin; i < end; ++i) {
            w_total += weights[i];
            w_pos += weights[i] * y[rows[i]];
        }
        const auto node_id = static_cast<std::int32_t>(nodes.size());
        nodes.emplace_back();
        nodes[static_cast<std::size_t>(node_id)].positive_fraction = w_total > 0.0 ? w_pos / w_total : 0.0;

        const bool pure = (w_pos == 0.0) || (w_pos == w_total);
        const bool depth_capped = max_depth > 0 && depth >= max_depth;
        if (pure || depth_capped || count < 2 * min_leaf || w_total <= 0.0) return node_id;

        // Examine a random subset of features, in sampled order.
        feature_pool.resize(n_features);
        std::iota(feature_pool.begin(), feature_pool.end(), 0u);
        const std::size_t m = std::min(max_features, n_features);
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng.next_below(n_features - i));
            std::swap(feature_pool[i], feature_pool[j]);
        }

        const double parent_gini = gini(w_pos, w_total);
        double best_gain = 1e-12;
        std::size_t best_feature = 0;
        double best_threshold = 0.0;
        bool found = false;

        for (std::size_t fi = 0; fi < m; ++fi) {
            const std::size_t f = feature_pool[fi];
            triples.clear();
            triples.reserve(count);
            for (std::size_t i = begin; i < end; ++i) {
                triples.push_back({feature_at(rows[i], f), rows[i], weights[i], y[rows[i]]});
            }
            std::sort(triples.begin(), triples.end(), [](const Triple& a, const Triple& b) {
                return a.value != b.value ? a.value < b.value : a.row < b.row;
            });
            if (triples.front().value == triples.back().value) continue;

            double wl = 0.0, wl_pos = 0.0;
            std::size_t cl = 0;
            std::size_t i = 0;
            while (i < count) {
                // consume one run of equal values
                const double v = triples[i].value;
                while (i < count && triples[i].value == v) {
                    wl += triples[i].weight;
                    wl_pos += triples[i].weight * triples[i].label;
                    ++cl;
                    ++i;
                }
                if (i == count) break;
                if (cl < min_leaf || count - cl < min_leaf) continue;
                const double mid = (v + triples[i].value) / 2.0;
                if (!(mid > v) || !(mid <= triples[i].value)) continue;  // adjacent doubles
                const double wr = w_total - wl;
                const double wr_pos = w_pos - wl_pos;
                const double gain = parent_gini -
                                    (wl / w_total) * gini(wl_pos, wl) -
                                    (wr / w_total) * gini(wr_pos, wr);
                if (gain > best_gain) {
                    best_gain = gain;
                    best_feature = f;
                    best_threshold = mid;
                    found = true;
                }
            }
        }
        if (!found) return node_id;

        // Stable partition of [begin, end) on the chosen split.
        scratch_rows.clear();
        scratch_weights.clear();
        std::size_t left_end = begin;
        for (std::size_t i = begin; i < end; ++i) {
            if (feature_at(rows[i], best_feature) < best_threshold) {
                rows[left_end] = rows[i];
                weights[left_end] = weights[i];
                ++left_end;
            } else {
                scratch_rows.push_back(rows[i]);
                scratch_weights.push_back(weights[i]);
            }
        }
        std::copy(scratch_rows.begin(), scratch_rows.end(), rows.begin() + static_cast<std::ptrdiff_t>(left_end));
        std::copy(scratch_weights.begin(), scratch_weights.end(),
                  weights.begin() + static_cast<std::ptrdiff_t>(left_end));
        if (left_end == begin || left_end == end) {  // all samples on one side; keep the leaf
            return node_id;
        }

        nodes[static_cast<std::size_t>(node_id)].feature = static_cast<std::int32_t>(best_feature);
        nodes[static_cast<std::size_t>(node_id)].threshold = best_threshold;
        // Right pushed first so the left child is processed next (preorder).
        stack.push_back({left_end, end, depth + 1, node_id, false});
        stack.push_back({begin, left_end, depth + 1, node_id, true});
        return node_id;
    }

    static double gini(double w_pos, double w_total) {
        if (w_total <= 0.0) return 0.0;
        const double p = w_pos / w_total;
        return 2.0 * p * (1.0 - p);
    }
};

} // namespace

TrainedForest train_forest(const ForestConfig& config, const Table& train,
                           const std::vector<double>& weights) {
    if (config.n_trees < 1) throw DataError("forest needs at least one tree");
    if (config.min_leaf < 1) throw DataError("min_leaf must be at least 1");
    if (train.row_count() == 0) throw DataError("cannot train on an empty table");

    FeatureEncoder encoder = FeatureEncoder::fit(train);
    const std::size_t n = train.row_count();
    const std::size_t f = encoder.feature_count();
    if (config.max_features > 0 && static_cast<std::size_t>(config.max_features) > f) {
        throw DataError("max_features " + std::to_string(config.max_features) + " exceeds feature count " +
                        std::to_string(f));
    }
    const std::size_t max_features =
        config.max_features > 0
            ? static_cast<std::size_t>(config.max_features)
            : std::max<std::size_t>(1, static_cast<std::size_t>(std::floor(std::sqrt(static_cast<double>(f)))));

    const std::vector<double> x = encoder.encode(train);
    const std::vector<int> y = train.labels();
    if (std::find(y.begin(), y.end(), 1) == y.end() || std::find(y.begin(), y.end(), 0) == y.end()) {
        throw DataError("training data contains a single label class");
    }

    std::vector<double> w = weights;
    if (w.empty()) {
        w.assign(n, 1.0);
    } else if (w.size() != n) {
        throw DataError("weight vector length does not match row count");
    }
    double w_sum = 0.0;
    for (double wi : w) {
        if (!(wi >= 0.0) || !std::isfinite(wi)) throw DataError("weights must be finite and nonnegative");
        w_sum += wi;
    }
    if (w_sum <= 0.0) throw DataError("weights must not all be zero");

    // Canonical row order: lexicographic over features, then label, then
    // weight. Sampling over this order makes the model independent of the
    // caller's row order.
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
        const double* ra = x.data() + static_cast<std::size_t>(a) * f;
        const double* rb = x.data() + static_cast<std::size_t>(b) * f;
        for (std::size_t c = 0; c < f; ++c) {
            if (ra[c] != rb[c]) return ra[c] < rb[c];
        }
        if (y[a] != y[b]) return y[a] < y[b];
        return w[a] < w[b];
    });
    std::vector<double> xc(n * f);
    std::vector<int> yc(n);
    std::vector<double> wc(n);
    for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(x.data() + static_cast<std::size_t>(order[i]) * f, f, xc.data() + i * f);
        yc[i] = y[order[i]];
        wc[i] = w[order[i]];
    }

    // Cumulative weights for proportional bootstrap draws.
    std::vector<double> prefix(n + 1, 0.0);
    for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + wc[i];
    const double total_weight = prefix[n];

    std::vector<DecisionTree> trees(static_cast<std::size_t>(config.n_trees));
    std::atomic<std::size_t> next_tree{0};
    std::mutex error_mutex;
    std::exception_ptr first_error;

    auto worker = [&] {
        for (;;) {
            const std::size_t t = next_tree.fetch_add(1);
            if (t >= trees.size()) return;
            try {
                SplitMix64 rng(hash_combine(config.seed, t));
                std::vector<std::uint32_t> rows;
                std::vector<double> entry_weights;
                rows.reserve(n);
                entry_weights.reserve(n);
                if (config.bootstrap) {
                    // n draws with probability proportional to instance weight;
                    // each draw enters the tree with unit weight.
                    for (std::size_t i = 0; i < n; ++i) {
                        const double target = rng.next_double() * total_weight;
                        auto it = std::upper_bound(prefix.begin(), prefix.end(), target);
                        std::size_t idx = static_cast<std::size_t>(it - prefix.begin());
                        idx = idx > 0 ? idx - 1 : 0;
                        if (idx >= n) idx = n - 1;
                        rows.push_back(static_cast<std::uint32_t>(idx));
                        entry_weights.push_back(1.0);
                    }
                } else {
                    for (std::size_t i = 0; i < n; ++i) {
                        rows.push_back(static_cast<std::uint32_t>(i));
                        entry_weights.push_back(wc[i]);
                    }
                }
                TreeBuilder builder{xc, yc, f, config.max_depth, max_features,
                                    static_cast<std::size_t>(config.min_leaf), rng,
                                    std::move(rows), std::move(entry_weights), {}, {}, {}, {}, {}};
                builder.build_tree();
                trees[t].nodes = std::move(builder.nodes);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mutex);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t n_workers = std::min<std::size_t>(hw, trees.size());
    if (n_workers <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_workers);
        for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    return TrainedForest(config, std::move(encoder), std::move(trees));
}

std::vector<double> TrainedForest::predict_rows(const Table& rows) const {
    const std::vector<double> x = encoder_.encode(rows);
    const std::size_t n = rows.row_count();
    const std::size_t f = encoder_.feature_count();
    std::vector<double> scores(n, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const std::span<const double> features(x.data() + r * f, f);
        double sum = 0.0;
        for (const DecisionTree& tree : trees_) sum += tree.predict(features);
        scores[r] = sum / static_cast<double>(trees_.size());
    }
    return scores;
}

std::vector<double> predict_scores(const TrainedForest& model, const Table& rows) {
    return model.predict_rows(rows);
}

nlohmann::json TrainedForest::to_json() const {
    nlohmann::json j;
    j["format_version"] = 1;
    j["config"] = {{"n_trees", config_.n_trees},     {"max_depth", config_.max_depth},
                   {"max_features", config_.max_features}, {"min_leaf", config_.min_leaf},
                   {"bootstrap", config_.bootstrap}, {"seed", config_.seed}};
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : encoder_.blocks) {
        blocks.push_back({{"column", b.column},
                          {"kind", b.kind == ColumnKind::Numeric ? "numeric" : "categorical"},
                          {"levels", b.levels}});
    }
    j["encoder"] = {{"blocks", blocks}, {"feature_names", encoder_.feature_names}};
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& tree : trees_) {
        nlohmann::json nodes = nlohmann::json::array();
        for (const TreeNode& node : tree.nodes) {
            nodes.push_back({{"f", node.feature},
                             {"t", node.threshold},
                             {"l", node.left},
                             {"r", node.right},
                             {"p", node.positive_fraction}});
        }
        trees.push_back({{"nodes", nodes}});
    }
    j["trees"] = std::move(trees);
    return j;
}

TrainedForest TrainedForest::from_json(const nlohmann::json& j) {
    if (j.value("format_version", 0) != 1) throw DataError("unsupported model format version");
    ForestConfig config;
    const auto& jc = j.at("config");
    config.n_trees = jc.at("n_trees").get<int>();
    config.max_depth = jc.at("max_depth").get<int>();
    config.max_features = jc.at("max_features").get<int>();
    config.min_leaf = jc.at("min_leaf").get<int>();
    config.bootstrap = jc.at("bootstrap").get<bool>();
    config.seed = jc.at("seed").get<std::uint64_t>();

    FeatureEncoder encoder;
    for (const auto& jb : j.at("encoder").at("blocks")) {
        FeatureEncoder::Block b;
        b.column = jb.at("column").get<std::string>();
        b.kind = jb.at("kind").get<std::string>() == "numeric" ? ColumnKind::Numeric : ColumnKind::Categorical;
        b.levels = jb.at("levels").get<std::vector<std::string>>();
        encoder.blocks.push_back(std::move(b));
    }
    encoder.feature_names = j.at("encoder").at("feature_names").get<std::vector<std::string>>();

    std::vector<DecisionTree> trees;
    for (const auto& jt : j.at("trees")) {
        DecisionTree tree;
        for (const auto& jn : jt.at("nodes")) {
            TreeNode node;
            node.feature = jn.at("f").get<std::int32_t>();
            node.threshold = jn.at("t").get<double>();
            node.left = jn.at("l").get<std::int32_t>();
            node.right = jn.at("r").get<std::int32_t>();
            node.positive_fraction = jn.at("p").get<double>();
            tree.nodes.push_back(node);
        }
        trees.push_back(std::move(tree));
    }
    return TrainedForest(config, std::move(encoder), std::move(trees));
}

double balanced_accuracy(std::span<const int> labels, std::span<const int> preds) {
    if (labels.size() != preds.size()) throw DataError("labels and predictions differ in length");
    long tp = 0, fp = 0, tn = 0, fn = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] == 1) {
            preds[i] == 1 ? ++tp : ++fn;
        } else {
            preds[i] == 1 ? ++fp : ++tn;
        }
    }
    if (tp + fn == 0) throw DataError("balanced accuracy undefined: no positive labels");
    if (fp + tn == 0) throw DataError("balanced accuracy undefined: no negative labels");
    const double tpr = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double tnr = static_cast<double>(tn) / static_cast<double>(fp + tn);
    return (tpr + tnr) / 2.0;
}

std::vector<double> threshold_grid() {
    std::vector<double> grid;
    grid.reserve(50);
    for (int k = 1; k <= 50; ++k) grid.push_back(static_cast<double>(k) / 100.0);
    return grid;
}

std::vector<int> apply_threshold(std::span<const double> scores, double threshold) {
    std::vector<int> preds(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) preds[i] = scores[i] >= threshold ? 1 : 0;
    return preds;
}

ThresholdResult threshold_sweep(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
    ThresholdResult best;
    best.balanced_accuracy = -1.0;
    for (double threshold : threshold_grid()) {
        const std::vector<int> preds = apply_threshold(scores, threshold);
        const double ba = balanced_accuracy(labels, preds);
        if (ba > best.balanced_accuracy) {
            best.balanced_accuracy = ba;
            best.threshold = threshold;
        }
    }
    return best;
}

} // namespace fairaudit
