#include "fairaudit/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "fairaudit/rng.hpp"

namespace fairaudit {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// Acklam's rational approximation refined with one Halley step; absolute
// error well below 1e-13 over (0, 1).
double normal_quantile(double p) {
    if (!(p > 0.0 && p < 1.0)) throw Error("normal quantile requires p in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                   -2.759285104469687e+02, 1.383577518672690e+02,
                                   -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                   -1.556989798598866e+02, 6.680131188771972e+01,
                                   -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                   -2.400758277161838e+00, -2.549732539343734e+00,
                                   4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                   2.445134137142996e+00, 3.754408661907416e+00};
    constexpr double p_low = 0.02425;
    double x;
    if (p < p_low) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - p_low) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log1p(-p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * M_PI) * std::exp(x * x / 2.0);
    return x - u / (1.0 + x * u / 2.0);
}

namespace {

// Mid-rank normal scores for the copula correlation estimate.
std::vector<double> normal_scores(const std::vector<double>& values) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n, 0.0);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double mid_rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = mid_rank;
        i = j + 1;
    }
    std::vector<double> z(n);
    for (std::size_t k = 0; k < n; ++k) {
        z[k] = normal_quantile(ranks[k] / (static_cast<double>(n) + 1.0));
    }
    return z;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;
    return sab / std::sqrt(saa * sbb);
}

// Lower Cholesky factor; shrinks the correlation toward the identity until
// the matrix is positive definite.
std::vector<double> cholesky_with_shrinkage(std::vector<double> corr, std::size_t k) {
    double shrink = 0.0;
    for (int attempt = 0; attempt < 64; ++attempt) {
        std::vector<double> m(k * k);
        for (std::size_t i = 0; i < k; ++i) {
            for (std::size_t j = 0; j < k; ++j) {
                const double off = corr[i * k + j] * (1.0 - shrink);
                m[i * k + j] = i == j ? 1.0 : off;
            }
        }
        std::vector<double> chol(k * k, 0.0);
        bool ok = true;
        for (std::size_t i = 0; i < k && ok; ++i) {
            for (std::size_t j = 0; j <= i; ++j) {
                double sum = m[i * k + j];
                for (std::size_t p = 0; p < j; ++p) sum -= chol[i * k + p] * chol[j * k + p];
                if (i == j) {
                    if (sum <= 1e-10) {
                        ok = false;
                        break;
                    }
                    chol[i * k + j] = std::sqrt(sum);
                } else {
                    chol[i * k + j] = sum / chol[j * k + j];
                }
            }
        }
        if (ok) return chol;
        shrink = shrink == 0.0 ? 1e-6 : std::min(1.0, shrink * 4.0);
    }
    throw Error("copula correlation matrix could not be factorized");
}

} // namespace

MarginalGenerator MarginalGenerator::fit(const Table& train, bool use_copula) {
    if (train.row_count() == 0) throw DataError("cannot fit a generator on an empty table");
    MarginalGenerator g;
    g.schema_ = train.select_rows({});

    const double n = static_cast<double>(train.row_count());
    for (const Column& col : train.columns) {
        if (col.kind == ColumnKind::Numeric) {
            NumericMarginal m;
            m.name = col.name;
            m.sorted_values = col.values;
            std::sort(m.sorted_values.begin(), m.sorted_values.end());
            g.numeric_.push_back(std::move(m));
        } else {
            CategoricalMarginal m;
            m.name = col.name;
            m.levels = col.levels;
            std::vector<std::size_t> counts(col.levels.size(), 0);
            for (std::int32_t c : col.codes) counts[static_cast<std::size_t>(c)]++;
            double acc = 0.0;
            for (std::size_t i = 0; i < counts.size(); ++i) {
                acc += static_cast<double>(counts[i]) / n;
                m.cumulative.push_back(acc);
            }
            if (!m.cumulative.empty()) m.cumulative.back() = 1.0;
            g.categorical_.push_back(std::move(m));
        }
    }

    if (use_copula && train.row_count() >= 2) {
        std::vector<std::size_t> usable;
        std::vector<std::vector<double>> scores;
        for (std::size_t i = 0; i < g.numeric_.size(); ++i) {
            const auto& values = g.numeric_[i].sorted_values;
            if (values.front() == values.back()) {
                g.copula_excluded_.push_back(g.numeric_[i].name);  // constant column
                continue;
            }
            usable.push_back(i);
            scores.push_back(normal_scores(train.column(g.numeric_[i].name).values));
        }
        if (usable.size() >= 2) {
            const std::size_t k = usable.size();
            std::vector<double> corr(k * k, 0.0);
            for (std::size_t i = 0; i < k; ++i) {
                corr[i * k + i] = 1.0;
                for (std::size_t j = i + 1; j < k; ++j) {
                    const double rho = pearson(scores[i], scores[j]);
                    corr[i * k + j] = rho;
                    corr[j * k + i] = rho;
                }
            }
            g.cholesky_ = cholesky_with_shrinkage(std::move(corr), k);
            g.copula_columns_ = std::move(usable);
        }
    }
    return g;
}

Table MarginalGenerator::generate(std::size_t n, std::uint64_t seed) const {
    if (n < 1) throw DataError("generation size must be at least 1");
    Table out = schema_;
    for (Column& col : out.columns) {
        if (col.kind == ColumnKind::Numeric) col.values.reserve(n);
        else col.codes.reserve(n);
    }

    // Column order of the fitted schema; numeric/categorical marginals are
    // looked up by position within their own lists.
    std::vector<std::ptrdiff_t> numeric_slot(out.columns.size(), -1);
    std::vector<std::ptrdiff_t> categorical_slot(out.columns.size(), -1);
    for (std::size_t c = 0; c < out.columns.size(); ++c) {
        const std::string& name = out.columns[c].name;
        for (std::size_t i = 0; i < numeric_.size(); ++i) {
            if (numeric_[i].name == name) numeric_slot[c] = static_cast<std::ptrdiff_t>(i);
        }
        for (std::size_t i = 0; i < categorical_.size(); ++i) {
            if (categorical_[i].name == name) categorical_slot[c] = static_cast<std::ptrdiff_t>(i);
        }
    }
    std::vector<std::ptrdiff_t> copula_rank(numeric_.size(), -1);
    for (std::size_t i = 0; i < copula_columns_.size(); ++i) {
        copula_rank[copula_columns_[i]] = static_cast<std::ptrdiff_t>(i);
    }

    SplitMix64 rng(seed);
    const std::size_t k = copula_columns_.size();
    std::vector<double> z(k), u(k);

    auto empirical_value = [](const std::vector<double>& sorted, double quantile) {
        auto idx = static_cast<std::size_t>(std::floor(quantile * static_cast<double>(sorted.size())));
        if (idx >= sorted.size()) idx = sorted.size() - 1;
        return sorted[idx];
    };

    for (std::size_t row = 0; row < n; ++row) {
        if (k > 0) {
            std::vector<double> raw(k);
            for (std::size_t i = 0; i < k; ++i) raw[i] = normal_quantile(rng.next_double());
            for (std::size_t i = 0; i < k; ++i) {
                double sum = 0.0;
                for (std::size_t j = 0; j <= i; ++j) sum += cholesky_[i * k + j] * raw[j];
                z[i] = sum;
                u[i] = normal_cdf(sum);
            }
        }
        for (std::size_t c = 0; c < out.columns.size(); ++c) {
            Column& col = out.columns[c];
            if (col.kind == ColumnKind::Numeric) {
                const auto& marginal = numeric_[static_cast<std::size_t>(numeric_slot[c])];
                const std::ptrdiff_t rank = copula_rank[static_cast<std::size_t>(numeric_slot[c])];
                const double quantile = rank >= 0 ? u[static_cast<std::size_t>(rank)] : rng.next_double();
                col.values.push_back(empirical_value(marginal.sorted_values, quantile));
            } else {
                const auto& marginal = categorical_[static_cast<std::size_t>(categorical_slot[c])];
                const double quantile = rng.next_double();
                std::size_t level = 0;
                while (level + 1 < marginal.cumulative.size() && quantile >= marginal.cumulative[level]) {
                    ++level;
                }
                col.codes.push_back(static_cast<std::int32_t>(level));
            }
        }
    }
    out.validate();
    return out;
}

MarginalGenerator fit_generator(const Table& train, bool use_copula) {
    return MarginalGenerator::fit(train, use_copula);
}

Table generate(const MarginalGenerator& g, std::size_t n, std::uint64_t seed) {
    return g.generate(n, seed);
}

namespace {

// Embedding for nearest-neighbor distances: standardized numerics (pooled
// moments) plus unscaled one-hot categoricals over the union of levels.
struct Embedding {
    std::vector<double> real;   // row-major
    std::vector<double> synth;
    std::size_t dim = 0;
};

Embedding embed_for_distance(const Table& real, const Table& synth) {
    if (real.column_count() != synth.column_count()) throw DataError("tables differ in column count");
    for (std::size_t c = 0; c < real.column_count(); ++c) {
        if (real.columns[c].name != synth.columns[c].name || real.columns[c].kind != synth.columns[c].kind) {
            throw DataError("tables differ in schema at column '" + real.columns[c].name + "'");
        }
    }
    const std::size_t nr = real.row_count();
    const std::size_t ns = synth.row_count();

    std::size_t dim = 0;
    struct ColPlan {
        bool numeric;
        double mean = 0.0, sd = 1.0;
        std::vector<std::string> levels;  // union, sorted
        std::size_t offset = 0;
    };
    std::vector<ColPlan> plans;
    for (std::size_t c = 0; c < real.column_count(); ++c) {
        ColPlan plan;
        plan.offset = dim;
        if (real.columns[c].kind == ColumnKind::Numeric) {
            plan.numeric = true;
            double sum = 0.0;
            for (double v : real.columns[c].values) sum += v;
            for (double v : synth.columns[c].values) sum += v;
            const double n = static_cast<double>(nr + ns);
            plan.mean = sum / n;
            double ss = 0.0;
            for (double v : real.columns[c].values) ss += (v - plan.mean) * (v - plan.mean);
            for (double v : synth.columns[c].values) ss += (v - plan.mean) * (v - plan.mean);
            const double sd = std::sqrt(ss / n);
            plan.sd = sd > 1e-12 ? sd : 0.0;  // constant columns contribute nothing
            dim += 1;
        } else {
            plan.numeric = false;
            plan.levels = real.columns[c].levels;
            for (const std::string& level : synth.columns[c].levels) {
                if (std::find(plan.levels.begin(), plan.levels.end(), level) == plan.levels.end()) {
                    plan.levels.push_back(level);
                }
            }
            std::sort(plan.levels.begin(), plan.levels.end());
            dim += plan.levels.size();
        }
        plans.push_back(std::move(plan));
    }

    Embedding e;
    e.dim = dim;
    e.real.assign(nr * dim, 0.0);
    e.synth.assign(ns * dim, 0.0);
    auto fill = [&](const Table& t, std::vector<double>& out) {
        for (std::size_t c = 0; c < t.column_count(); ++c) {
            const ColPlan& plan = plans[c];
            const Column& col = t.columns[c];
            if (plan.numeric) {
                for (std::size_t r = 0; r < col.values.size(); ++r) {
                    out[r * dim + plan.offset] =
                        plan.sd > 0.0 ? (col.values[r] - plan.mean) / plan.sd : 0.0;
                }
            } else {
                for (std::size_t r = 0; r < col.codes.size(); ++r) {
                    const std::string& level = col.level_of(r);
                    const auto it = std::lower_bound(plan.levels.begin(), plan.levels.end(), level);
                    const auto pos = static_cast<std::size_t>(it - plan.levels.begin());
                    out[r * dim + plan.offset + pos] = 1.0;
                }
            }
        }
    };
    fill(real, e.real);
    fill(synth, e.synth);
    return e;
}

double squared_distance(const double* a, const double* b, std::size_t dim) {
    double s = 0.0;
    for (std::size_t i = 0; i < dim; ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

// mean_i 1(min distance to `other` > min distance within `own`, self excluded)
double leave_out_fraction(const std::vector<double>& own, std::size_t n_own,
                          const std::vector<double>& other, std::size_t n_other,
                          std::size_t dim) {
    std::size_t count = 0;
    for (std::size_t i = 0; i < n_own; ++i) {
        const double* q = own.data() + i * dim;
        double d_within = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_own; ++j) {
            if (j == i) continue;
            d_within = std::min(d_within, squared_distance(q, own.data() + j * dim, dim));
        }
        double d_cross = std::numeric_limits<double>::infinity();
        for (std::size_t j = 0; j < n_other; ++j) {
            d_cross = std::min(d_cross, squared_distance(q, other.data() + j * dim, dim));
        }
        if (d_cross > d_within) ++count;
    }
    return static_cast<double>(count) / static_cast<double>(n_own);
}

} // namespace

double nn_adversarial_accuracy(const Table& real, const Table& synth) {
    if (real.row_count() < 2 || synth.row_count() < 2) {
        throw DataError("nearest-neighbor accuracy needs at least two rows per table");
    }
    const Embedding e = embed_for_distance(real, synth);
    const double real_term = leave_out_fraction(e.real, real.row_count(), e.synth, synth.row_count(), e.dim);
    const double synth_term = leave_out_fraction(e.synth, synth.row_count(), e.real, real.row_count(), e.dim);
    return (real_term + synth_term) / 2.0;
}

void PlantedBiasSpec::validate() const {
    auto in_open_unit = [](double p) { return p > 0.0 && p < 1.0; };
    if (!in_open_unit(prevalence_a)) throw DataError("group prevalence must lie in (0, 1)");
    if (!in_open_unit(positive_rate_a) || !in_open_unit(positive_rate_b)) {
        throw DataError("positive rates must lie in (0, 1)");
    }
    if (!(signal_a > 0.0) || !(signal_b > 0.0)) throw DataError("signal strengths must be positive");
    if (group_a == group_b) throw DataError("planted groups must be distinct");
}

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }

// Rates of the threshold rule "posterior >= population positive rate" for a
// group with separation s and prior kappa offset (logit r_g - logit p1):
//   TPR = Phi(s/2 + kappa/s), FPR = Phi(-s/2 + kappa/s).
double group_tpr(double s, double kappa) { return normal_cdf(s / 2.0 + kappa / s); }
double group_fpr(double s, double kappa) { return normal_cdf(-s / 2.0 + kappa / s); }

} // namespace

PlantedBiasRates planted_bias_rates(const PlantedBiasSpec& spec) {
    spec.validate();
    const double p1 = spec.prevalence_a * spec.positive_rate_a +
                      (1.0 - spec.prevalence_a) * spec.positive_rate_b;
    const double kappa_a = logit(spec.positive_rate_a) - logit(p1);
    const double kappa_b = logit(spec.positive_rate_b) - logit(p1);
    PlantedBiasRates r;
    r.score_threshold = p1;
    r.tpr_a = group_tpr(spec.signal_a, kappa_a);
    r.fpr_a = group_fpr(spec.signal_a, kappa_a);
    r.tpr_b = group_tpr(spec.signal_b, kappa_b);
    r.fpr_b = group_fpr(spec.signal_b, kappa_b);
    r.tpr_gap = r.tpr_a - r.tpr_b;
    return r;
}

PlantedBiasSpec planted_bias_for_gap(double prevalence_a, double positive_rate_a,
                                     double positive_rate_b, double signal_b,
                                     double target_gap) {
    PlantedBiasSpec spec;
    spec.prevalence_a = prevalence_a;
    spec.positive_rate_a = positive_rate_a;
    spec.positive_rate_b = positive_rate_b;
    spec.signal_b = signal_b;
    spec.signal_a = 1.0;
    spec.target_tpr_gap = target_gap;
    spec.validate();

    const double p1 = prevalence_a * positive_rate_a + (1.0 - prevalence_a) * positive_rate_b;
    const double kappa_a = logit(positive_rate_a) - logit(p1);
    const double kappa_b = logit(positive_rate_b) - logit(p1);
    const double target_tpr = group_tpr(signal_b, kappa_b) + target_gap;
    if (!(target_tpr > 0.0 && target_tpr < 1.0)) {
        throw DataError("infeasible planted gap: implied TPR outside (0, 1)");
    }

    // TPR(s) = Phi(s/2 + kappa/s) is increasing for s >= sqrt(2*max(kappa, 0));
    // bisect on that branch.
    double lo = kappa_a > 0.0 ? std::sqrt(2.0 * kappa_a) : 1e-6;
    double hi = 64.0;
    if (group_tpr(lo, kappa_a) > target_tpr || group_tpr(hi, kappa_a) < target_tpr) {
        throw DataError("infeasible planted gap: target TPR unreachable on the informative branch");
    }
    for (int iter = 0; iter < 200; ++iter) {
        const double mid = (lo + hi) / 2.0;
        (group_tpr(mid, kappa_a) < target_tpr ? lo : hi) = mid;
    }
    spec.signal_a = (lo + hi) / 2.0;
    return spec;
}

Table make_planted_bias(const PlantedBiasSpec& spec, std::size_t n, std::uint64_t seed) {
    spec.validate();
    if (n < 1) throw DataError("planted-bias sample size must be at least 1");

    Table t;
    t.label_column = "label";
    t.protected_column = "group";
    Column group{"group", ColumnKind::Categorical, {}, {}, {spec.group_a, spec.group_b}};
    Column signal{"signal", ColumnKind::Numeric, {}, {}, {}};
    Column noise{"noise", ColumnKind::Numeric, {}, {}, {}};
    Column label{"label", ColumnKind::Numeric, {}, {}, {}};
    group.codes.reserve(n);
    signal.values.reserve(n);
    noise.values.reserve(n);
    label.values.reserve(n);

    SplitMix64 rng(seed);
    for (std::size_t i = 0; i < n; ++i) {
        const bool is_a = rng.next_double() < spec.prevalence_a;
        const double rate = is_a ? spec.positive_rate_a : spec.positive_rate_b;
        const int y = rng.next_double() < rate ? 1 : 0;
        const double s = is_a ? spec.signal_a : spec.signal_b;
        signal.values.push_back(static_cast<double>(y) * s + normal_quantile(rng.next_double()));
        noise.values.push_back(normal_quantile(rng.next_double()));
        group.codes.push_back(is_a ? 0 : 1);
        label.values.push_back(static_cast<double>(y));
    }
    t.columns = {std::move(group), std::move(signal), std::move(noise), std::move(label)};
    t.validate();
    return t;
}

} // namespace fairaudit
