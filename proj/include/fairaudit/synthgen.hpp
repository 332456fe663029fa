#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairaudit/table.hpp"

namespace fairaudit {

// Standard normal CDF and its inverse (Acklam rational approximation with one
// Halley refinement). Used by the copula sampler and the planted-bias model.
double normal_cdf(double x);
double normal_quantile(double p);

// Column-wise empirical sampler, optionally coupled through a Gaussian copula
// over the numeric columns. Numeric cells are drawn from the empirical
// quantile function (a step function over the observed values), categorical
// cells from the observed level frequencies, so generated values always lie in
// the observed value sets.
class MarginalGenerator {
public:
    static MarginalGenerator fit(const Table& train, bool use_copula);

    // n rows with the fitted table's schema, reproducible from the seed.
    Table generate(std::size_t n, std::uint64_t seed) const;

    const std::vector<std::string>& copula_excluded() const { return copula_excluded_; }
    bool has_copula() const { return !copula_columns_.empty(); }

private:
    struct NumericMarginal {
        std::string name;
        std::vector<double> sorted_values;
    };
    struct CategoricalMarginal {
        std::string name;
        std::vector<std::string> levels;
        std::vector<double> cumulative;  // cumulative frequencies, last == 1
    };

    Table schema_;  // zero-row copy carrying names/kinds/levels + label/protected
    std::vector<NumericMarginal> numeric_;
    std::vector<CategoricalMarginal> categorical_;
    std::vector<std::size_t> copula_columns_;   // indices into numeric_
    std::vector<double> cholesky_;              // row-major lower factor
    std::vector<std::string> copula_excluded_;  // constant columns left out
};

MarginalGenerator fit_generator(const Table& train, bool use_copula);
Table generate(const MarginalGenerator& g, std::size_t n, std::uint64_t seed);

// Nearest-neighbor adversarial accuracy between two same-schema tables.
// Rows embed as standardized numerics (pooled mean/sd) plus one-hot
// categoricals; distances are Euclidean. With d_cross the distance to the
// nearest row of the other set and d_within to the nearest *other* row of the
// own set:
//   nnAA = 1/2 [ mean_i 1(d_RS(i) > d_RR(i)) + mean_j 1(d_SR(j) > d_SS(j)) ].
// 0.5 means the sets are nearest-neighbor indistinguishable; an exact copy
// scores 0. Both tables need at least two rows.
double nn_adversarial_accuracy(const Table& real, const Table& synth);

// Two-group binary-label generative model with a planted, analytically known
// performance gap. Per row: group g ~ (prevalence_a), label y ~ Bernoulli(r_g),
// signal x ~ Normal(y * signal_g, 1), plus an independent noise column.
struct PlantedBiasSpec {
    double prevalence_a = 0.5;
    double positive_rate_a = 0.5;
    double positive_rate_b = 0.5;
    double signal_a = 1.0;
    double signal_b = 1.0;
    double target_tpr_gap = 0.0;  // informational: gap the spec was built for
    std::string group_a = "A";
    std::string group_b = "B";

    void validate() const;  // throws DataError on infeasible parameters
};

// Rates of the reference classifier (posterior score thresholded at the
// population positive rate, the balanced-accuracy optimum).
struct PlantedBiasRates {
    double tpr_a = 0.0, fpr_a = 0.0;
    double tpr_b = 0.0, fpr_b = 0.0;
    double tpr_gap = 0.0;  // tpr_a - tpr_b
    double score_threshold = 0.0;
};

PlantedBiasRates planted_bias_rates(const PlantedBiasSpec& spec);

// Solve for signal_a so the reference classifier's TPR gap equals target_gap.
// Errors when no solution exists on the informative branch.
PlantedBiasSpec planted_bias_for_gap(double prevalence_a, double positive_rate_a,
                                     double positive_rate_b, double signal_b,
                                     double target_gap);

// Sample a dataset from the spec: columns group (protected), signal, noise,
// label.
Table make_planted_bias(const PlantedBiasSpec& spec, std::size_t n, std::uint64_t seed);

} // namespace fairaudit
