#include <charconv>
#include <filesystem>
#include <fstream>

#include "fairaudit/csv.hpp"
#include "fairaudit/experiment.hpp"

namespace fairaudit {

namespace {

using nlohmann::json;

std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

json scores_to_json(const FairnessScores& s) {
    return {{"equal_opportunity_difference", s.equal_opportunity_difference},
            {"average_odds_difference", s.average_odds_difference},
            {"equalized_odds", s.equalized_odds}};
}

FairnessScores scores_from_json(const json& j, const ProtectedSpec& spec) {
    FairnessScores s;
    s.equal_opportunity_difference = j.at("equal_opportunity_difference").get<double>();
    s.average_odds_difference = j.at("average_odds_difference").get<double>();
    s.equalized_odds = j.at("equalized_odds").get<double>();
    s.pair = spec;
    return s;
}

json rates_to_json(const GroupRates& r) {
    return {{"group", r.group}, {"tp", r.tp},   {"fp", r.fp},   {"tn", r.tn},   {"fn", r.fn},
            {"tpr", r.tpr},     {"fpr", r.fpr}, {"tnr", r.tnr}, {"fnr", r.fnr}};
}

GroupRates rates_from_json(const json& j) {
    GroupRates r;
    r.group = j.at("group").get<std::string>();
    r.tp = j.at("tp").get<long>();
    r.fp = j.at("fp").get<long>();
    r.tn = j.at("tn").get<long>();
    r.fn = j.at("fn").get<long>();
    r.tpr = j.at("tpr").get<double>();
    r.fpr = j.at("fpr").get<double>();
    r.tnr = j.at("tnr").get<double>();
    r.fnr = j.at("fnr").get<double>();
    return r;
}

json evaluation_to_json(const Evaluation& e) {
    return {{"balanced_accuracy", e.balanced_accuracy},
            {"fairness", scores_to_json(e.fairness)},
            {"bands",
             {{"equal_opportunity", band_name(e.bands.equal_opportunity)},
              {"average_odds", band_name(e.bands.average_odds)},
              {"equalized_odds", band_name(e.bands.equalized_odds)}}},
            {"rates_a", rates_to_json(e.rates_a)},
            {"rates_b", rates_to_json(e.rates_b)}};
}

Band band_from_name(const std::string& name) {
    if (name == "fair") return Band::Fair;
    if (name == "unfair_toward_group_a") return Band::UnfairTowardGroupA;
    if (name == "unfair_toward_group_b") return Band::UnfairTowardGroupB;
    throw DataError("unknown band name: " + name);
}

Evaluation evaluation_from_json(const json& j, const ProtectedSpec& spec) {
    Evaluation e;
    e.balanced_accuracy = j.at("balanced_accuracy").get<double>();
    e.fairness = scores_from_json(j.at("fairness"), spec);
    e.bands.equal_opportunity = band_from_name(j.at("bands").at("equal_opportunity").get<std::string>());
    e.bands.average_odds = band_from_name(j.at("bands").at("average_odds").get<std::string>());
    e.bands.equalized_odds = band_from_name(j.at("bands").at("equalized_odds").get<std::string>());
    e.rates_a = rates_from_json(j.at("rates_a"));
    e.rates_b = rates_from_json(j.at("rates_b"));
    return e;
}

json baseline_to_json(const BaselineResult& b) {
    return {{"threshold", b.threshold},
            {"test", evaluation_to_json(b.test)},
            {"validation", evaluation_to_json(b.validation)}};
}

BaselineResult baseline_from_json(const json& j, const ProtectedSpec& spec) {
    BaselineResult b;
    b.threshold = j.at("threshold").get<double>();
    b.test = evaluation_from_json(j.at("test"), spec);
    b.validation = evaluation_from_json(j.at("validation"), spec);
    return b;
}

json policy_to_json(const HpsPolicy& p) {
    auto gp = [](const HpsPolicy::GroupPolicy& g) {
        return json{{"group", g.group},
                    {"p_keep_positive", g.p_keep_positive},
                    {"p_flip_negative", g.p_flip_negative}};
    };
    return {{"group_a", gp(p.group_a)},
            {"group_b", gp(p.group_b)},
            {"fit_gap_tpr", p.fit_gap_tpr},
            {"fit_gap_fpr", p.fit_gap_fpr},
            {"expected_loss", p.expected_loss}};
}

HpsPolicy policy_from_json(const json& j) {
    auto gp = [](const json& g) {
        HpsPolicy::GroupPolicy out;
        out.group = g.at("group").get<std::string>();
        out.p_keep_positive = g.at("p_keep_positive").get<double>();
        out.p_flip_negative = g.at("p_flip_negative").get<double>();
        return out;
    };
    HpsPolicy p;
    p.group_a = gp(j.at("group_a"));
    p.group_b = gp(j.at("group_b"));
    p.fit_gap_tpr = j.at("fit_gap_tpr").get<double>();
    p.fit_gap_fpr = j.at("fit_gap_fpr").get<double>();
    p.expected_loss = j.at("expected_loss").get<double>();
    return p;
}

json mitigation_to_json(const MitigationRecord& m) {
    json j = {{"technique", mitigation_name(m.kind)},
              {"arm", m.arm},
              {"floor_unmet", m.floor_unmet},
              {"test", evaluation_to_json(m.test)},
              {"validation", evaluation_to_json(m.validation)}};
    j["threshold"] = m.threshold ? json(*m.threshold) : json(nullptr);
    j["selected_multiplier"] = m.selected_multiplier ? json(*m.selected_multiplier) : json(nullptr);
    j["policy"] = m.policy ? policy_to_json(*m.policy) : json(nullptr);
    return j;
}

MitigationRecord mitigation_from_json(const json& j, const ProtectedSpec& spec) {
    MitigationRecord m;
    const std::string technique = j.at("technique").get<std::string>();
    if (technique == "eo_threshold") m.kind = MitigationKind::EoThreshold;
    else if (technique == "reweigh") m.kind = MitigationKind::Reweigh;
    else if (technique == "reduction") m.kind = MitigationKind::Reduction;
    else if (technique == "hps") m.kind = MitigationKind::Hps;
    else throw DataError("unknown mitigation technique in report: " + technique);
    m.arm = j.at("arm").get<std::string>();
    m.floor_unmet = j.at("floor_unmet").get<bool>();
    if (!j.at("threshold").is_null()) m.threshold = j.at("threshold").get<double>();
    if (!j.at("selected_multiplier").is_null()) {
        m.selected_multiplier = j.at("selected_multiplier").get<double>();
    }
    if (!j.at("policy").is_null()) m.policy = policy_from_json(j.at("policy"));
    m.test = evaluation_from_json(j.at("test"), spec);
    m.validation = evaluation_from_json(j.at("validation"), spec);
    return m;
}

json ttest_to_json(const std::optional<TTestResult>& t) {
    if (!t) return nullptr;
    return {{"t_statistic", t->t_statistic},
            {"degrees_of_freedom", t->degrees_of_freedom},
            {"p_value", t->p_value},
            {"significant", t->significant}};
}

std::optional<TTestResult> ttest_from_json(const json& j) {
    if (j.is_null()) return std::nullopt;
    TTestResult t;
    t.t_statistic = j.at("t_statistic").get<double>();
    t.degrees_of_freedom = j.at("degrees_of_freedom").get<long>();
    t.p_value = j.at("p_value").get<double>();
    t.significant = j.at("significant").get<bool>();
    return t;
}

json summary_to_json(const Summary& s) {
    return {{"mean", s.mean}, {"sd", s.sd},     {"min", s.min}, {"q1", s.q1},
            {"median", s.median}, {"q3", s.q3}, {"max", s.max}};
}

Summary summary_from_json(const json& j) {
    Summary s;
    s.mean = j.at("mean").get<double>();
    s.sd = j.at("sd").get<double>();
    s.min = j.at("min").get<double>();
    s.q1 = j.at("q1").get<double>();
    s.median = j.at("median").get<double>();
    s.q3 = j.at("q3").get<double>();
    s.max = j.at("max").get<double>();
    return s;
}

ProtectedSpec spec_from_config_json(const json& config) {
    ProtectedSpec spec;
    spec.attribute = config.at("dataset").at("protected").get<std::string>();
    spec.group_a = config.at("protected_pair").at("group_a").get<std::string>();
    spec.group_b = config.at("protected_pair").at("group_b").get<std::string>();
    return spec;
}

std::string seeds_suffix(const std::vector<int>& seeds) {
    std::string out;
    for (std::size_t i = 0; i < seeds.size(); ++i) {
        if (i) out += "_";
        out += std::to_string(seeds[i]);
    }
    return out;
}

} // namespace

nlohmann::json AuditReport::to_json() const {
    json records_json = json::array();
    const ProtectedSpec spec = spec_from_config_json(config);
    (void)spec;
    for (const SeedRecord& r : records) {
        json mitigations_json = json::array();
        for (const MitigationRecord& m : r.mitigations) mitigations_json.push_back(mitigation_to_json(m));
        records_json.push_back({{"seed", r.seed},
                                {"prevalence_real", r.prevalence_real},
                                {"prevalence_synthetic", r.prevalence_synthetic},
                                {"nnaa", r.nnaa},
                                {"baseline_real", baseline_to_json(r.baseline_real)},
                                {"baseline_synthetic", baseline_to_json(r.baseline_synthetic)},
                                {"mitigations", mitigations_json}});
    }

    json prevalence_json = json::array();
    for (const PrevalenceRow& row : prevalence) {
        prevalence_json.push_back(
            {{"group", row.group},
             {"label", row.label},
             {"real_mean", row.real_mean},
             {"synthetic_mean", row.synthetic_mean},
             {"change_percent", row.change_percent ? json(*row.change_percent) : json(nullptr)},
             {"t_test", ttest_to_json(row.t_test)},
             {"t_test_error", row.t_test_error}});
    }

    json significance_json = json::array();
    for (const SignificanceRow& row : significance) {
        significance_json.push_back({{"comparison", row.comparison},
                                     {"balanced_accuracy", ttest_to_json(row.balanced_accuracy)},
                                     {"average_odds", ttest_to_json(row.average_odds)},
                                     {"equal_opportunity", ttest_to_json(row.equal_opportunity)},
                                     {"equalized_odds", ttest_to_json(row.equalized_odds)},
                                     {"errors", row.errors}});
    }

    json summaries_json = json::array();
    for (const TechniqueSummary& s : summaries) {
        json metrics;
        for (const auto& [metric, summary] : s.metrics) metrics[metric] = summary_to_json(summary);
        summaries_json.push_back({{"arm", s.arm}, {"technique", s.technique}, {"metrics", metrics}});
    }

    return {{"schema_version", schema_version},
            {"config_fingerprint", config_fingerprint},
            {"config", config},
            {"seeds_run", seeds_run},
            {"complete", complete},
            {"records", records_json},
            {"prevalence", prevalence_json},
            {"significance", significance_json},
            {"summaries", summaries_json}};
}

AuditReport AuditReport::from_json(const nlohmann::json& j) {
    AuditReport report;
    report.schema_version = j.at("schema_version").get<int>();
    if (report.schema_version != 1) throw DataError("unsupported report schema_version");
    report.config_fingerprint = j.at("config_fingerprint").get<std::string>();
    report.config = j.at("config");
    report.seeds_run = j.at("seeds_run").get<std::vector<int>>();
    report.complete = j.at("complete").get<bool>();
    const ProtectedSpec spec = spec_from_config_json(report.config);

    for (const json& jr : j.at("records")) {
        SeedRecord r;
        r.seed = jr.at("seed").get<int>();
        r.prevalence_real = jr.at("prevalence_real").get<std::map<std::string, double>>();
        r.prevalence_synthetic = jr.at("prevalence_synthetic").get<std::map<std::string, double>>();
        r.nnaa = jr.at("nnaa").get<double>();
        r.baseline_real = baseline_from_json(jr.at("baseline_real"), spec);
        r.baseline_synthetic = baseline_from_json(jr.at("baseline_synthetic"), spec);
        for (const json& jm : jr.at("mitigations")) r.mitigations.push_back(mitigation_from_json(jm, spec));
        report.records.push_back(std::move(r));
    }
    for (const json& jp : j.at("prevalence")) {
        PrevalenceRow row;
        row.group = jp.at("group").get<std::string>();
        row.label = jp.at("label").get<std::string>();
        row.real_mean = jp.at("real_mean").get<double>();
        row.synthetic_mean = jp.at("synthetic_mean").get<double>();
        if (!jp.at("change_percent").is_null()) row.change_percent = jp.at("change_percent").get<double>();
        row.t_test = ttest_from_json(jp.at("t_test"));
        row.t_test_error = jp.at("t_test_error").get<std::string>();
        report.prevalence.push_back(std::move(row));
    }
    for (const json& js : j.at("significance")) {
        SignificanceRow row;
        row.comparison = js.at("comparison").get<std::string>();
        row.balanced_accuracy = ttest_from_json(js.at("balanced_accuracy"));
        row.average_odds = ttest_from_json(js.at("average_odds"));
        row.equal_opportunity = ttest_from_json(js.at("equal_opportunity"));
        row.equalized_odds = ttest_from_json(js.at("equalized_odds"));
        row.errors = js.at("errors").get<std::map<std::string, std::string>>();
        report.significance.push_back(std::move(row));
    }
    for (const json& js : j.at("summaries")) {
        TechniqueSummary s;
        s.arm = js.at("arm").get<std::string>();
        s.technique = js.at("technique").get<std::string>();
        for (const auto& [metric, jsm] : js.at("metrics").items()) {
            s.metrics[metric] = summary_from_json(jsm);
        }
        report.summaries.push_back(std::move(s));
    }
    return report;
}

std::vector<std::string> emit_outputs(const AuditReport& report, const std::string& dir) {
    std::filesystem::create_directories(dir);
    std::vector<std::string> written;

    const std::string report_name =
        report.complete ? "report.json" : "report.partial-" + seeds_suffix(report.seeds_run) + ".json";
    const std::string report_path = (std::filesystem::path(dir) / report_name).string();
    {
        std::ofstream out(report_path, std::ios::binary);
        if (!out) throw Error("cannot write " + report_path);
        out << report.to_json().dump(2) << "\n";
        if (!out) throw Error("write failed: " + report_path);
    }
    written.push_back(report_path);
    if (!report.complete) return written;  // partial runs never emit aggregate views

    auto emit_csv = [&](const std::string& name, const CsvDocument& doc) {
        const std::string path = (std::filesystem::path(dir) / name).string();
        write_csv_file(path, doc);
        written.push_back(path);
    };

    {
        CsvDocument doc;
        doc.header = {"group", "label", "real_rate_mean", "synthetic_rate_mean", "change_percent",
                      "t_p_value", "significant"};
        for (const PrevalenceRow& row : report.prevalence) {
            doc.rows.push_back({row.group, row.label, format_double(row.real_mean),
                                format_double(row.synthetic_mean),
                                row.change_percent ? format_double(*row.change_percent) : "",
                                row.t_test ? format_double(row.t_test->p_value) : row.t_test_error,
                                row.t_test ? (row.t_test->significant ? "yes" : "no") : ""});
        }
        emit_csv("prevalence.csv", doc);
    }

    {
        CsvDocument doc;
        doc.header = {"comparison",
                      "balanced_accuracy_p", "balanced_accuracy_significant",
                      "average_odds_p", "average_odds_significant",
                      "equal_opportunity_p", "equal_opportunity_significant",
                      "equalized_odds_p", "equalized_odds_significant"};
        auto cell_pair = [](const std::optional<TTestResult>& t) {
            return t ? std::pair<std::string, std::string>{format_double(t->p_value),
                                                           t->significant ? "yes" : "no"}
                     : std::pair<std::string, std::string>{"", ""};
        };
        for (const SignificanceRow& row : report.significance) {
            const auto ba = cell_pair(row.balanced_accuracy);
            const auto ao = cell_pair(row.average_odds);
            const auto eo = cell_pair(row.equal_opportunity);
            const auto eq = cell_pair(row.equalized_odds);
            doc.rows.push_back({row.comparison, ba.first, ba.second, ao.first, ao.second,
                                eo.first, eo.second, eq.first, eq.second});
        }
        emit_csv("significance.csv", doc);
    }

    {
        CsvDocument doc;
        doc.header = {"seed", "metric", "real", "synthetic"};
        const std::vector<std::pair<std::string, double Evaluation::*>> dummy;  // readability only
        for (const SeedRecord& r : report.records) {
            auto push = [&](const std::string& metric, double real_v, double synth_v) {
                doc.rows.push_back({std::to_string(r.seed), metric, format_double(real_v),
                                    format_double(synth_v)});
            };
            push("balanced_accuracy", r.baseline_real.test.balanced_accuracy,
                 r.baseline_synthetic.test.balanced_accuracy);
            push("equal_opportunity_difference",
                 r.baseline_real.test.fairness.equal_opportunity_difference,
                 r.baseline_synthetic.test.fairness.equal_opportunity_difference);
            push("average_odds_difference", r.baseline_real.test.fairness.average_odds_difference,
                 r.baseline_synthetic.test.fairness.average_odds_difference);
            push("equalized_odds", r.baseline_real.test.fairness.equalized_odds,
                 r.baseline_synthetic.test.fairness.equalized_odds);
            push("nnaa", r.nnaa, r.nnaa);
        }
        emit_csv("scatter_real_vs_synth.csv", doc);
    }

    {
        CsvDocument doc;
        doc.header = {"arm", "technique", "metric", "mean", "sd", "min", "q1", "median", "q3", "max"};
        for (const TechniqueSummary& s : report.summaries) {
            for (const auto& [metric, summary] : s.metrics) {
                doc.rows.push_back({s.arm, s.technique, metric, format_double(summary.mean),
                                    format_double(summary.sd), format_double(summary.min),
                                    format_double(summary.q1), format_double(summary.median),
                                    format_double(summary.q3), format_double(summary.max)});
            }
        }
        emit_csv("boxplot_mitigation.csv", doc);
    }

    {
        CsvDocument doc;
        doc.header = {"arm", "technique", "row_type", "seed", "balanced_accuracy",
                      "equal_opportunity_difference", "average_odds_difference", "equalized_odds"};
        auto push_point = [&](const std::string& arm, const std::string& technique, int seed,
                              const Evaluation& e) {
            doc.rows.push_back({arm, technique, "point", std::to_string(seed),
                                format_double(e.balanced_accuracy),
                                format_double(e.fairness.equal_opportunity_difference),
                                format_double(e.fairness.average_odds_difference),
                                format_double(e.fairness.equalized_odds)});
        };
        for (const SeedRecord& r : report.records) {
            push_point("real", "baseline", r.seed, r.baseline_real.test);
            push_point("synthetic", "baseline", r.seed, r.baseline_synthetic.test);
            for (const MitigationRecord& m : r.mitigations) {
                push_point(m.arm, mitigation_name(m.kind), r.seed, m.test);
            }
        }
        for (const TechniqueSummary& s : report.summaries) {
            auto value = [&](const std::string& metric) {
                const auto it = s.metrics.find(metric);
                return it != s.metrics.end() ? format_double(it->second.mean) : std::string();
            };
            doc.rows.push_back({s.arm, s.technique, "mean", "", value("balanced_accuracy"),
                                value("equal_opportunity_difference"),
                                value("average_odds_difference"), value("equalized_odds")});
        }
        emit_csv("tradeoff_scatter.csv", doc);
    }

    return written;
}

} // namespace fairaudit
