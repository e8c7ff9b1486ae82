#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "toki/classifier.hpp"
#include "toki/corpus.hpp"
#include "toki/embed.hpp"
#include "toki/explain.hpp"
#include "toki/keywords.hpp"
#include "toki/oracle.hpp"
#include "toki/parallel.hpp"

namespace toki {

// Positive class = trustworthy.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }

    void add(TrustLabel predicted, TrustLabel truth) {
        const bool p = predicted == TrustLabel::trustworthy;
        const bool t = truth == TrustLabel::trustworthy;
        (p ? (t ? tp : fp) : (t ? fn : tn)) += 1;
    }
};

struct MetricReport {
    double accuracy = 0.0;
    double precision = 0.0;
    double sensitivity = 0.0;
    double specificity = 0.0;
    double f1 = 0.0;
    double g_mean = 0.0;
    std::vector<std::string> undefined;  // metrics whose denominator was zero (reported as 0)

    nlohmann::json to_json() const {
        return {{"accuracy", accuracy}, {"precision", precision}, {"sensitivity", sensitivity},
                {"specificity", specificity}, {"f1", f1}, {"g_mean", g_mean}, {"undefined", undefined}};
    }
};

inline double g_mean(double sensitivity, double specificity) { return std::sqrt(sensitivity * specificity); }

inline double f1_score(double precision, double sensitivity) {
    return precision + sensitivity > 0.0 ? 2.0 * precision * sensitivity / (precision + sensitivity) : 0.0;
}

inline MetricReport compute_metrics(const ConfusionCounts& c) {
    if (c.total() == 0) throw Error("compute_metrics: no predictions counted");
    MetricReport m;
    auto ratio = [&](std::uint64_t num, std::uint64_t den, const char* name) {
        if (den == 0) {
            m.undefined.emplace_back(name);
            return 0.0;
        }
        return static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(c.tp + c.tn, c.total(), "accuracy");
    m.precision = ratio(c.tp, c.tp + c.fp, "precision");
    m.sensitivity = ratio(c.tp, c.tp + c.fn, "sensitivity");
    m.specificity = ratio(c.tn, c.tn + c.fp, "specificity");
    if (m.precision + m.sensitivity == 0.0) m.undefined.emplace_back("f1");
    m.f1 = f1_score(m.precision, m.sensitivity);
    m.g_mean = g_mean(m.sensitivity, m.specificity);
    return m;
}

struct RocPoint {
    double threshold = 0.0;
    double tpr = 0.0;
    double fpr = 0.0;
};

// Predicted trustworthy iff confidence >= threshold.
inline std::vector<RocPoint> roc_sweep(const std::vector<double>& confidences, const std::vector<bool>& trustworthy,
                                       const std::vector<double>& thresholds) {
    if (confidences.size() != trustworthy.size()) throw Error("roc_sweep: confidences and labels differ in length");
    std::size_t pos = 0;
    for (bool t : trustworthy) pos += t ? 1 : 0;
    const std::size_t neg = trustworthy.size() - pos;
    std::vector<RocPoint> out;
    for (double th : thresholds) {
        std::size_t tp = 0;
        std::size_t fp = 0;
        for (std::size_t i = 0; i < confidences.size(); ++i) {
            if (confidences[i] < th) continue;
            (trustworthy[i] ? tp : fp) += 1;
        }
        out.push_back({th, pos ? static_cast<double>(tp) / static_cast<double>(pos) : 0.0,
                       neg ? static_cast<double>(fp) / static_cast<double>(neg) : 0.0});
    }
    return out;
}

inline std::vector<double> default_roc_thresholds() {
    std::vector<double> t;
    for (int i = 0; i <= 20; ++i) t.push_back(i / 20.0);
    t.push_back(1.0 + 1e-9);
    return t;
}

// |E ∩ G| / |E| over distinct words.
inline double explanation_precision(const std::vector<std::string>& explanation_words,
                                    const std::vector<std::string>& ground_truth) {
    const std::set<std::string> e(explanation_words.begin(), explanation_words.end());
    if (e.empty()) throw Error("explanation_precision: model explanation is empty");
    const std::set<std::string> g(ground_truth.begin(), ground_truth.end());
    std::size_t hit = 0;
    for (const auto& w : e) hit += g.count(w);
    return static_cast<double>(hit) / static_cast<double>(e.size());
}

inline TrustLabel label_by_precision(double precision) {
    return precision >= 0.5 ? TrustLabel::trustworthy : TrustLabel::untrustworthy;
}

using TrustLabels = std::map<std::string, TrustLabel>;

// One {"doc_id": ..., "trust_label": ...} object per line.
inline TrustLabels read_trust_labels(std::istream& in, const std::string& source = "<stream>") {
    TrustLabels out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            out[j.at("doc_id").get<std::string>()] = parse_trust_label(j.at("trust_label").get<std::string>());
        } catch (const std::exception& e) {
            throw ParseError(source, lineno, e.what());
        }
    }
    return out;
}

inline TrustLabels load_trust_labels(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open trust labels: " + path);
    return read_trust_labels(in, path);
}

// Plurality per document across annotators; ties resolve to untrustworthy.
inline TrustLabels merge_annotations(const std::vector<TrustLabels>& annotators) {
    std::map<std::string, std::vector<bool>> votes;
    for (const auto& a : annotators) {
        for (const auto& [id, l] : a) votes[id].push_back(l == TrustLabel::trustworthy);
    }
    TrustLabels out;
    for (const auto& [id, v] : votes) out[id] = plurality_vote(v) ? TrustLabel::trustworthy : TrustLabel::untrustworthy;
    return out;
}

struct BenchOptions {
    ExplainerConfig explainer;
    double theta_dist = 0.3;
    double theta_conf = 0.9;
    std::size_t sample_limit = 2000;
    std::vector<OracleMethod> methods{OracleMethod::toki, OracleMethod::naive, OracleMethod::toki_no_ki};
    std::uint64_t seed = 0;
    unsigned workers = 1;
};

struct BenchTiming {
    double keyword_identification_s = 0.0;
    std::map<std::string, double> label_computation_s;

    nlohmann::json to_json() const {
        return {{"keyword_identification_s", keyword_identification_s}, {"label_computation_s", label_computation_s}};
    }
};

struct BenchResult {
    nlohmann::json report;  // deterministic for fixed inputs and seed
    BenchTiming timing;     // wall clock, kept out of the report
    std::optional<KeywordIndex> index;
};

// Orchestrates keyword identification and assessment of every correct test
// prediction by each method, scored against ground-truth trust labels.
// `ensemble` may be null; embedding-based methods then report an error entry.
inline BenchResult run_benchmark(const Predictor& predictor, const LabeledDataset& train, const LabeledDataset& test,
                                 const TrustLabels& labels, const EmbeddingEnsemble* ensemble,
                                 const BenchOptions& opt) {
    using clock = std::chrono::steady_clock;
    using nlohmann::json;
    if (test.size() == 0) throw Error("bench: test set is empty");
    if (labels.empty()) throw Error("bench: no trustworthiness labels supplied");
    if (opt.methods.empty()) throw Error("bench: no methods selected");

    BenchResult result;
    json& rep = result.report;
    rep["schema_version"] = 1;
    rep["config"] = {{"explainer", to_string(opt.explainer.kind)},
                     {"k", opt.explainer.k},
                     {"lime_samples", opt.explainer.lime.n_samples},
                     {"theta_dist", opt.theta_dist},
                     {"theta_conf", opt.theta_conf},
                     {"sample", opt.sample_limit},
                     {"seed", opt.seed}};

    const bool wants_index = std::find(opt.methods.begin(), opt.methods.end(), OracleMethod::toki) != opt.methods.end();
    const auto t0 = clock::now();
    if (wants_index && ensemble) {
        result.index = identify_keywords(predictor, train, opt.explainer, *ensemble, opt.theta_dist, opt.sample_limit,
                                         opt.seed, opt.workers);
        json kw = json::object();
        for (const auto& c : result.index->classes) {
            kw[c.class_name] = {{"explanations", c.n_explanations},
                                {"keywords", c.keywords.size()},
                                {"non_keywords", c.non_keywords.size()}};
        }
        rep["keywords"] = kw;
    }
    result.timing.keyword_identification_s = std::chrono::duration<double>(clock::now() - t0).count();

    // Correct, labeled predictions only; unlabeled ones are counted and skipped.
    std::vector<std::string> texts;
    for (const auto& d : test.documents) texts.push_back(join_tokens(d.tokens));
    const auto preds = predictor.predict_proba(texts);
    std::vector<std::size_t> assessed;
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        if (test.documents[i].tokens.empty() || preds[i].argmax() != test.labels[i]) continue;
        ++correct;
        if (labels.count(test.documents[i].id)) assessed.push_back(i);
    }
    rep["test"] = {{"documents", test.size()},
                   {"correct", correct},
                   {"assessed", assessed.size()},
                   {"unlabeled", correct - assessed.size()}};

    const bool needs_explanations = std::any_of(opt.methods.begin(), opt.methods.end(),
                                                [](OracleMethod m) { return m != OracleMethod::naive; });
    std::vector<Explanation> explanations(assessed.size());
    double explain_s = 0.0;
    if (needs_explanations && ensemble) {
        const auto te = clock::now();
        parallel_for(assessed.size(), opt.workers, [&](std::size_t j) {
            const auto& doc = test.documents[assessed[j]];
            explanations[j] = explain(predictor, doc, opt.explainer, document_seed(opt.seed, doc));
        });
        explain_s = std::chrono::duration<double>(clock::now() - te).count();
    }

    json methods = json::object();
    json per_doc = json::array();
    std::map<std::string, std::vector<TrustLabel>> method_labels;
    for (auto method : opt.methods) {
        const std::string name = to_string(method);
        if (method != OracleMethod::naive && !ensemble) {
            methods[name] = {{"error", "no embedding ensemble configured"}};
            continue;
        }
        if (method == OracleMethod::toki && !result.index) {
            methods[name] = {{"error", "no keyword index available"}};
            continue;
        }
        const auto tm = clock::now();
        std::vector<TrustLabel> out(assessed.size());
        parallel_for(assessed.size(), opt.workers, [&](std::size_t j) {
            const auto i = assessed[j];
            switch (method) {
                case OracleMethod::naive: out[j] = naive_assess(preds[i].confidence(), opt.theta_conf).label; break;
                case OracleMethod::toki: out[j] = assess(explanations[j], test.labels[i], *result.index, *ensemble).label; break;
                case OracleMethod::toki_no_ki:
                    out[j] = assess_no_ki(explanations[j], test.labels[i], test.class_names[test.labels[i]], *ensemble).label;
                    break;
            }
        });
        double secs = std::chrono::duration<double>(clock::now() - tm).count();
        if (method != OracleMethod::naive) secs += explain_s;
        result.timing.label_computation_s[name] = secs;

        ConfusionCounts counts;
        for (std::size_t j = 0; j < assessed.size(); ++j) counts.add(out[j], labels.at(test.documents[assessed[j]].id));
        json entry{{"counts", {{"tp", counts.tp}, {"fp", counts.fp}, {"tn", counts.tn}, {"fn", counts.fn}}}};
        if (counts.total() > 0) entry["metrics"] = compute_metrics(counts).to_json();
        else entry["error"] = "no labeled, correctly predicted test documents";
        methods[name] = entry;
        method_labels[name] = std::move(out);
    }
    rep["methods"] = methods;

    if (std::find(opt.methods.begin(), opt.methods.end(), OracleMethod::naive) != opt.methods.end()) {
        std::vector<double> conf;
        std::vector<bool> truth;
        for (auto i : assessed) {
            conf.push_back(preds[i].confidence());
            truth.push_back(labels.at(test.documents[i].id) == TrustLabel::trustworthy);
        }
        json roc = json::array();
        for (const auto& p : roc_sweep(conf, truth, default_roc_thresholds())) roc.push_back({p.threshold, p.tpr, p.fpr});
        rep["naive_roc"] = roc;
    }

    for (std::size_t j = 0; j < assessed.size(); ++j) {
        const auto& doc = test.documents[assessed[j]];
        json row{{"doc_id", doc.id},
                 {"truth", to_string(labels.at(doc.id))},
                 {"confidence", preds[assessed[j]].confidence()}};
        for (const auto& [name, ls] : method_labels) row[name] = to_string(ls[j]);
        per_doc.push_back(row);
    }
    rep["predictions"] = per_doc;
    return result;
}

}  // namespace toki
