// Command-line front end: train, explain, keywords, assess, attack, bench.

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "toki/attack.hpp"
#include "toki/bench.hpp"
#include "toki/classifier.hpp"
#include "toki/corpus.hpp"
#include "toki/embed.hpp"
#include "toki/explain.hpp"
#include "toki/keywords.hpp"
#include "toki/oracle.hpp"
#include "toki/plugin.hpp"

using nlohmann::json;

namespace {

constexpr int kSchemaVersion = 1;

struct Global {
    std::uint64_t seed = 0;
    unsigned workers = 1;
    std::string config;
    bool pretty = false;
};

struct ModelArgs {
    std::string model;
    std::string plugin;
};

struct ExplainArgs {
    std::string explainer = "lime";
    std::size_t k = 10;
    int lime_samples = 5000;
};

struct EnsembleArgs {
    std::vector<std::string> embeddings;
    std::vector<double> theta_relate;
    std::string related_pairs;
    std::string unrelated_pairs;
};

void add_model_args(CLI::App* cmd, ModelArgs& a) {
    cmd->add_option("--model", a.model, "Model JSON written by `train`");
    cmd->add_option("--plugin", a.plugin, "Shell command of an external classifier plugin");
}

void add_explain_args(CLI::App* cmd, ExplainArgs& a) {
    cmd->add_option("--explainer", a.explainer, "lime | omission | gradient")->capture_default_str();
    cmd->add_option("--k", a.k, "Words kept per explanation")->capture_default_str();
    cmd->add_option("--lime-samples", a.lime_samples, "Perturbed samples per LIME explanation")->capture_default_str();
}

void add_ensemble_args(CLI::App* cmd, EnsembleArgs& a) {
    cmd->add_option("--embeddings", a.embeddings, "Word-vector files, comma separated")->delimiter(',');
    cmd->add_option("--theta-relate", a.theta_relate, "theta_relate per store, comma separated")->delimiter(',');
    cmd->add_option("--related-pairs", a.related_pairs, "TSV of related word pairs (estimates theta_relate)");
    cmd->add_option("--unrelated-pairs", a.unrelated_pairs, "TSV of unrelated word pairs");
}

std::unique_ptr<toki::Predictor> open_predictor(const ModelArgs& a) {
    if (!a.model.empty() && !a.plugin.empty()) throw toki::Error("give either --model or --plugin, not both");
    if (!a.plugin.empty()) return std::make_unique<toki::ExternalPredictor>(a.plugin);
    if (a.model.empty()) throw toki::Error("a classifier is required: --model <file> or --plugin <command>");
    return std::make_unique<toki::LinearTextModel>(toki::load_model(a.model));
}

toki::ExplainerConfig explainer_config(const ExplainArgs& a) {
    toki::ExplainerConfig cfg;
    cfg.kind = toki::parse_explainer(a.explainer);
    cfg.k = a.k;
    cfg.lime.n_samples = a.lime_samples;
    return cfg;
}

toki::EmbeddingEnsemble load_ensemble(const EnsembleArgs& a, json* theta_log = nullptr) {
    if (a.embeddings.empty()) throw toki::Error("--embeddings is required");
    toki::EmbeddingEnsemble ens;
    for (const auto& p : a.embeddings) ens.stores.push_back(toki::load_store(p));
    if (!a.theta_relate.empty()) {
        if (a.theta_relate.size() != ens.size()) throw toki::Error("--theta-relate needs one value per embedding file");
        ens.thetas = a.theta_relate;
        return ens;
    }
    if (a.related_pairs.empty() || a.unrelated_pairs.empty()) {
        throw toki::Error("theta_relate unknown: pass --theta-relate or both --related-pairs and --unrelated-pairs");
    }
    const auto rel = toki::load_pairs(a.related_pairs);
    const auto unr = toki::load_pairs(a.unrelated_pairs);
    for (const auto& s : ens.stores) {
        const auto est = toki::estimate_theta_relate(s, rel, unr);
        ens.thetas.push_back(est.theta);
        if (theta_log) {
            theta_log->push_back({{"store", s.name()},
                                  {"theta", est.theta},
                                  {"iterations", est.iterations},
                                  {"precision", est.precision},
                                  {"recall", est.recall},
                                  {"balanced", est.balanced},
                                  {"dropped_pairs", est.dropped_pairs}});
        }
    }
    return ens;
}

// Embeddings recorded in a keyword index fill in whatever the caller left out.
toki::EmbeddingEnsemble ensemble_for_index(EnsembleArgs a, const toki::KeywordIndex& idx) {
    if (a.embeddings.empty()) a.embeddings = idx.params.embedding_paths;
    if (a.theta_relate.empty() && a.related_pairs.empty() && a.embeddings == idx.params.embedding_paths) {
        a.theta_relate = idx.params.thetas;
    }
    return load_ensemble(a);
}

void write_json(const std::string& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(1) << '\n';
        return;
    }
    std::ofstream out(path);
    if (!out) throw toki::Error("cannot write " + path);
    out << j.dump(1) << '\n';
}

// Pretty output goes to stdout unless the JSON report already uses it.
std::ostream& pretty_stream(const std::string& out_path) {
    return out_path.empty() || out_path == "-" ? std::cerr : std::cout;
}

// ANSI rendering of a document. Tone in [-1, 1]: green supports the
// prediction (or is related), red works against it (or is unrelated); the
// magnitude picks bold, plain or faint. Tokens without a tone stay dim.
std::string highlight(const std::vector<std::string>& tokens, const std::map<std::string, double>& tone) {
    std::string out;
    for (const auto& t : tokens) {
        if (!out.empty()) out += ' ';
        auto it = tone.find(t);
        if (it == tone.end() || it->second == 0.0) {
            out += "\x1b[2m" + t + "\x1b[0m";
            continue;
        }
        const double mag = std::abs(it->second);
        const char* weight = mag > 2.0 / 3.0 ? "1;" : (mag > 1.0 / 3.0 ? "" : "2;");
        out += std::string("\x1b[") + weight + (it->second > 0 ? "32m" : "31m") + t + "\x1b[0m";
    }
    return out;
}

json explanation_json(const toki::Explanation& e, const std::vector<std::string>& classes) {
    auto top = json::array();
    for (const auto& a : e.attributions) top.push_back(json::array({a.word, a.score}));
    return {{"class", classes.at(e.predicted_class)}, {"confidence", e.confidence}, {"top", top}};
}

// Flat "key = value" config. Keys are long flag names without dashes.
std::vector<std::pair<std::string, std::string>> read_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw toki::Error("cannot open config: " + path);
    std::vector<std::pair<std::string, std::string>> kv;
    std::string line;
    std::size_t lineno = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        if (b == std::string::npos) return std::string();
        const auto e = s.find_last_not_of(" \t\r");
        return s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++lineno;
        line = trim(line);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw toki::ParseError(path, lineno, "expected key = value");
        auto key = trim(line.substr(0, eq));
        auto value = trim(line.substr(eq + 1));
        if (value.size() >= 2 && value.front() == '"' && value.back() == '"') value = value.substr(1, value.size() - 2);
        while (key.rfind("-", 0) == 0) key.erase(0, 1);
        if (key.empty()) throw toki::ParseError(path, lineno, "empty key");
        kv.emplace_back(key, value);
    }
    return kv;
}

// Splices config entries into argv so that explicit flags, which come later,
// win under the take-last policy.
std::vector<std::string> expand_config(CLI::App& app, const std::vector<std::string>& args) {
    std::string config_path;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (args[i] == "--config" && i + 1 < args.size()) config_path = args[i + 1];
        else if (args[i].rfind("--config=", 0) == 0) config_path = args[i].substr(9);
    }
    if (config_path.empty()) return args;

    std::size_t sub_pos = args.size();
    CLI::App* sub = nullptr;
    for (std::size_t i = 0; i < args.size(); ++i) {
        if (auto* s = app.get_subcommand_no_throw(args[i])) {
            sub_pos = i;
            sub = s;
            break;
        }
    }
    std::vector<std::string> global, local;
    for (const auto& [key, value] : read_config(config_path)) {
        const std::string flag = "--" + key;
        if (key == "config") continue;
        if (app.get_option_no_throw(flag)) global.push_back(flag + "=" + value);
        else if (sub && sub->get_option_no_throw(flag)) local.push_back(flag + "=" + value);
        else if (key == "command" || key == "subcommand") continue;
        else throw toki::Error("config key '" + key + "' is not a flag of " + (sub ? sub->get_name() : std::string("the program")));
    }
    std::vector<std::string> out(args.begin(), args.begin() + static_cast<std::ptrdiff_t>(std::min(sub_pos, args.size())));
    out.insert(out.begin(), global.begin(), global.end());
    if (sub_pos < args.size()) {
        out.push_back(args[sub_pos]);
        out.insert(out.end(), local.begin(), local.end());
        out.insert(out.end(), args.begin() + static_cast<std::ptrdiff_t>(sub_pos) + 1, args.end());
    }
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Trustworthiness oracle for text-classifier predictions"};
    app.require_subcommand(1);
    app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

    Global g;
    app.add_option("--seed", g.seed, "Seed for sampling and LIME")->capture_default_str();
    app.add_option("--workers", g.workers, "Worker threads")->capture_default_str();
    app.add_option("--config", g.config, "Flat key = value file mirroring the flags");
    app.add_flag("--pretty", g.pretty, "Print ANSI word highlighting");

    // train
    auto* train = app.add_subcommand("train", "Train the reference bag-of-words model");
    std::string train_path, out_path;
    toki::TrainingConfig tcfg;
    train->add_option("--train", train_path, "Training dataset (JSONL)")->required();
    train->add_option("--out", out_path, "Model JSON to write")->required();
    train->add_option("--l2", tcfg.l2, "L2 penalty")->capture_default_str();
    train->add_option("--learning-rate", tcfg.learning_rate, "Step size (0 = automatic)")->capture_default_str();
    train->add_option("--epochs", tcfg.max_epochs, "Maximum full-batch epochs")->capture_default_str();
    train->add_option("--tolerance", tcfg.tolerance, "Stop when the loss improves less than this")->capture_default_str();

    // explain
    auto* expl = app.add_subcommand("explain", "Explain predictions");
    ModelArgs expl_model;
    ExplainArgs expl_args;
    std::string expl_input, expl_out;
    add_model_args(expl, expl_model);
    add_explain_args(expl, expl_args);
    expl->add_option("--input", expl_input, "Documents (dataset JSONL)")->required();
    expl->add_option("--out", expl_out, "Report path (default stdout)");

    // keywords
    auto* kw = app.add_subcommand("keywords", "Identify per-class keywords");
    ModelArgs kw_model;
    ExplainArgs kw_expl;
    EnsembleArgs kw_ens;
    std::string kw_train, kw_out;
    double theta_dist = 0.3;
    std::size_t sample = 2000;
    add_model_args(kw, kw_model);
    add_explain_args(kw, kw_expl);
    add_ensemble_args(kw, kw_ens);
    kw->add_option("--train", kw_train, "Training dataset (JSONL)")->required();
    kw->add_option("--theta-dist", theta_dist, "Clustering distance threshold")->capture_default_str();
    kw->add_option("--sample", sample, "Training instances to explain (0 = all)")->capture_default_str();
    kw->add_option("--out", kw_out, "KeywordIndex JSON to write")->required();

    // assess
    auto* as = app.add_subcommand("assess", "Label predictions trustworthy or untrustworthy");
    ModelArgs as_model;
    ExplainArgs as_expl;
    EnsembleArgs as_ens;
    std::string as_index, as_input, as_out, as_method = "toki";
    double theta_conf = 0.9;
    add_model_args(as, as_model);
    add_explain_args(as, as_expl);
    add_ensemble_args(as, as_ens);
    as->add_option("--index", as_index, "KeywordIndex JSON (toki method)");
    as->add_option("--input", as_input, "Documents (dataset JSONL)")->required();
    as->add_option("--method", as_method, "toki | naive | toki-no-ki")->capture_default_str();
    as->add_option("--theta-conf", theta_conf, "Naive confidence threshold")->capture_default_str();
    as->add_option("--out", as_out, "Report path (default stdout)");

    // attack
    auto* at = app.add_subcommand("attack", "Word-substitution attack on correct predictions");
    ModelArgs at_model;
    EnsembleArgs at_ens;
    std::string at_index, at_input, at_report, at_source = "toki", at_lexicon;
    toki::AttackConstraints ac;
    std::size_t n_candidates = 50;
    add_model_args(at, at_model);
    add_ensemble_args(at, at_ens);
    at->add_option("--index", at_index, "KeywordIndex JSON (toki source)");
    at->add_option("--source", at_source, "toki | lexicon")->capture_default_str();
    at->add_option("--lexicon", at_lexicon, "Synonym lexicon TSV (lexicon source)");
    at->add_option("--input", at_input, "Documents (dataset JSONL)")->required();
    at->add_option("--mod-rate", ac.modification_rate, "Max fraction of tokens substituted")->capture_default_str();
    at->add_option("--min-sent-sim", ac.min_sentence_sim, "Minimum sentence similarity")->capture_default_str();
    at->add_option("--min-word-sim", ac.min_word_sim, "Minimum word cosine similarity")->capture_default_str();
    at->add_flag("--pos-check", ac.pos_check, "Require matching suffix-based part of speech");
    at->add_option("--candidates", n_candidates, "Candidates per word (toki source)")->capture_default_str();
    at->add_option("--report", at_report, "Report path (default stdout)");

    // bench
    auto* be = app.add_subcommand("bench", "Compare oracle methods against trust labels");
    ModelArgs be_model;
    ExplainArgs be_expl;
    EnsembleArgs be_ens;
    std::string be_train, be_test, be_report, be_timing, be_index_out;
    std::vector<std::string> be_labels, be_methods{"toki", "naive", "toki-no-ki"};
    double be_theta_dist = 0.3, be_theta_conf = 0.9;
    std::size_t be_sample = 2000;
    add_model_args(be, be_model);
    add_explain_args(be, be_expl);
    add_ensemble_args(be, be_ens);
    be->add_option("--train", be_train, "Training dataset (JSONL)")->required();
    be->add_option("--test", be_test, "Test dataset (JSONL)")->required();
    be->add_option("--labels", be_labels, "Trust-label JSONL files, comma separated (merged by plurality)")
        ->delimiter(',')
        ->required();
    be->add_option("--methods", be_methods, "Methods, comma separated")->delimiter(',');
    be->add_option("--theta-dist", be_theta_dist, "Clustering distance threshold")->capture_default_str();
    be->add_option("--theta-conf", be_theta_conf, "Naive confidence threshold")->capture_default_str();
    be->add_option("--sample", be_sample, "Training instances to explain (0 = all)")->capture_default_str();
    be->add_option("--report", be_report, "Report path (default stdout)");
    be->add_option("--timing-out", be_timing, "Wall-clock timing JSON (kept out of the report)");
    be->add_option("--index-out", be_index_out, "Also write the keyword index");

    std::vector<std::string> args(argv + 1, argv + argc);
    try {
        args = expand_config(app, args);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (g.workers == 0) g.workers = std::max(1u, std::thread::hardware_concurrency());

        if (*train) {
            tcfg.seed = g.seed;
            const auto data = toki::load_dataset(train_path);
            const auto model = toki::train(data, tcfg);
            toki::save_model(out_path, model);
            write_json("", {{"schema_version", kSchemaVersion},
                            {"model", out_path},
                            {"classes", data.class_names},
                            {"documents", data.size()},
                            {"vocabulary", model.num_features()},
                            {"training_accuracy", model.training_accuracy()}});
        } else if (*expl) {
            const auto predictor = open_predictor(expl_model);
            const auto cfg = explainer_config(expl_args);
            const auto data = toki::load_dataset(expl_input);
            std::vector<std::optional<toki::Explanation>> exps(data.size());
            toki::parallel_for(data.size(), g.workers, [&](std::size_t i) {
                const auto& doc = data.documents[i];
                if (!doc.tokens.empty()) exps[i] = toki::explain(*predictor, doc, cfg, toki::document_seed(g.seed, doc));
            });
            auto rows = json::array();
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& doc = data.documents[i];
                if (!exps[i]) {
                    rows.push_back({{"doc_id", doc.id}, {"error", "document has no tokens"}});
                    continue;
                }
                auto row = explanation_json(*exps[i], predictor->class_names());
                row["doc_id"] = doc.id;
                rows.push_back(row);
                if (g.pretty) {
                    std::map<std::string, double> tone;
                    double top = 0.0;
                    for (const auto& a : exps[i]->attributions) top = std::max(top, std::abs(a.score));
                    for (const auto& a : exps[i]->attributions) tone[a.word] = top > 0 ? a.score / top : 0.0;
                    pretty_stream(expl_out) << doc.id << " [" << predictor->class_names()[exps[i]->predicted_class]
                                            << "] " << highlight(doc.tokens, tone) << '\n';
                }
            }
            write_json(expl_out, {{"schema_version", kSchemaVersion},
                                  {"explainer", toki::to_string(cfg.kind)},
                                  {"k", cfg.k},
                                  {"seed", g.seed},
                                  {"explanations", rows}});
        } else if (*kw) {
            const auto predictor = open_predictor(kw_model);
            const auto data = toki::load_dataset(kw_train);
            if (data.class_names != predictor->class_names()) {
                throw toki::Error("dataset classes differ from the classifier's classes");
            }
            json theta_log = json::array();
            const auto ens = load_ensemble(kw_ens, &theta_log);
            auto idx = toki::identify_keywords(*predictor, data, explainer_config(kw_expl), ens, theta_dist, sample,
                                               g.seed, g.workers);
            idx.params.embedding_paths = kw_ens.embeddings;
            toki::save_keyword_index(kw_out, idx);
            json summary{{"schema_version", kSchemaVersion}, {"index", kw_out}, {"theta_estimates", theta_log},
                         {"warnings", idx.warnings}};
            for (const auto& c : idx.classes) {
                summary["classes"][c.class_name] = {{"explanations", c.n_explanations},
                                                    {"keywords", c.keywords.size()},
                                                    {"non_keywords", c.non_keywords.size()}};
            }
            write_json("", summary);
        } else if (*as) {
            const auto predictor = open_predictor(as_model);
            const auto method = toki::parse_method(as_method);
            const auto data = toki::load_dataset(as_input);
            std::optional<toki::KeywordIndex> idx;
            std::optional<toki::EmbeddingEnsemble> ens;
            auto expl_cfg = explainer_config(as_expl);
            if (method == toki::OracleMethod::toki) {
                if (as_index.empty()) throw toki::Error("--index is required for method toki");
                idx = toki::load_keyword_index(as_index);
                if (idx->class_names() != predictor->class_names()) throw toki::Error("index classes differ from the classifier's");
                // Explain the way the index was built unless told otherwise.
                if (!as->count("--explainer")) expl_cfg.kind = toki::parse_explainer(idx->params.explainer);
                if (!as->count("--k")) expl_cfg.k = idx->params.k;
                if (!as->count("--lime-samples")) expl_cfg.lime.n_samples = idx->params.lime_samples;
                ens = ensemble_for_index(as_ens, *idx);
            } else if (method == toki::OracleMethod::toki_no_ki) {
                if (!as_index.empty()) {
                    idx = toki::load_keyword_index(as_index);
                    ens = ensemble_for_index(as_ens, *idx);
                } else {
                    ens = load_ensemble(as_ens);
                }
            }
            std::vector<std::string> texts;
            for (const auto& d : data.documents) texts.push_back(toki::join_tokens(d.tokens));
            const auto preds = predictor->predict_proba(texts);
            std::vector<std::optional<toki::TrustVerdict>> verdicts(data.size());
            std::vector<std::string> skipped(data.size());
            toki::parallel_for(data.size(), g.workers, [&](std::size_t i) {
                const auto& doc = data.documents[i];
                const auto y = data.labels[i];
                if (doc.tokens.empty()) {
                    skipped[i] = "document has no tokens";
                    return;
                }
                if (preds[i].argmax() != y) {
                    skipped[i] = "incorrect prediction";
                    return;
                }
                if (method == toki::OracleMethod::naive) {
                    verdicts[i] = toki::naive_assess(preds[i].confidence(), theta_conf);
                    return;
                }
                const auto e = toki::explain(*predictor, doc, expl_cfg, toki::document_seed(g.seed, doc));
                if (e.attributions.empty()) {
                    skipped[i] = "empty explanation";
                    return;
                }
                verdicts[i] = method == toki::OracleMethod::toki
                                  ? toki::assess(e, y, *idx, *ens)
                                  : toki::assess_no_ki(e, y, data.class_names[y], *ens);
            });
            auto rows = json::array();
            auto skips = json::array();
            std::size_t n_trust = 0;
            for (std::size_t i = 0; i < data.size(); ++i) {
                const auto& doc = data.documents[i];
                if (!verdicts[i]) {
                    skips.push_back({{"doc_id", doc.id}, {"reason", skipped[i]}});
                    continue;
                }
                n_trust += verdicts[i]->trustworthy();
                rows.push_back(verdicts[i]->to_json(doc.id));
                if (g.pretty) {
                    std::map<std::string, double> tone;
                    for (const auto& w : verdicts[i]->words) {
                        if (w.counted) tone[w.word] = w.related ? 1.0 : -1.0;
                    }
                    pretty_stream(as_out) << doc.id << " [" << toki::to_string(verdicts[i]->label) << "] "
                                          << highlight(doc.tokens, tone) << '\n';
                }
            }
            write_json(as_out, {{"schema_version", kSchemaVersion},
                                {"method", toki::to_string(method)},
                                {"explainer", method == toki::OracleMethod::naive ? json(nullptr) : json(toki::to_string(expl_cfg.kind))},
                                {"seed", g.seed},
                                {"assessed", rows.size()},
                                {"trustworthy", n_trust},
                                {"verdicts", rows},
                                {"skipped", skips}});
        } else if (*at) {
            const auto predictor = open_predictor(at_model);
            const auto data = toki::load_dataset(at_input);
            std::optional<toki::KeywordIndex> idx;
            if (!at_index.empty()) idx = toki::load_keyword_index(at_index);
            const auto ens = idx ? ensemble_for_index(at_ens, *idx) : load_ensemble(at_ens);
            toki::SynonymLexicon lex;
            toki::SubstituteSource source;
            if (at_source == "toki") {
                if (!idx) throw toki::Error("--index is required for the toki source");
                source = toki::toki_source(*idx, ens, ac.min_word_sim, n_candidates);
            } else if (at_source == "lexicon") {
                if (at_lexicon.empty()) throw toki::Error("--lexicon is required for the lexicon source");
                lex = toki::load_lexicon(at_lexicon);
                source = toki::lexicon_source(lex, ens, ac.min_word_sim);
            } else {
                throw toki::Error("unknown source '" + at_source + "' (expected toki|lexicon)");
            }
            std::vector<std::string> texts;
            for (const auto& d : data.documents) texts.push_back(toki::join_tokens(d.tokens));
            const auto preds = predictor->predict_proba(texts);
            std::vector<std::optional<toki::AttackResult>> results(data.size());
            toki::parallel_for(data.size(), g.workers, [&](std::size_t i) {
                if (data.documents[i].tokens.empty() || preds[i].argmax() != data.labels[i]) return;
                results[i] = toki::run_attack(*predictor, data.documents[i], source, ac, ens);
            });
            std::vector<toki::AttackResult> done;
            auto rows = json::array();
            for (std::size_t i = 0; i < data.size(); ++i) {
                if (!results[i]) continue;
                rows.push_back(results[i]->to_json(data.documents[i].id));
                done.push_back(*results[i]);
                if (g.pretty && results[i]->success) {
                    std::map<std::string, double> tone;
                    for (const auto& s : results[i]->substitutions) tone[s.new_word] = -1.0;
                    pretty_stream(at_report) << data.documents[i].id << ": "
                                             << highlight(results[i]->adversarial_tokens, tone) << '\n';
                }
            }
            write_json(at_report, {{"schema_version", kSchemaVersion},
                                   {"source", at_source},
                                   {"constraints", {{"mod_rate", ac.modification_rate},
                                                    {"min_sent_sim", ac.min_sentence_sim},
                                                    {"min_word_sim", ac.min_word_sim},
                                                    {"pos_check", ac.pos_check},
                                                    {"sentence_scorer", "mean-embedding cosine"}}},
                                   {"summary", toki::summarize_attacks(done).to_json()},
                                   {"results", rows}});
        } else if (*be) {
            const auto train_data = toki::load_dataset(be_train);
            const auto test_data = toki::load_dataset(be_test);
            std::vector<toki::TrustLabels> annotators;
            for (const auto& p : be_labels) annotators.push_back(toki::load_trust_labels(p));
            const auto labels = annotators.size() == 1 ? annotators[0] : toki::merge_annotations(annotators);
            std::unique_ptr<toki::Predictor> predictor;
            if (be_model.model.empty() && be_model.plugin.empty()) {
                toki::TrainingConfig cfg;
                cfg.seed = g.seed;
                predictor = std::make_unique<toki::LinearTextModel>(toki::train(train_data, cfg));
            } else {
                predictor = open_predictor(be_model);
            }
            std::optional<toki::EmbeddingEnsemble> ens;
            if (!be_ens.embeddings.empty()) ens = load_ensemble(be_ens);
            toki::BenchOptions opt;
            opt.explainer = explainer_config(be_expl);
            opt.theta_dist = be_theta_dist;
            opt.theta_conf = be_theta_conf;
            opt.sample_limit = be_sample;
            opt.seed = g.seed;
            opt.workers = g.workers;
            opt.methods.clear();
            for (const auto& m : be_methods) opt.methods.push_back(toki::parse_method(m));
            auto res = toki::run_benchmark(*predictor, train_data, test_data, labels, ens ? &*ens : nullptr, opt);
            if (ens) res.report["config"]["theta_relate"] = ens->thetas;
            write_json(be_report, res.report);
            if (!be_timing.empty()) write_json(be_timing, {{"schema_version", kSchemaVersion}, {"timing", res.timing.to_json()}});
            if (!be_index_out.empty() && res.index) {
                res.index->params.embedding_paths = be_ens.embeddings;
                toki::save_keyword_index(be_index_out, *res.index);
            }
            if (g.pretty) {
                auto& os = pretty_stream(be_report);
                for (const auto& [name, m] : res.report["methods"].items()) {
                    if (m.contains("metrics")) {
                        os << "\x1b[1m" << name << "\x1b[0m  G-mean " << m["metrics"]["g_mean"].get<double>() << "  F1 "
                           << m["metrics"]["f1"].get<double>() << '\n';
                    } else {
                        os << "\x1b[1m" << name << "\x1b[0m  \x1b[31m" << m.value("error", std::string("?")) << "\x1b[0m\n";
                    }
                }
            }
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
