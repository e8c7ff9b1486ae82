#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "toki/classifier.hpp"
#include "toki/corpus.hpp"
#include "toki/embed.hpp"
#include "toki/explain.hpp"
#include "toki/keywords.hpp"
#include "toki/oracle.hpp"

namespace toki {

struct AttackConstraints {
    double modification_rate = 0.1;
    double min_sentence_sim = 0.9;
    double min_word_sim = 0.5;
    bool pos_check = false;

    std::size_t budget(std::size_t n_tokens) const {
        return static_cast<std::size_t>(std::ceil(modification_rate * static_cast<double>(n_tokens) - 1e-9));
    }
};

struct Substitution {
    std::size_t position = 0;
    std::string old_word;
    std::string new_word;
};

struct AttackResult {
    bool success = false;
    std::vector<std::string> original_tokens;
    std::vector<std::string> adversarial_tokens;
    std::vector<Substitution> substitutions;
    std::size_t queries = 0;
    double sentence_sim = 1.0;
    ClassId original_class = 0;
    ClassId final_class = 0;
    double original_prob = 0.0;
    double final_prob = 0.0;
    bool fallback_ranking = false;

    std::size_t perturbations() const { return substitutions.size(); }

    nlohmann::json to_json(const std::string& doc_id) const {
        auto subs = nlohmann::json::array();
        for (const auto& s : substitutions) subs.push_back({{"pos", s.position}, {"old", s.old_word}, {"new", s.new_word}});
        return {{"doc_id", doc_id},
                {"success", success},
                {"original", join_tokens(original_tokens)},
                {"adversarial", join_tokens(adversarial_tokens)},
                {"substitutions", subs},
                {"queries", queries},
                {"sentence_sim", sentence_sim},
                {"original_class", original_class},
                {"final_class", final_class},
                {"fallback_ranking", fallback_ranking}};
    }
};

struct RankedToken {
    std::size_t position = 0;
    std::string token;
    double score = 0.0;
    bool in_vocabulary = true;
};

struct AttackRanking {
    std::vector<RankedToken> order;
    bool fallback = false;  // omission scores used for a black-box predictor
};

// Descending importance toward the predicted class; out-of-vocabulary tokens
// last; ties keep token order.
inline AttackRanking rank_attack_words(const Predictor& predictor, const Document& doc) {
    AttackRanking out;
    if (doc.tokens.empty()) return out;
    std::vector<double> scores(doc.tokens.size(), 0.0);
    std::vector<bool> known(doc.tokens.size(), true);
    if (const auto* grads = predictor.gradients()) {
        const ClassId y = predictor.predict_one(join_tokens(doc.tokens)).argmax();
        scores = grads->token_gradients(doc.tokens, y);
        for (std::size_t i = 0; i < doc.tokens.size(); ++i) known[i] = grads->has_feature(doc.tokens[i]);
    } else {
        out.fallback = true;
        const auto e = explain_omission(predictor, doc, std::numeric_limits<std::size_t>::max());
        std::unordered_map<std::string, double> by_word;
        for (const auto& a : e.attributions) by_word[a.word] = a.score;
        for (std::size_t i = 0; i < doc.tokens.size(); ++i) scores[i] = by_word[doc.tokens[i]];
    }
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) out.order.push_back({i, doc.tokens[i], scores[i], known[i]});
    std::stable_sort(out.order.begin(), out.order.end(), [](const RankedToken& a, const RankedToken& b) {
        if (a.in_vocabulary != b.in_vocabulary) return a.in_vocabulary;
        return a.score > b.score;
    });
    return out;
}

// Word similarity across the ensemble: plurality of per-store cosine >= threshold.
inline bool similar_words(const EmbeddingEnsemble& ensemble, const std::string& a, const std::string& b,
                          double min_sim) {
    std::vector<bool> votes;
    for (const auto& store : ensemble.stores) {
        const auto c = cosine(store, a, b);
        votes.push_back(c && *c >= min_sim);
    }
    return plurality_vote(votes);
}

// Related words give way to weakly correlated keywords of their own class;
// unrelated words to strongly correlated non-keywords of other classes.
inline std::vector<std::string> toki_substitutes(const std::string& word, ClassId orig_class,
                                                 const KeywordIndex& index, const EmbeddingEnsemble& ensemble,
                                                 double min_word_sim, std::size_t n_candidates = 50) {
    struct Cand {
        std::string word;
        double mean_score;
    };
    std::vector<Cand> cands;
    const auto& own = index.at(orig_class);
    const bool related = related_by_vote(word, own, ensemble);
    if (related) {
        for (const auto& w : own.keywords) {
            if (w != word && similar_words(ensemble, word, w, min_word_sim)) cands.push_back({w, own.pool.entries.at(w).mean_score});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.mean_score < b.mean_score; });
    } else {
        std::map<std::string, double> best;
        for (ClassId c = 0; c < index.classes.size(); ++c) {
            if (c == orig_class) continue;
            const auto& other = index.at(c);
            for (const auto& w : other.non_keywords) {
                const double s = other.pool.entries.at(w).mean_score;
                auto [it, fresh] = best.emplace(w, s);
                if (!fresh) it->second = std::max(it->second, s);
            }
        }
        for (const auto& [w, s] : best) {
            if (w != word && similar_words(ensemble, word, w, min_word_sim)) cands.push_back({w, s});
        }
        std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) { return a.mean_score > b.mean_score; });
    }
    std::vector<std::string> out;
    for (const auto& c : cands) {
        if (out.size() >= n_candidates) break;
        out.push_back(c.word);
    }
    return out;
}

using SynonymLexicon = std::map<std::string, std::vector<std::string>>;

// word<TAB>syn1,syn2,...
inline SynonymLexicon read_lexicon(std::istream& in, const std::string& source = "<stream>") {
    SynonymLexicon lex;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0) throw ParseError(source, lineno, "expected word<TAB>syn1,syn2,...");
        auto& syns = lex[EmbeddingStore::key(line.substr(0, tab))];
        std::string rest = line.substr(tab + 1);
        std::size_t start = 0;
        while (start <= rest.size()) {
            const auto comma = rest.find(',', start);
            const auto item = rest.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
            if (!item.empty()) syns.push_back(EmbeddingStore::key(item));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
    }
    return lex;
}

inline SynonymLexicon load_lexicon(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open lexicon: " + path);
    return read_lexicon(in, path);
}

inline std::vector<std::string> lexicon_substitutes(const std::string& word, const SynonymLexicon& lexicon,
                                                    const EmbeddingEnsemble& ensemble, double min_word_sim) {
    std::vector<std::string> out;
    auto it = lexicon.find(word);
    if (it == lexicon.end()) return out;
    for (const auto& s : it->second) {
        if (s != word && similar_words(ensemble, word, s, min_word_sim)) out.push_back(s);
    }
    return out;
}

// Mean-embedding cosine mapped to [0, 1]. Identical lists score 1; a side
// with no in-vocabulary token scores 0.
inline double sentence_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                  const EmbeddingStore& store) {
    if (a == b) return 1.0;
    const auto va = embed_tokens(store, a);
    const auto vb = embed_tokens(store, b);
    if (!va || !vb) return 0.0;
    return (clamp_unit(dot(*va, *vb)) + 1.0) / 2.0;
}

inline double sentence_similarity(const std::vector<std::string>& a, const std::vector<std::string>& b,
                                  const EmbeddingEnsemble& ensemble) {
    double total = 0.0;
    for (const auto& store : ensemble.stores) total += sentence_similarity(a, b, store);
    return total / static_cast<double>(ensemble.size());
}

enum class PosClass { adverb, verb, plural, other };

// Suffix heuristic; a stand-in for a real tagger.
inline PosClass pos_class(const std::string& w) {
    auto ends = [&](const char* suf) {
        const std::string s(suf);
        return w.size() > s.size() + 1 && w.compare(w.size() - s.size(), s.size(), s) == 0;
    };
    if (ends("ly")) return PosClass::adverb;
    if (ends("ing") || ends("ed")) return PosClass::verb;
    if (ends("s") && !ends("ss")) return PosClass::plural;
    return PosClass::other;
}

using SubstituteSource = std::function<std::vector<std::string>(const std::string& word, ClassId orig_class)>;

inline SubstituteSource toki_source(const KeywordIndex& index, const EmbeddingEnsemble& ensemble, double min_word_sim,
                                    std::size_t n_candidates = 50) {
    return [&index, &ensemble, min_word_sim, n_candidates](const std::string& w, ClassId c) {
        return toki_substitutes(w, c, index, ensemble, min_word_sim, n_candidates);
    };
}

inline SubstituteSource lexicon_source(const SynonymLexicon& lexicon, const EmbeddingEnsemble& ensemble,
                                       double min_word_sim) {
    return [&lexicon, &ensemble, min_word_sim](const std::string& w, ClassId) {
        return lexicon_substitutes(w, lexicon, ensemble, min_word_sim);
    };
}

// Greedy substitution in ranked order. A candidate is accepted when it keeps
// sentence similarity, passes the POS check (if on) and strictly lowers the
// original class's probability. Stops as soon as the argmax changes.
inline AttackResult run_attack(const Predictor& predictor, const Document& doc, const SubstituteSource& source,
                               const AttackConstraints& constraints, const EmbeddingEnsemble& ensemble) {
    ensemble.validate();
    AttackResult r;
    r.original_tokens = doc.tokens;
    r.adversarial_tokens = doc.tokens;
    if (doc.tokens.empty()) return r;

    const auto start = predictor.predict_one(join_tokens(doc.tokens));
    ++r.queries;
    r.original_class = r.final_class = start.argmax();
    r.original_prob = r.final_prob = start.probs[r.original_class];
    const ClassId y = r.original_class;

    const auto ranking = rank_attack_words(predictor, doc);
    r.fallback_ranking = ranking.fallback;
    if (ranking.fallback) r.queries += doc.distinct_tokens().size() + 1;

    const std::size_t budget = constraints.budget(doc.tokens.size());
    for (const auto& ranked : ranking.order) {
        if (r.substitutions.size() >= budget || r.success) break;
        const std::string& current = r.adversarial_tokens[ranked.position];
        std::vector<std::vector<std::string>> trials;
        std::vector<std::string> trial_words;
        for (const auto& cand : source(current, y)) {
            if (cand == current) continue;
            if (constraints.pos_check && pos_class(cand) != pos_class(current)) continue;
            auto perturbed = r.adversarial_tokens;
            perturbed[ranked.position] = cand;
            if (sentence_similarity(r.original_tokens, perturbed, ensemble) < constraints.min_sentence_sim) continue;
            trials.push_back(std::move(perturbed));
            trial_words.push_back(cand);
        }
        if (trials.empty()) continue;
        std::vector<std::string> texts;
        for (const auto& t : trials) texts.push_back(join_tokens(t));
        const auto dists = predictor.predict_proba(texts);
        r.queries += texts.size();
        for (std::size_t i = 0; i < trials.size(); ++i) {
            if (!(dists[i].probs[y] < r.final_prob)) continue;
            r.substitutions.push_back({ranked.position, current, trial_words[i]});
            r.adversarial_tokens = std::move(trials[i]);
            r.final_prob = dists[i].probs[y];
            r.final_class = dists[i].argmax();
            r.success = r.final_class != y;
            break;
        }
    }
    r.sentence_sim = sentence_similarity(r.original_tokens, r.adversarial_tokens, ensemble);
    return r;
}

// Post-hoc re-check of an attack result. Returns the violated constraints.
inline std::vector<std::string> validate_attack(const AttackResult& r, const Predictor& predictor,
                                                const AttackConstraints& c, const EmbeddingEnsemble& ensemble) {
    std::vector<std::string> problems;
    if (r.substitutions.size() > c.budget(r.original_tokens.size())) problems.push_back("perturbation budget exceeded");
    auto rebuilt = r.original_tokens;
    std::vector<bool> touched(rebuilt.size(), false);
    for (const auto& s : r.substitutions) {
        if (s.position >= rebuilt.size()) {
            problems.push_back("substitution position out of range");
            continue;
        }
        if (touched[s.position]) problems.push_back("position substituted twice");
        touched[s.position] = true;
        if (rebuilt[s.position] != s.old_word) problems.push_back("substitution old word mismatch");
        if (!similar_words(ensemble, s.old_word, s.new_word, c.min_word_sim)) problems.push_back("word similarity below minimum: " + s.old_word + "->" + s.new_word);
        if (c.pos_check && pos_class(s.old_word) != pos_class(s.new_word)) problems.push_back("part-of-speech mismatch");
        rebuilt[s.position] = s.new_word;
    }
    if (rebuilt != r.adversarial_tokens) problems.push_back("adversarial text does not match substitutions");
    if (!r.substitutions.empty() && sentence_similarity(r.original_tokens, r.adversarial_tokens, ensemble) < c.min_sentence_sim) {
        problems.push_back("sentence similarity below minimum");
    }
    const auto orig = predictor.predict_one(join_tokens(r.original_tokens)).argmax();
    const auto adv = predictor.predict_one(join_tokens(r.adversarial_tokens)).argmax();
    if (r.success && adv == orig) problems.push_back("reported success but prediction unchanged");
    if (!r.success && adv != orig) problems.push_back("prediction changed but not reported as success");
    return problems;
}

struct AttackSummary {
    std::size_t attacks = 0;
    std::size_t successes = 0;
    double asr = 0.0;
    double mean_np_success = 0.0;
    double mean_np = 0.0;
    double mean_sentence_sim_success = 0.0;
    double mean_queries = 0.0;

    nlohmann::json to_json() const {
        return {{"attacks", attacks},
                {"successes", successes},
                {"asr", asr},
                {"mean_np_success", mean_np_success},
                {"mean_np", mean_np},
                {"mean_sentence_sim_success", mean_sentence_sim_success},
                {"mean_queries", mean_queries}};
    }
};

inline AttackSummary summarize_attacks(const std::vector<AttackResult>& results) {
    AttackSummary s;
    s.attacks = results.size();
    double np = 0.0, np_ok = 0.0, sim_ok = 0.0, q = 0.0;
    for (const auto& r : results) {
        np += static_cast<double>(r.perturbations());
        q += static_cast<double>(r.queries);
        if (!r.success) continue;
        ++s.successes;
        np_ok += static_cast<double>(r.perturbations());
        sim_ok += r.sentence_sim;
    }
    if (s.attacks) {
        s.asr = static_cast<double>(s.successes) / static_cast<double>(s.attacks);
        s.mean_np = np / static_cast<double>(s.attacks);
        s.mean_queries = q / static_cast<double>(s.attacks);
    }
    if (s.successes) {
        s.mean_np_success = np_ok / static_cast<double>(s.successes);
        s.mean_sentence_sim_success = sim_ok / static_cast<double>(s.successes);
    }
    return s;
}

}  // namespace toki
