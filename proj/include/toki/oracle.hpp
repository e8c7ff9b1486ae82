#pragma once

#include <algorithm>
#include <cstddef>
#include <limits>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "toki/embed.hpp"
#include "toki/explain.hpp"
#include "toki/keywords.hpp"

namespace toki {

enum class TrustLabel { trustworthy, untrustworthy };
enum class OracleMethod { toki, naive, toki_no_ki };

inline const char* to_string(TrustLabel l) {
    return l == TrustLabel::trustworthy ? "trustworthy" : "untrustworthy";
}

inline TrustLabel parse_trust_label(const std::string& s) {
    if (s == "trustworthy") return TrustLabel::trustworthy;
    if (s == "untrustworthy") return TrustLabel::untrustworthy;
    throw Error("unknown trust label '" + s + "'");
}

inline const char* to_string(OracleMethod m) {
    switch (m) {
        case OracleMethod::toki: return "toki";
        case OracleMethod::naive: return "naive";
        case OracleMethod::toki_no_ki: return "toki-no-ki";
    }
    return "?";
}

inline OracleMethod parse_method(const std::string& s) {
    if (s == "toki") return OracleMethod::toki;
    if (s == "naive") return OracleMethod::naive;
    if (s == "toki-no-ki" || s == "toki_no_ki") return OracleMethod::toki_no_ki;
    throw Error("unknown method '" + s + "' (expected toki|naive|toki-no-ki)");
}

struct WordEvidence {
    std::string word;
    double score = 0.0;
    bool related = false;
    std::vector<int> votes;  // per store
    bool counted = false;    // only positive scores enter IS_rel / IS_unr
};

struct TrustVerdict {
    TrustLabel label = TrustLabel::untrustworthy;
    double is_rel = 0.0;
    double is_unr = 0.0;
    std::vector<WordEvidence> words;
    OracleMethod method = OracleMethod::toki;
    std::optional<double> confidence;

    bool trustworthy() const { return label == TrustLabel::trustworthy; }

    nlohmann::json to_json(const std::string& doc_id) const {
        nlohmann::json out{{"doc_id", doc_id}, {"method", to_string(method)}, {"label", to_string(label)}};
        if (method == OracleMethod::naive) {
            out["confidence"] = confidence.value_or(0.0);
            return out;
        }
        out["is_rel"] = is_rel;
        out["is_unr"] = is_unr;
        auto arr = nlohmann::json::array();
        for (const auto& w : words) {
            arr.push_back({{"w", w.word}, {"s", w.score}, {"related", w.related}, {"votes", w.votes}, {"counted", w.counted}});
        }
        out["words"] = std::move(arr);
        return out;
    }
};

// 1 iff the most similar pool word to `word` is a keyword (ties go to the
// keywords). Pool words missing from the store are not candidates.
inline int relatedness_indicator(const std::string& word, const ClassKeywords& cls, const EmbeddingStore& store) {
    const auto q = store.find(word);
    if (!q) return 0;
    auto best_over = [&](const std::set<std::string>& words) {
        double best = -std::numeric_limits<double>::infinity();
        for (const auto& w : words) {
            if (auto v = store.find(w)) best = std::max(best, clamp_unit(dot(*q, *v)));
        }
        return best;
    };
    const double k_best = best_over(cls.keywords);
    if (k_best == -std::numeric_limits<double>::infinity()) return 0;
    return k_best >= best_over(cls.non_keywords) ? 1 : 0;
}

inline int relatedness_indicator(const std::string& word, ClassId cls, const KeywordIndex& index,
                                 const EmbeddingStore& store) {
    return relatedness_indicator(word, index.at(cls), store);
}

// Plurality over the ensemble of the per-store indicator.
inline bool related_by_vote(const std::string& word, const ClassKeywords& cls, const EmbeddingEnsemble& ensemble) {
    std::vector<bool> votes;
    for (const auto& store : ensemble.stores) votes.push_back(relatedness_indicator(word, cls, store) == 1);
    return plurality_vote(votes);
}

namespace detail {

inline TrustVerdict tally(std::vector<WordEvidence> words, OracleMethod method) {
    TrustVerdict v;
    v.method = method;
    for (auto& w : words) {
        w.related = plurality_vote(std::vector<bool>(w.votes.begin(), w.votes.end()));
        w.counted = w.score > 0.0;
        if (!w.counted) continue;
        (w.related ? v.is_rel : v.is_unr) += w.score;
    }
    v.words = std::move(words);
    v.label = v.is_rel >= v.is_unr ? TrustLabel::trustworthy : TrustLabel::untrustworthy;
    return v;
}

inline void check_assessable(const Explanation& e, ClassId cls) {
    if (e.attributions.empty()) throw Error("assess: empty explanation carries no evidence");
    if (e.predicted_class != cls) throw Error("assess: explanation predicts a different class than the one assessed");
}

}  // namespace detail

inline TrustVerdict assess(const Explanation& e, ClassId cls, const KeywordIndex& index,
                           const EmbeddingEnsemble& ensemble) {
    ensemble.validate();
    detail::check_assessable(e, cls);
    const auto& ck = index.at(cls);
    std::vector<WordEvidence> words;
    for (const auto& a : e.attributions) {
        WordEvidence w{a.word, a.score, false, {}, false};
        for (const auto& store : ensemble.stores) w.votes.push_back(relatedness_indicator(a.word, ck, store));
        words.push_back(std::move(w));
    }
    return detail::tally(std::move(words), OracleMethod::toki);
}

// Ablation without keyword identification: compare each word to the class
// name directly against each store's theta_relate.
inline TrustVerdict assess_no_ki(const Explanation& e, ClassId cls, const std::string& class_name,
                                 const EmbeddingEnsemble& ensemble) {
    ensemble.validate();
    detail::check_assessable(e, cls);
    std::vector<std::optional<std::vector<double>>> anchors;
    for (const auto& store : ensemble.stores) anchors.push_back(embed_phrase(store, class_name));
    std::vector<WordEvidence> words;
    for (const auto& a : e.attributions) {
        WordEvidence w{a.word, a.score, false, {}, false};
        for (std::size_t s = 0; s < ensemble.size(); ++s) {
            const auto v = ensemble.stores[s].find(a.word);
            const bool rel = v && anchors[s] && clamp_unit(dot(*v, *anchors[s])) >= ensemble.thetas[s];
            w.votes.push_back(rel ? 1 : 0);
        }
        words.push_back(std::move(w));
    }
    return detail::tally(std::move(words), OracleMethod::toki_no_ki);
}

// Untrustworthy iff confidence is strictly below the threshold.
inline TrustVerdict naive_assess(double confidence, double theta_conf = 0.9) {
    TrustVerdict v;
    v.method = OracleMethod::naive;
    v.confidence = confidence;
    v.label = confidence < theta_conf ? TrustLabel::untrustworthy : TrustLabel::trustworthy;
    return v;
}

}  // namespace toki
