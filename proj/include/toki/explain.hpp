#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <unordered_map>
#include <vector>

#include "toki/classifier.hpp"
#include "toki/corpus.hpp"
#include "toki/detail/linalg.hpp"
#include "toki/error.hpp"

namespace toki {

struct Attribution {
    std::string word;
    double score = 0.0;
    bool operator==(const Attribution&) const = default;
};

// Local explanation of one prediction: the top-k words by signed score,
// descending, ties kept in first-occurrence order.
struct Explanation {
    ClassId predicted_class = 0;
    double confidence = 0.0;
    std::vector<Attribution> attributions;
    std::size_t k = 0;
};

enum class ExplainerKind { lime, omission, gradient };

inline ExplainerKind parse_explainer(const std::string& name) {
    if (name == "lime") return ExplainerKind::lime;
    if (name == "omission" || name == "omis") return ExplainerKind::omission;
    if (name == "gradient" || name == "grad") return ExplainerKind::gradient;
    throw Error("unknown explainer '" + name + "' (expected lime|omission|gradient)");
}

inline const char* to_string(ExplainerKind k) {
    switch (k) {
        case ExplainerKind::lime: return "lime";
        case ExplainerKind::omission: return "omission";
        case ExplainerKind::gradient: return "gradient";
    }
    return "?";
}

struct LimeConfig {
    int n_samples = 5000;
    double kernel_width = 0.5;
    double ridge = 1.0;
    // Use every mask over the distinct tokens instead of sampling.
    bool enumerate_all = false;
};

struct ExplainerConfig {
    ExplainerKind kind = ExplainerKind::lime;
    std::size_t k = 10;
    LimeConfig lime;
};

namespace detail {

inline std::vector<Attribution> top_k(const std::vector<std::string>& words,
                                      const std::vector<double>& scores, std::size_t k) {
    std::vector<Attribution> all;
    all.reserve(words.size());
    for (std::size_t i = 0; i < words.size(); ++i) all.push_back({words[i], scores[i]});
    std::stable_sort(all.begin(), all.end(),
                     [](const Attribution& a, const Attribution& b) { return a.score > b.score; });
    if (all.size() > k) all.resize(k);
    return all;
}

inline std::string masked_text(const std::vector<std::string>& tokens,
                               const std::unordered_map<std::string, std::size_t>& slot,
                               const std::vector<std::uint8_t>& mask) {
    std::string out;
    for (const auto& t : tokens) {
        if (!mask[slot.at(t)]) continue;
        if (!out.empty()) out.push_back(' ');
        out += t;
    }
    return out;
}

}  // namespace detail

// Masks, kernel weights and predicted-class responses of one LIME run,
// plus the fitted surrogate.
struct LimeFit {
    std::vector<std::string> words;  // distinct tokens, first-occurrence order
    std::vector<std::vector<std::uint8_t>> masks;
    std::vector<double> weights;
    std::vector<double> responses;
    double intercept = 0.0;
    std::vector<double> coefficients;
    ClassId predicted_class = 0;
    double confidence = 0.0;
};

inline double lime_kernel(const std::vector<std::uint8_t>& mask, double kernel_width) {
    std::size_t on = 0;
    for (auto b : mask) on += b;
    // cosine(mask, all-ones) = |mask| / sqrt(|mask| * d)
    const double cos = on == 0 ? 0.0 : std::sqrt(static_cast<double>(on) / static_cast<double>(mask.size()));
    const double dist = 1.0 - cos;
    return std::exp(-dist * dist / (kernel_width * kernel_width));
}

inline LimeFit lime_fit(const Predictor& predictor, const Document& doc, const LimeConfig& cfg,
                        std::uint64_t seed) {
    LimeFit fit;
    fit.words = doc.distinct_tokens();
    const std::size_t d = fit.words.size();
    if (d == 0) throw Error("explain_lime: document has no tokens");
    if (!cfg.enumerate_all && cfg.n_samples < 10) throw Error("explain_lime: n_samples must be >= 10");
    std::unordered_map<std::string, std::size_t> slot;
    for (std::size_t i = 0; i < d; ++i) slot.emplace(fit.words[i], i);

    if (cfg.enumerate_all) {
        if (d > 20) throw Error("explain_lime: full enumeration limited to 20 distinct tokens");
        for (std::uint64_t m = 0; m < (std::uint64_t{1} << d); ++m) {
            std::vector<std::uint8_t> mask(d);
            for (std::size_t j = 0; j < d; ++j) mask[j] = static_cast<std::uint8_t>((m >> j) & 1U);
            fit.masks.push_back(std::move(mask));
        }
    } else {
        std::mt19937_64 rng(seed);
        fit.masks.emplace_back(d, std::uint8_t{1});
        for (int s = 1; s < cfg.n_samples; ++s) {
            std::vector<std::uint8_t> mask(d);
            for (std::size_t j = 0; j < d; ++j) mask[j] = static_cast<std::uint8_t>(rng() >> 63);
            fit.masks.push_back(std::move(mask));
        }
    }

    std::vector<std::string> texts;
    texts.reserve(fit.masks.size() + 1);
    texts.push_back(join_tokens(doc.tokens));
    for (const auto& m : fit.masks) texts.push_back(detail::masked_text(doc.tokens, slot, m));
    const auto dists = predictor.predict_proba(texts);
    fit.predicted_class = dists[0].argmax();
    fit.confidence = dists[0].confidence();
    for (std::size_t i = 0; i < fit.masks.size(); ++i) {
        fit.responses.push_back(dists[i + 1].probs.at(fit.predicted_class));
        fit.weights.push_back(lime_kernel(fit.masks[i], cfg.kernel_width));
    }

    // Weighted ridge with an unpenalized intercept, via normal equations.
    const std::size_t p = d + 1;
    std::vector<double> a(p * p, 0.0);
    std::vector<double> b(p, 0.0);
    std::vector<double> row(p);
    for (std::size_t i = 0; i < fit.masks.size(); ++i) {
        row[0] = 1.0;
        for (std::size_t j = 0; j < d; ++j) row[j + 1] = fit.masks[i][j];
        const double w = fit.weights[i];
        for (std::size_t r = 0; r < p; ++r) {
            if (row[r] == 0.0) continue;
            b[r] += w * row[r] * fit.responses[i];
            for (std::size_t c = 0; c < p; ++c) a[r * p + c] += w * row[r] * row[c];
        }
    }
    for (std::size_t j = 1; j < p; ++j) a[j * p + j] += cfg.ridge;
    const auto beta = detail::solve_dense(std::move(a), std::move(b));
    fit.intercept = beta[0];
    fit.coefficients.assign(beta.begin() + 1, beta.end());
    return fit;
}

inline Explanation explain_lime(const Predictor& predictor, const Document& doc, std::size_t k,
                                const LimeConfig& cfg, std::uint64_t seed) {
    const auto fit = lime_fit(predictor, doc, cfg, seed);
    return {fit.predicted_class, fit.confidence, detail::top_k(fit.words, fit.coefficients, k), k};
}

// Score of w = p(y|x) - p(y|x with every occurrence of w removed).
inline Explanation explain_omission(const Predictor& predictor, const Document& doc, std::size_t k) {
    const auto words = doc.distinct_tokens();
    if (words.empty()) throw Error("explain_omission: document has no tokens");
    std::vector<std::string> texts{join_tokens(doc.tokens)};
    for (const auto& w : words) {
        std::vector<std::string> kept;
        for (const auto& t : doc.tokens) {
            if (t != w) kept.push_back(t);
        }
        texts.push_back(join_tokens(kept));
    }
    const auto dists = predictor.predict_proba(texts);
    const ClassId y = dists[0].argmax();
    const double base = dists[0].probs[y];
    std::vector<double> scores;
    for (std::size_t i = 0; i < words.size(); ++i) scores.push_back(base - dists[i + 1].probs[y]);
    return {y, dists[0].confidence(), detail::top_k(words, scores, k), k};
}

inline Explanation explain_gradient(const Predictor& predictor, const Document& doc, std::size_t k) {
    const auto* grads = predictor.gradients();
    if (!grads) throw CapabilityError("explain_gradient: predictor does not expose gradients");
    const auto words = doc.distinct_tokens();
    if (words.empty()) throw Error("explain_gradient: document has no tokens");
    const auto dist = predictor.predict_one(join_tokens(doc.tokens));
    const ClassId y = dist.argmax();
    const auto per_token = grads->token_gradients(doc.tokens, y);
    std::unordered_map<std::string, double> sum;
    for (std::size_t i = 0; i < doc.tokens.size(); ++i) sum[doc.tokens[i]] += per_token[i];
    std::vector<double> scores;
    for (const auto& w : words) scores.push_back(sum[w]);
    return {y, dist.confidence(), detail::top_k(words, scores, k), k};
}

inline Explanation explain(const Predictor& predictor, const Document& doc, const ExplainerConfig& cfg,
                           std::uint64_t seed) {
    switch (cfg.kind) {
        case ExplainerKind::lime: return explain_lime(predictor, doc, cfg.k, cfg.lime, seed);
        case ExplainerKind::omission: return explain_omission(predictor, doc, cfg.k);
        case ExplainerKind::gradient: return explain_gradient(predictor, doc, cfg.k);
    }
    throw Error("unreachable explainer kind");
}

}  // namespace toki
