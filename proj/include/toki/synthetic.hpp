#pragma once

// Deterministic two-class corpus with a planted shortcut token per class,
// plus matching toy embedding stores, relatedness pair lists and a synonym
// lexicon. Used by the acceptance suite and the demo data under data/.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "toki/attack.hpp"
#include "toki/bench.hpp"
#include "toki/corpus.hpp"
#include "toki/embed.hpp"

namespace toki::synthetic {

struct PlantedConfig {
    std::uint64_t seed = 7;
    std::size_t train_per_class = 250;
    std::size_t genuine_test_per_class = 60;
    std::size_t shortcut_test_per_class = 40;
    std::size_t natural_test_per_class = 60;  // same distribution as training; no trust label
    double plant_rate = 0.95;        // planted token in own-class training docs
    double cross_plant_rate = 0.05;  // planted token in other-class training docs
    double cross_word_rate = 0.15;   // one opposite-class word in a training doc
    std::size_t dim = 24;
    std::size_t n_stores = 3;
    std::size_t n_groups = 14;       // extra synonym groups feeding the pair lists
    std::size_t group_size = 6;
    double word_noise = 0.35;
};

struct PlantedFixture {
    std::vector<std::string> class_names{"positive", "negative"};
    std::vector<std::vector<std::string>> class_words{
        {"good", "great", "excellent", "wonderful", "superb", "lovely", "fine", "nice"},
        {"bad", "awful", "terrible", "poor", "horrible", "dreadful", "lousy", "nasty"}};
    std::vector<std::string> planted{"zq", "qz"};
    std::vector<std::string> fillers{"the", "a", "movie", "film", "story", "plot", "was", "is", "and", "it",
                                     "this", "watched", "saw", "actor", "scene", "music", "ending", "night",
                                     "with", "really"};
    // Filler near-synonyms; they share a direction in every store.
    std::vector<std::vector<std::string>> filler_sets{
        {"the", "a"}, {"movie", "film"}, {"story", "plot"}, {"was", "is"}, {"watched", "saw"}, {"it", "this"}};
    LabeledDataset train;
    LabeledDataset test;
    TrustLabels trust;
    std::vector<EmbeddingStore> stores;
    std::vector<WordPair> related_pairs;
    std::vector<WordPair> unrelated_pairs;
    SynonymLexicon lexicon;

    bool is_class_word(const std::string& w) const {
        for (const auto& set : class_words) {
            if (std::find(set.begin(), set.end(), w) != set.end()) return true;
        }
        return false;
    }
};

namespace detail {

inline std::size_t pick(std::mt19937_64& rng, std::size_t n) { return static_cast<std::size_t>(rng() % n); }

inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Standard normal via Box-Muller on the raw engine (portable across libstdc++/libc++).
inline double normal(std::mt19937_64& rng) {
    const double u1 = std::max(unit(rng), 1e-300);
    const double u2 = unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

inline std::vector<double> random_direction(std::mt19937_64& rng, std::size_t dim) {
    std::vector<double> v(dim);
    for (auto& x : v) x = normal(rng);
    return *normalized(std::move(v));
}

inline std::vector<double> jitter(std::mt19937_64& rng, const std::vector<double>& base, double noise) {
    std::vector<double> v(base);
    const double sd = noise / std::sqrt(static_cast<double>(base.size()));
    for (auto& x : v) x += sd * normal(rng);
    return v;
}

// Zipf-like choice so synonyms differ in training frequency.
inline std::size_t zipf(std::mt19937_64& rng, std::size_t n) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) total += 1.0 / static_cast<double>(i + 1);
    double u = unit(rng) * total;
    for (std::size_t i = 0; i < n; ++i) {
        u -= 1.0 / static_cast<double>(i + 1);
        if (u <= 0.0) return i;
    }
    return n - 1;
}

inline std::string group_word(std::size_t g, std::size_t i) {
    std::ostringstream ss;
    ss << "syn" << std::setw(2) << std::setfill('0') << g << "x" << i;
    return ss.str();
}

}  // namespace detail

inline PlantedFixture make_planted_fixture(const PlantedConfig& cfg = {}) {
    using namespace detail;
    PlantedFixture fx;
    std::mt19937_64 rng(cfg.seed);

    auto make_doc = [&](ClassId c, bool with_class_words, bool planted, bool cross_plant, bool cross_word) {
        std::vector<std::string> words;
        const std::size_t n_fill = 4 + pick(rng, 4);
        for (std::size_t i = 0; i < n_fill; ++i) words.push_back(fx.fillers[pick(rng, fx.fillers.size())]);
        if (with_class_words) {
            const std::size_t n_cls = 1 + pick(rng, 2);
            for (std::size_t i = 0; i < n_cls; ++i) words.push_back(fx.class_words[c][zipf(rng, fx.class_words[c].size())]);
        }
        if (planted) words.push_back(fx.planted[c]);
        if (cross_plant) words.push_back(fx.planted[1 - c]);
        if (cross_word) words.push_back(fx.class_words[1 - c][zipf(rng, fx.class_words[1 - c].size())]);
        for (std::size_t i = words.size(); i > 1; --i) std::swap(words[i - 1], words[pick(rng, i)]);
        return join_tokens(words);
    };

    fx.train.class_names = fx.class_names;
    fx.test.class_names = fx.class_names;
    std::size_t serial = 0;
    for (std::size_t i = 0; i < cfg.train_per_class; ++i) {
        for (ClassId c = 0; c < 2; ++c) {
            const bool planted = unit(rng) < cfg.plant_rate;
            const bool cross = unit(rng) < cfg.cross_plant_rate;
            const bool cross_word = unit(rng) < cfg.cross_word_rate;
            fx.train.add(Document::from_text("tr" + std::to_string(serial++), make_doc(c, true, planted, cross, cross_word)), c);
        }
    }
    serial = 0;
    for (ClassId c = 0; c < 2; ++c) {
        for (std::size_t i = 0; i < cfg.genuine_test_per_class; ++i) {
            const auto id = "g" + std::to_string(serial++);
            fx.test.add(Document::from_text(id, make_doc(c, true, false, false, false)), c);
            fx.trust[id] = TrustLabel::trustworthy;
        }
        for (std::size_t i = 0; i < cfg.shortcut_test_per_class; ++i) {
            const auto id = "s" + std::to_string(serial++);
            fx.test.add(Document::from_text(id, make_doc(c, false, true, false, false)), c);
            fx.trust[id] = TrustLabel::untrustworthy;
        }
        for (std::size_t i = 0; i < cfg.natural_test_per_class; ++i) {
            const auto id = "n" + std::to_string(serial++);
            fx.test.add(Document::from_text(id, make_doc(c, true, unit(rng) < cfg.plant_rate, false, false)), c);
        }
    }

    // Vocabulary for the embedding stores.
    std::vector<std::vector<std::string>> groups;
    for (std::size_t g = 0; g < cfg.n_groups; ++g) {
        groups.emplace_back();
        for (std::size_t i = 0; i < cfg.group_size; ++i) groups.back().push_back(group_word(g, i));
    }
    for (std::size_t s = 0; s < cfg.n_stores; ++s) {
        std::mt19937_64 srng(cfg.seed * 1000003ULL + s + 1);
        EmbeddingStore store("toy" + std::to_string(s), cfg.dim);
        for (ClassId c = 0; c < 2; ++c) {
            const auto anchor = random_direction(srng, cfg.dim);
            store.insert(fx.class_names[c], jitter(srng, anchor, 0.1));
            for (const auto& w : fx.class_words[c]) store.insert(w, jitter(srng, anchor, cfg.word_noise));
        }
        const auto nonsense = random_direction(srng, cfg.dim);
        for (const auto& w : fx.planted) store.insert(w, jitter(srng, nonsense, cfg.word_noise));
        for (const auto& w : fx.fillers) store.insert(w, random_direction(srng, cfg.dim));
        for (const auto& set : fx.filler_sets) {
            const auto base = random_direction(srng, cfg.dim);
            for (const auto& w : set) store.insert(w, jitter(srng, base, cfg.word_noise));
        }
        for (const auto& g : groups) {
            const auto base = random_direction(srng, cfg.dim);
            for (const auto& w : g) store.insert(w, jitter(srng, base, cfg.word_noise));
        }
        fx.stores.push_back(std::move(store));
    }

    std::vector<std::vector<std::string>> synonym_sets = groups;
    synonym_sets.push_back(fx.class_words[0]);
    synonym_sets.push_back(fx.class_words[1]);
    synonym_sets.insert(synonym_sets.end(), fx.filler_sets.begin(), fx.filler_sets.end());
    for (const auto& set : synonym_sets) {
        for (std::size_t i = 0; i < set.size(); ++i) {
            for (std::size_t j = i + 1; j < set.size(); ++j) fx.related_pairs.emplace_back(set[i], set[j]);
        }
    }
    std::vector<std::string> all_words;
    std::vector<std::size_t> set_of;
    for (std::size_t k = 0; k < synonym_sets.size(); ++k) {
        for (const auto& w : synonym_sets[k]) {
            all_words.push_back(w);
            set_of.push_back(k);
        }
    }
    for (const auto& w : fx.fillers) {
        if (std::find(all_words.begin(), all_words.end(), w) != all_words.end()) continue;
        all_words.push_back(w);
        set_of.push_back(synonym_sets.size() + all_words.size());
    }
    while (fx.unrelated_pairs.size() < fx.related_pairs.size()) {
        const auto a = pick(rng, all_words.size());
        const auto b = pick(rng, all_words.size());
        if (set_of[a] != set_of[b]) fx.unrelated_pairs.emplace_back(all_words[a], all_words[b]);
    }

    // Counter-fitted-style lexicon: each synonym set, nearest first in store 0.
    for (const auto& set : synonym_sets) {
        for (const auto& w : set) {
            std::vector<std::pair<double, std::string>> near;
            for (const auto& o : set) {
                if (o != w) near.emplace_back(*cosine(fx.stores[0], w, o), o);
            }
            std::stable_sort(near.begin(), near.end(), [](const auto& x, const auto& y) { return x.first > y.first; });
            for (const auto& [sim, o] : near) fx.lexicon[w].push_back(o);
        }
    }
    return fx;
}

inline void write_store(const std::string& path, const EmbeddingStore& store) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write embeddings: " + path);
    out << store.size() << ' ' << store.dim() << '\n' << std::setprecision(17);
    for (const auto& w : store.words()) {
        const auto v = *store.find(w);
        out << w;
        for (double x : v) out << ' ' << x;
        out << '\n';
    }
}

// Writes train.jsonl, test.jsonl, trust.jsonl, toy<i>.vec, related.tsv,
// unrelated.tsv and lexicon.tsv into `dir`.
inline void write_fixture(const std::string& dir, const PlantedFixture& fx) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    save_dataset((fs::path(dir) / "train.jsonl").string(), fx.train);
    save_dataset((fs::path(dir) / "test.jsonl").string(), fx.test);
    {
        std::ofstream out(fs::path(dir) / "trust.jsonl");
        for (const auto& [id, l] : fx.trust) out << nlohmann::json{{"doc_id", id}, {"trust_label", to_string(l)}}.dump() << '\n';
    }
    for (const auto& s : fx.stores) write_store((fs::path(dir) / (s.name() + ".vec")).string(), s);
    auto write_pairs = [&](const char* name, const std::vector<WordPair>& pairs) {
        std::ofstream out(fs::path(dir) / name);
        for (const auto& [a, b] : pairs) out << a << '\t' << b << '\n';
    };
    write_pairs("related.tsv", fx.related_pairs);
    write_pairs("unrelated.tsv", fx.unrelated_pairs);
    std::ofstream lex(fs::path(dir) / "lexicon.tsv");
    for (const auto& [w, syns] : fx.lexicon) {
        lex << w << '\t';
        for (std::size_t i = 0; i < syns.size(); ++i) lex << (i ? "," : "") << syns[i];
        lex << '\n';
    }
}

}  // namespace toki::synthetic
