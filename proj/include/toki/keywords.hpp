#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "toki/classifier.hpp"
#include "toki/corpus.hpp"
#include "toki/embed.hpp"
#include "toki/explain.hpp"
#include "toki/parallel.hpp"

namespace toki {

namespace detail {

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace detail

// Per-document explainer seed. Depends on content, not position, so a
// reordered training set explains every document identically.
inline std::uint64_t document_seed(std::uint64_t seed, const Document& doc) {
    return detail::splitmix64(seed ^ detail::fnv1a(doc.id + '\x1f' + doc.raw_text));
}

struct CollectedExplanations {
    std::vector<std::vector<Explanation>> per_class;
    std::vector<std::string> doc_ids_sampled;
    std::vector<std::string> warnings;
};

// Explains the correctly predicted documents among a seeded sample of at
// most `sample_limit` training documents (0 = all), grouped by class.
inline CollectedExplanations collect_explanations(const Predictor& predictor, const LabeledDataset& data,
                                                  const ExplainerConfig& cfg, std::size_t sample_limit,
                                                  std::uint64_t seed, unsigned workers = 1) {
    std::vector<std::size_t> chosen(data.size());
    std::iota(chosen.begin(), chosen.end(), std::size_t{0});
    if (sample_limit > 0 && sample_limit < data.size()) {
        std::mt19937_64 rng(seed);
        for (std::size_t i = 0; i < sample_limit; ++i) {
            const std::size_t j = i + static_cast<std::size_t>(rng() % (data.size() - i));
            std::swap(chosen[i], chosen[j]);
        }
        chosen.resize(sample_limit);
        std::sort(chosen.begin(), chosen.end());
    }

    std::vector<std::string> texts;
    texts.reserve(chosen.size());
    for (auto i : chosen) texts.push_back(join_tokens(data.documents[i].tokens));
    const auto preds = predictor.predict_proba(texts);

    std::vector<std::optional<Explanation>> slots(chosen.size());
    parallel_for(chosen.size(), workers, [&](std::size_t s) {
        const auto& doc = data.documents[chosen[s]];
        if (doc.tokens.empty() || preds[s].argmax() != data.labels[chosen[s]]) return;
        slots[s] = explain(predictor, doc, cfg, document_seed(seed, doc));
    });

    CollectedExplanations out;
    out.per_class.resize(data.class_names.size());
    for (std::size_t s = 0; s < chosen.size(); ++s) {
        out.doc_ids_sampled.push_back(data.documents[chosen[s]].id);
        if (slots[s]) out.per_class[slots[s]->predicted_class].push_back(std::move(*slots[s]));
    }
    for (std::size_t c = 0; c < out.per_class.size(); ++c) {
        if (out.per_class[c].empty()) {
            out.warnings.push_back("class '" + data.class_names[c] + "' has no correctly predicted sampled instances");
        }
    }
    return out;
}

struct PoolEntry {
    double mean_score = 0.0;
    std::size_t support = 0;
    bool operator==(const PoolEntry&) const = default;
};

// Averaged importance of every word seen in a class's explanations.
struct WordPool {
    ClassId cls = 0;
    std::map<std::string, PoolEntry> entries;

    bool contains(const std::string& w) const { return entries.count(w) > 0; }
    bool operator==(const WordPool&) const = default;
};

// Mean over the explanations that contain the word. Scores are summed in
// sorted order so the result does not depend on explanation order.
inline WordPool build_word_pool(const std::vector<Explanation>& explanations, ClassId cls = 0) {
    std::map<std::string, std::vector<double>> scores;
    for (const auto& e : explanations) {
        std::set<std::string> seen;
        for (const auto& a : e.attributions) {
            if (seen.insert(a.word).second) scores[a.word].push_back(a.score);
        }
    }
    WordPool pool{cls, {}};
    for (auto& [word, s] : scores) {
        std::sort(s.begin(), s.end());
        double total = 0.0;
        for (double v : s) total += v;
        pool.entries.emplace(word, PoolEntry{total / static_cast<double>(s.size()), s.size()});
    }
    return pool;
}

struct ClusterSet {
    std::vector<std::vector<std::string>> clusters;
    std::vector<std::optional<std::vector<double>>> means;  // unit mean vector per cluster
    std::vector<std::string> unclustered;                   // out-of-vocabulary pool words
};

struct Merge {
    std::size_t a;
    std::size_t b;
    double height;
};

// Average-linkage dendrogram over points given as unit vectors, using
// cosine distance. Nearest-neighbour chain, O(n^2); merges are returned
// sorted by height. Cluster ids follow the scipy convention (n + step).
inline std::vector<Merge> average_linkage(const std::vector<std::span<const double>>& points) {
    const std::size_t n = points.size();
    std::vector<Merge> merges;
    if (n < 2) return merges;
    std::vector<double> dist(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double d = 1.0 - clamp_unit(dot(points[i], points[j]));
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    std::vector<std::size_t> size(n, 1);
    std::vector<std::size_t> label(n);
    std::iota(label.begin(), label.end(), std::size_t{0});
    std::vector<bool> active(n, true);
    std::vector<std::size_t> chain;
    std::size_t remaining = n;
    std::size_t next_label = n;
    while (remaining > 1) {
        if (chain.empty()) {
            for (std::size_t i = 0; i < n; ++i) {
                if (active[i]) {
                    chain.push_back(i);
                    break;
                }
            }
        }
        while (true) {
            const std::size_t a = chain.back();
            std::size_t best = n;
            double best_d = std::numeric_limits<double>::infinity();
            // Prefer the chain predecessor on ties so reciprocal pairs terminate.
            if (chain.size() >= 2) {
                best = chain[chain.size() - 2];
                best_d = dist[a * n + best];
            }
            for (std::size_t j = 0; j < n; ++j) {
                if (!active[j] || j == a) continue;
                if (dist[a * n + j] < best_d) {
                    best_d = dist[a * n + j];
                    best = j;
                }
            }
            if (chain.size() >= 2 && best == chain[chain.size() - 2]) break;
            chain.push_back(best);
        }
        const std::size_t b = chain.back();
        chain.pop_back();
        const std::size_t a = chain.back();
        chain.pop_back();
        const double h = dist[a * n + b];
        merges.push_back({std::min(label[a], label[b]), std::max(label[a], label[b]), h});
        // Lance-Williams update for average linkage; keep slot a.
        for (std::size_t j = 0; j < n; ++j) {
            if (!active[j] || j == a || j == b) continue;
            const double d = (static_cast<double>(size[a]) * dist[a * n + j] +
                              static_cast<double>(size[b]) * dist[b * n + j]) /
                             static_cast<double>(size[a] + size[b]);
            dist[a * n + j] = d;
            dist[j * n + a] = d;
        }
        active[b] = false;
        size[a] += size[b];
        label[a] = next_label++;
        --remaining;
    }
    // Clamp heights so a parent never sorts before its children under rounding.
    for (std::size_t k = 0; k < merges.size(); ++k) {
        for (std::size_t child : {merges[k].a, merges[k].b}) {
            if (child >= n) merges[k].height = std::max(merges[k].height, merges[child - n].height);
        }
    }
    // Relabel after sorting by height, as NN-chain emits merges out of order.
    std::vector<std::size_t> order(merges.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t x, std::size_t y) { return merges[x].height < merges[y].height; });
    std::vector<std::size_t> rename(n + merges.size());
    std::iota(rename.begin(), rename.begin() + static_cast<std::ptrdiff_t>(n), std::size_t{0});
    std::vector<Merge> sorted;
    for (std::size_t k = 0; k < order.size(); ++k) {
        const auto& m = merges[order[k]];
        rename[n + order[k]] = n + k;
        sorted.push_back({rename[m.a], rename[m.b], m.height});
    }
    for (auto& m : sorted) {
        if (m.a > m.b) std::swap(m.a, m.b);
    }
    return sorted;
}

// Flat clusters: apply every dendrogram merge with height < theta_dist.
// theta_dist >= 2 (the largest cosine distance) keeps every merge.
inline std::vector<std::size_t> cut_dendrogram(std::size_t n, const std::vector<Merge>& merges, double theta_dist) {
    std::vector<std::size_t> parent(n + merges.size());
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t k = 0; k < merges.size(); ++k) {
        if (!(merges[k].height < theta_dist) && theta_dist < 2.0) continue;
        parent[find(merges[k].a)] = n + k;
        parent[find(merges[k].b)] = n + k;
    }
    std::vector<std::size_t> labels(n);
    std::map<std::size_t, std::size_t> compact;
    for (std::size_t i = 0; i < n; ++i) {
        auto [it, fresh] = compact.emplace(find(i), compact.size());
        labels[i] = it->second;
    }
    return labels;
}

inline ClusterSet cluster_pool(const WordPool& pool, const EmbeddingStore& store, double theta_dist) {
    if (theta_dist < 0.0 || theta_dist > 2.0) throw Error("cluster_pool: theta_dist must lie in [0, 2]");
    ClusterSet out;
    std::vector<std::string> words;
    std::vector<std::span<const double>> vecs;
    for (const auto& [w, entry] : pool.entries) {
        if (auto v = store.find(w)) {
            words.push_back(w);
            vecs.push_back(*v);
        } else {
            out.unclustered.push_back(w);
        }
    }
    if (words.empty()) return out;
    const auto labels = cut_dendrogram(words.size(), average_linkage(vecs), theta_dist);
    const std::size_t k = *std::max_element(labels.begin(), labels.end()) + 1;
    out.clusters.resize(k);
    std::vector<std::vector<double>> sums(k, std::vector<double>(store.dim(), 0.0));
    for (std::size_t i = 0; i < words.size(); ++i) {
        out.clusters[labels[i]].push_back(words[i]);
        for (std::size_t d = 0; d < store.dim(); ++d) sums[labels[i]][d] += vecs[i][d];
    }
    for (auto& s : sums) out.means.push_back(normalized(std::move(s)));
    return out;
}

struct KeywordSplit {
    std::set<std::string> keywords;
    std::set<std::string> non_keywords;
    std::vector<double> cluster_similarity;  // NaN when not computable
};

// A cluster joins the keywords iff cos(cluster mean, class name) >= theta_relate.
inline KeywordSplit select_keywords(const ClusterSet& clusters, const std::string& class_name,
                                    const EmbeddingStore& store, double theta_relate) {
    KeywordSplit out;
    const auto anchor = embed_phrase(store, class_name);
    for (std::size_t i = 0; i < clusters.clusters.size(); ++i) {
        double sim = std::numeric_limits<double>::quiet_NaN();
        if (anchor && clusters.means[i]) sim = clamp_unit(dot(*anchor, *clusters.means[i]));
        out.cluster_similarity.push_back(sim);
        auto& dst = (!std::isnan(sim) && sim >= theta_relate) ? out.keywords : out.non_keywords;
        dst.insert(clusters.clusters[i].begin(), clusters.clusters[i].end());
    }
    out.non_keywords.insert(clusters.unclustered.begin(), clusters.unclustered.end());
    return out;
}

struct ClassKeywords {
    std::string class_name;
    WordPool pool;
    std::set<std::string> keywords;
    std::set<std::string> non_keywords;
    std::map<std::string, std::vector<int>> votes;  // per store: 1 = store put the word in K_c
    std::size_t n_explanations = 0;

    bool is_keyword(const std::string& w) const { return keywords.count(w) > 0; }
};

struct KeywordParams {
    std::string explainer = "lime";
    std::size_t k = 10;
    int lime_samples = 5000;
    double theta_dist = 0.3;
    std::size_t sample_limit = 0;
    std::uint64_t seed = 0;
    std::vector<std::string> stores;
    std::vector<double> thetas;
    std::vector<std::string> embedding_paths;
};

struct KeywordIndex {
    std::vector<ClassKeywords> classes;
    KeywordParams params;
    std::vector<std::string> warnings;

    const ClassKeywords& at(ClassId c) const { return classes.at(c); }

    std::vector<std::string> class_names() const {
        std::vector<std::string> names;
        for (const auto& c : classes) names.push_back(c.class_name);
        return names;
    }

    nlohmann::json to_json() const {
        using nlohmann::json;
        json per_class = json::object();
        for (const auto& c : classes) {
            json kw = json::object();
            json nk = json::object();
            for (const auto& w : c.keywords) kw[w] = c.pool.entries.at(w).mean_score;
            for (const auto& w : c.non_keywords) nk[w] = c.pool.entries.at(w).mean_score;
            json support = json::object();
            for (const auto& [w, e] : c.pool.entries) support[w] = e.support;
            per_class[c.class_name] = {{"keywords", kw},
                                       {"non_keywords", nk},
                                       {"votes", c.votes},
                                       {"support", support},
                                       {"params", {{"n_explanations", c.n_explanations},
                                                   {"theta_dist", params.theta_dist},
                                                   {"theta_relate", params.thetas}}}};
        }
        return {{"schema_version", 1},
                {"class_order", class_names()},
                {"classes", per_class},
                {"params", {{"explainer", params.explainer},
                            {"k", params.k},
                            {"lime_samples", params.lime_samples},
                            {"theta_dist", params.theta_dist},
                            {"sample", params.sample_limit},
                            {"seed", params.seed},
                            {"stores", params.stores},
                            {"theta_relate", params.thetas},
                            {"embeddings", params.embedding_paths}}},
                {"warnings", warnings}};
    }

    static KeywordIndex from_json(const nlohmann::json& j) {
        KeywordIndex idx;
        const auto& p = j.at("params");
        idx.params.explainer = p.value("explainer", std::string("lime"));
        idx.params.k = p.value("k", std::size_t{10});
        idx.params.lime_samples = p.value("lime_samples", 5000);
        idx.params.theta_dist = p.value("theta_dist", 0.3);
        idx.params.sample_limit = p.value("sample", std::size_t{0});
        idx.params.seed = p.value("seed", std::uint64_t{0});
        idx.params.stores = p.value("stores", std::vector<std::string>{});
        idx.params.thetas = p.value("theta_relate", std::vector<double>{});
        idx.params.embedding_paths = p.value("embeddings", std::vector<std::string>{});
        idx.warnings = j.value("warnings", std::vector<std::string>{});
        ClassId cls = 0;
        for (const auto& name : j.at("class_order").get<std::vector<std::string>>()) {
            const auto& c = j.at("classes").at(name);
            ClassKeywords ck;
            ck.class_name = name;
            ck.pool.cls = cls++;
            const auto support = c.value("support", nlohmann::json::object());
            auto add = [&](const nlohmann::json& words, std::set<std::string>& dst) {
                for (auto it = words.begin(); it != words.end(); ++it) {
                    dst.insert(it.key());
                    ck.pool.entries[it.key()] = {it.value().get<double>(), support.value(it.key(), std::size_t{1})};
                }
            };
            add(c.at("keywords"), ck.keywords);
            add(c.at("non_keywords"), ck.non_keywords);
            ck.votes = c.value("votes", std::map<std::string, std::vector<int>>{});
            ck.n_explanations = c.at("params").value("n_explanations", std::size_t{0});
            idx.classes.push_back(std::move(ck));
        }
        return idx;
    }
};

inline KeywordIndex load_keyword_index(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open keyword index: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    return KeywordIndex::from_json(j);
}

inline void save_keyword_index(const std::string& path, const KeywordIndex& index) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write keyword index: " + path);
    out << index.to_json().dump(1) << '\n';
}

// Steps 2-4 per store, then plurality over stores for each pool word.
inline KeywordIndex build_keyword_index(const std::vector<std::vector<Explanation>>& per_class,
                                        const std::vector<std::string>& class_names,
                                        const EmbeddingEnsemble& ensemble, double theta_dist,
                                        unsigned workers = 1) {
    ensemble.validate();
    if (per_class.size() != class_names.size()) throw Error("build_keyword_index: one explanation list per class expected");
    KeywordIndex idx;
    idx.params.theta_dist = theta_dist;
    idx.params.thetas = ensemble.thetas;
    for (const auto& s : ensemble.stores) idx.params.stores.push_back(s.name());

    idx.classes.resize(class_names.size());
    parallel_for(class_names.size(), workers, [&](std::size_t c) {
        auto& ck = idx.classes[c];
        ck.class_name = class_names[c];
        ck.n_explanations = per_class[c].size();
        ck.pool = build_word_pool(per_class[c], c);
        for (const auto& [w, e] : ck.pool.entries) ck.votes[w].assign(ensemble.size(), 0);
        for (std::size_t s = 0; s < ensemble.size(); ++s) {
            const auto clusters = cluster_pool(ck.pool, ensemble.stores[s], theta_dist);
            const auto split = select_keywords(clusters, class_names[c], ensemble.stores[s], ensemble.thetas[s]);
            for (const auto& w : split.keywords) ck.votes[w][s] = 1;
        }
        for (const auto& [w, v] : ck.votes) {
            (plurality_vote(std::vector<bool>(v.begin(), v.end())) ? ck.keywords : ck.non_keywords).insert(w);
        }
    });
    for (std::size_t c = 0; c < class_names.size(); ++c) {
        if (idx.classes[c].pool.entries.empty()) {
            idx.warnings.push_back("class '" + class_names[c] + "' has an empty word pool");
        }
        for (std::size_t s = 0; s < ensemble.size(); ++s) {
            if (!embed_phrase(ensemble.stores[s], class_names[c])) {
                idx.warnings.push_back("class name '" + class_names[c] + "' not embeddable in store '" +
                                       ensemble.stores[s].name() + "'; its words all vote non-keyword there");
            }
        }
    }
    return idx;
}

inline KeywordIndex identify_keywords(const Predictor& predictor, const LabeledDataset& data,
                                      const ExplainerConfig& explainer, const EmbeddingEnsemble& ensemble,
                                      double theta_dist, std::size_t sample_limit, std::uint64_t seed,
                                      unsigned workers = 1) {
    auto collected = collect_explanations(predictor, data, explainer, sample_limit, seed, workers);
    auto idx = build_keyword_index(collected.per_class, data.class_names, ensemble, theta_dist, workers);
    idx.params.explainer = to_string(explainer.kind);
    idx.params.k = explainer.k;
    idx.params.lime_samples = explainer.lime.n_samples;
    idx.params.sample_limit = sample_limit;
    idx.params.seed = seed;
    idx.warnings.insert(idx.warnings.begin(), collected.warnings.begin(), collected.warnings.end());
    return idx;
}

}  // namespace toki
