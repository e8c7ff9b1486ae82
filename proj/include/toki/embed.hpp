#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <initializer_list>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "toki/corpus.hpp"
#include "toki/error.hpp"

namespace toki {

inline double dot(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double clamp_unit(double x) { return std::clamp(x, -1.0, 1.0); }

// Word -> unit vector map. Keys go through the corpus tokenizer so lookups
// are case-insensitive.
class EmbeddingStore {
public:
    EmbeddingStore() = default;
    EmbeddingStore(std::string name, std::size_t dim) : name_(std::move(name)), dim_(dim) {
        if (dim_ == 0) throw Error("embedding dimension must be positive");
    }

    static std::string key(const std::string& word) {
        auto toks = tokenize(word);
        if (toks.size() == 1) return toks.front();
        std::string lower = word;
        for (auto& ch : lower) {
            if (ch >= 'A' && ch <= 'Z') ch = static_cast<char>(ch - 'A' + 'a');
        }
        return lower;
    }

    // Normalizes and stores. Returns false (and stores nothing) for a zero vector.
    bool insert(const std::string& word, std::span<const double> v) {
        if (v.size() != dim_) throw Error("embedding '" + word + "' has wrong dimension");
        const double norm = std::sqrt(dot(v, v));
        if (!(norm > 0.0) || !std::isfinite(norm)) return false;
        const auto k = key(word);
        auto [it, fresh] = index_.emplace(k, words_.size());
        if (fresh) {
            words_.push_back(k);
            data_.resize(data_.size() + dim_);
        } else {
            ++duplicates_;
        }
        double* dst = data_.data() + it->second * dim_;
        for (std::size_t i = 0; i < dim_; ++i) dst[i] = v[i] / norm;
        return true;
    }

    std::optional<std::span<const double>> find(const std::string& word) const {
        auto it = index_.find(key(word));
        if (it == index_.end()) return std::nullopt;
        return std::span<const double>(data_.data() + it->second * dim_, dim_);
    }

    bool contains(const std::string& word) const { return index_.count(key(word)) > 0; }

    const std::string& name() const { return name_; }
    std::size_t dim() const { return dim_; }
    std::size_t size() const { return words_.size(); }
    const std::vector<std::string>& words() const { return words_; }
    std::size_t duplicate_count() const { return duplicates_; }
    std::size_t skipped_zero_count() const { return skipped_zero_; }
    void note_skipped_zero() { ++skipped_zero_; }

private:
    std::string name_;
    std::size_t dim_ = 0;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::string> words_;
    std::vector<double> data_;
    std::size_t duplicates_ = 0;
    std::size_t skipped_zero_ = 0;
};

// Plain-text vectors: optional "<count> <dim>" header, then "word v1 ... vdim".
inline EmbeddingStore read_store(std::istream& in, const std::string& name, const std::string& source) {
    std::string line;
    std::size_t lineno = 0;
    std::size_t declared_dim = 0;
    std::optional<EmbeddingStore> store;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::istringstream ss(line);
        std::vector<std::string> fields;
        for (std::string f; ss >> f;) fields.push_back(f);
        if (fields.empty()) continue;
        if (!store && declared_dim == 0 && fields.size() == 2 &&
            fields[0].find_first_not_of("0123456789") == std::string::npos &&
            fields[1].find_first_not_of("0123456789") == std::string::npos) {
            declared_dim = std::stoul(fields[1]);
            if (declared_dim == 0) throw ParseError(source, lineno, "header declares dimension 0");
            continue;
        }
        if (fields.size() < 2) throw ParseError(source, lineno, "expected a word followed by its vector");
        const std::size_t dim = fields.size() - 1;
        if (!store) {
            if (declared_dim && dim != declared_dim) {
                throw ParseError(source, lineno, "dimension " + std::to_string(dim) + " != declared " +
                                                     std::to_string(declared_dim));
            }
            store.emplace(name, dim);
        } else if (dim != store->dim()) {
            throw ParseError(source, lineno, "dimension " + std::to_string(dim) + " != " +
                                                 std::to_string(store->dim()));
        }
        std::vector<double> v(dim);
        for (std::size_t i = 0; i < dim; ++i) {
            try {
                std::size_t used = 0;
                v[i] = std::stod(fields[i + 1], &used);
                if (used != fields[i + 1].size()) throw std::invalid_argument("trailing");
            } catch (const std::exception&) {
                throw ParseError(source, lineno, "bad number '" + fields[i + 1] + "'");
            }
        }
        if (!store->insert(fields[0], v)) store->note_skipped_zero();
    }
    if (!store || store->size() == 0) throw ParseError(source, 0, "no usable vectors");
    return std::move(*store);
}

inline EmbeddingStore load_store(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open embeddings: " + path);
    return read_store(in, std::filesystem::path(path).stem().string(), path);
}

// Absent when either word is out of vocabulary.
inline std::optional<double> cosine(const EmbeddingStore& store, const std::string& a, const std::string& b) {
    auto va = store.find(a);
    auto vb = store.find(b);
    if (!va || !vb) return std::nullopt;
    return clamp_unit(dot(*va, *vb));
}

inline std::optional<std::vector<double>> normalized(std::vector<double> v) {
    const double norm = std::sqrt(dot(v, v));
    if (!(norm > 1e-12)) return std::nullopt;
    for (auto& x : v) x /= norm;
    return v;
}

// Re-normalized mean of the in-vocabulary token vectors.
inline std::optional<std::vector<double>> embed_tokens(const EmbeddingStore& store,
                                                       const std::vector<std::string>& tokens) {
    std::vector<double> sum(store.dim(), 0.0);
    bool any = false;
    for (const auto& t : tokens) {
        if (auto v = store.find(t)) {
            for (std::size_t i = 0; i < sum.size(); ++i) sum[i] += (*v)[i];
            any = true;
        }
    }
    if (!any) return std::nullopt;
    return normalized(std::move(sum));
}

inline std::optional<std::vector<double>> embed_phrase(const EmbeddingStore& store, const std::string& phrase) {
    return embed_tokens(store, tokenize(phrase));
}

// Exact tie -> false.
template <typename Range>
bool plurality_vote(const Range& decisions) {
    std::size_t yes = 0;
    std::size_t total = 0;
    for (bool d : decisions) {
        yes += d ? 1 : 0;
        ++total;
    }
    return 2 * yes > total;
}

inline bool plurality_vote(std::initializer_list<bool> decisions) {
    return plurality_vote<std::initializer_list<bool>>(decisions);
}

using WordPair = std::pair<std::string, std::string>;

inline std::vector<WordPair> read_pairs(std::istream& in, const std::string& source = "<stream>") {
    std::vector<WordPair> pairs;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos || tab == 0 || tab + 1 == line.size()) {
            throw ParseError(source, lineno, "expected word1<TAB>word2");
        }
        pairs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
    }
    return pairs;
}

inline std::vector<WordPair> load_pairs(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open pair list: " + path);
    return read_pairs(in, path);
}

struct ThetaEstimate {
    double theta = 0.0;
    int iterations = 0;
    double precision = 0.0;
    double recall = 0.0;
    bool balanced = false;
    std::size_t dropped_pairs = 0;
};

// Binary search for the cosine threshold at which related-class precision
// and recall balance. A pair counts as related iff cosine >= theta.
inline ThetaEstimate estimate_theta_relate(const EmbeddingStore& store, const std::vector<WordPair>& related,
                                           const std::vector<WordPair>& unrelated, double epsilon = 0.01,
                                           int max_iters = 30) {
    if (related.empty() || unrelated.empty()) throw Error("estimate_theta_relate: both pair lists must be non-empty");
    if (max_iters < 1) throw Error("estimate_theta_relate: max_iters must be >= 1");
    ThetaEstimate est;
    std::vector<double> rel;
    std::vector<double> unr;
    for (const auto& [a, b] : related) {
        if (auto c = cosine(store, a, b)) rel.push_back(*c);
        else ++est.dropped_pairs;
    }
    for (const auto& [a, b] : unrelated) {
        if (auto c = cosine(store, a, b)) unr.push_back(*c);
        else ++est.dropped_pairs;
    }
    if (rel.empty() || unr.empty()) {
        throw Error("estimate_theta_relate: no in-vocabulary pairs left in store '" + store.name() + "'");
    }
    double lo = -1.0;
    double hi = 1.0;
    for (int it = 1; it <= max_iters; ++it) {
        const double mid = 0.5 * (lo + hi);
        std::size_t tp = 0;
        std::size_t fp = 0;
        for (double c : rel) tp += c >= mid ? 1 : 0;
        for (double c : unr) fp += c >= mid ? 1 : 0;
        // No predicted positives: nothing was wrongly called related.
        const double precision = tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
        const double recall = static_cast<double>(tp) / static_cast<double>(rel.size());
        est = {mid, it, precision, recall, std::abs(precision - recall) <= epsilon, est.dropped_pairs};
        if (est.balanced) break;
        if (recall > precision) lo = mid;
        else hi = mid;
    }
    return est;
}

struct EmbeddingEnsemble {
    std::vector<EmbeddingStore> stores;
    std::vector<double> thetas;  // theta_relate per store

    void validate() const {
        if (stores.empty()) throw Error("embedding ensemble needs at least one store");
        if (thetas.size() != stores.size()) throw Error("embedding ensemble needs one theta_relate per store");
    }
    std::size_t size() const { return stores.size(); }
};

}  // namespace toki
