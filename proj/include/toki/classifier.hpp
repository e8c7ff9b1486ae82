#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <functional>
#include <limits>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "toki/corpus.hpp"
#include "toki/error.hpp"

namespace toki {

struct ClassDistribution {
    std::vector<double> probs;

    // Ties resolve to the lowest class index.
    ClassId argmax() const {
        return static_cast<ClassId>(std::max_element(probs.begin(), probs.end()) - probs.begin());
    }
    double confidence() const { return probs.empty() ? 0.0 : probs[argmax()]; }
};

inline std::vector<double> softmax(std::span<const double> logits) {
    std::vector<double> out(logits.begin(), logits.end());
    if (out.empty()) return out;
    const double top = *std::max_element(out.begin(), out.end());
    double total = 0.0;
    for (auto& v : out) {
        v = std::exp(v - top);
        total += v;
    }
    for (auto& v : out) v /= total;
    return out;
}

// Gradient access for white-box models: d(logit of `cls`) / d(count of token).
class GradientSource {
public:
    virtual ~GradientSource() = default;
    virtual std::vector<double> token_gradients(const std::vector<std::string>& tokens,
                                                ClassId cls) const = 0;
    virtual bool has_feature(const std::string& token) const = 0;
};

// The classifier under test. Implementations must be deterministic and safe
// to call concurrently through the const interface.
class Predictor {
public:
    virtual ~Predictor() = default;
    virtual const std::vector<std::string>& class_names() const = 0;
    virtual std::vector<ClassDistribution> predict_proba(std::span<const std::string> texts) const = 0;
    // nullptr when the predictor is a black box.
    virtual const GradientSource* gradients() const { return nullptr; }

    ClassDistribution predict_one(const std::string& text) const {
        return predict_proba(std::span<const std::string>(&text, 1)).front();
    }
};

// Adapts a callable over token lists; handy for fixtures and wrappers.
class CallbackPredictor : public Predictor {
public:
    using Fn = std::function<std::vector<double>(const std::vector<std::string>& tokens)>;

    CallbackPredictor(std::vector<std::string> classes, Fn fn)
        : classes_(std::move(classes)), fn_(std::move(fn)) {}

    const std::vector<std::string>& class_names() const override { return classes_; }

    std::vector<ClassDistribution> predict_proba(std::span<const std::string> texts) const override {
        std::vector<ClassDistribution> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back({fn_(tokenize(t))});
        return out;
    }

private:
    std::vector<std::string> classes_;
    Fn fn_;
};

struct TrainingConfig {
    double l2 = 1e-3;
    // <= 0 picks 1/L from a bound on the loss curvature.
    double learning_rate = 0.0;
    int max_epochs = 5000;
    double tolerance = 1e-7;
    // Weights start at zero, so the seed only matters to callers that shuffle.
    unsigned long long seed = 0;
};

using SparseCounts = std::vector<std::pair<std::size_t, double>>;

// Multinomial logistic regression over bag-of-words term counts.
class LinearTextModel : public Predictor, public GradientSource {
public:
    LinearTextModel() = default;

    LinearTextModel(std::vector<std::string> classes, std::vector<std::string> vocabulary)
        : classes_(std::move(classes)), words_(std::move(vocabulary)) {
        for (std::size_t i = 0; i < words_.size(); ++i) index_.emplace(words_[i], i);
        weights_.assign(classes_.size(), std::vector<double>(words_.size(), 0.0));
        bias_.assign(classes_.size(), 0.0);
    }

    const std::vector<std::string>& class_names() const override { return classes_; }
    const std::vector<std::string>& vocabulary() const { return words_; }
    std::size_t num_classes() const { return classes_.size(); }
    std::size_t num_features() const { return words_.size(); }

    double& weight(ClassId c, std::size_t feature) { return weights_.at(c).at(feature); }
    double weight(ClassId c, std::size_t feature) const { return weights_.at(c).at(feature); }
    double& bias(ClassId c) { return bias_.at(c); }
    double bias(ClassId c) const { return bias_.at(c); }
    double training_accuracy() const { return training_accuracy_; }
    void set_training_accuracy(double a) { training_accuracy_ = a; }

    std::ptrdiff_t feature_index(const std::string& word) const {
        auto it = index_.find(word);
        return it == index_.end() ? -1 : static_cast<std::ptrdiff_t>(it->second);
    }

    SparseCounts featurize(const std::vector<std::string>& tokens) const {
        SparseCounts counts;
        std::unordered_map<std::size_t, std::size_t> slot;
        for (const auto& t : tokens) {
            const auto f = feature_index(t);
            if (f < 0) continue;
            auto [it, fresh] = slot.emplace(static_cast<std::size_t>(f), counts.size());
            if (fresh) counts.emplace_back(static_cast<std::size_t>(f), 0.0);
            counts[it->second].second += 1.0;
        }
        return counts;
    }

    std::vector<double> logits(const SparseCounts& x) const {
        std::vector<double> z(bias_);
        for (std::size_t c = 0; c < z.size(); ++c) {
            for (const auto& [f, v] : x) z[c] += weights_[c][f] * v;
        }
        return z;
    }

    std::vector<ClassDistribution> predict_proba(std::span<const std::string> texts) const override {
        std::vector<ClassDistribution> out;
        out.reserve(texts.size());
        for (const auto& t : texts) out.push_back({softmax(logits(featurize(tokenize(t))))});
        return out;
    }

    const GradientSource* gradients() const override { return this; }

    // Logits are linear in counts, so the derivative is the class weight.
    std::vector<double> token_gradients(const std::vector<std::string>& tokens,
                                        ClassId cls) const override {
        std::vector<double> g(tokens.size(), 0.0);
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            const auto f = feature_index(tokens[i]);
            if (f >= 0) g[i] = weights_.at(cls)[static_cast<std::size_t>(f)];
        }
        return g;
    }

    bool has_feature(const std::string& token) const override { return feature_index(token) >= 0; }

    nlohmann::json to_json() const {
        return {{"schema_version", 1},
                {"kind", "linear_bow"},
                {"classes", classes_},
                {"vocabulary", words_},
                {"weights", weights_},
                {"bias", bias_},
                {"training_accuracy", training_accuracy_}};
    }

    static LinearTextModel from_json(const nlohmann::json& j) {
        if (j.value("kind", std::string{}) != "linear_bow") throw Error("model JSON: kind must be linear_bow");
        LinearTextModel m(j.at("classes").get<std::vector<std::string>>(),
                          j.at("vocabulary").get<std::vector<std::string>>());
        auto w = j.at("weights").get<std::vector<std::vector<double>>>();
        auto b = j.at("bias").get<std::vector<double>>();
        if (w.size() != m.num_classes() || b.size() != m.num_classes()) {
            throw Error("model JSON: weights/bias must have one row per class");
        }
        for (const auto& row : w) {
            if (row.size() != m.num_features()) throw Error("model JSON: weight row length != vocabulary size");
        }
        m.weights_ = std::move(w);
        m.bias_ = std::move(b);
        m.training_accuracy_ = j.value("training_accuracy", 0.0);
        return m;
    }

private:
    std::vector<std::string> classes_;
    std::vector<std::string> words_;
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<double>> weights_;
    std::vector<double> bias_;
    double training_accuracy_ = 0.0;
};

inline LinearTextModel load_model(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path, 0, e.what());
    }
    return LinearTextModel::from_json(j);
}

inline void save_model(const std::string& path, const LinearTextModel& model) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write model: " + path);
    out << model.to_json().dump(1) << '\n';
}

// Full-batch gradient descent on mean cross-entropy + (l2/2)||W||^2.
// The bias is unregularized.
inline LinearTextModel train(const LabeledDataset& data, const TrainingConfig& cfg = {}) {
    if (data.size() == 0) throw Error("train: empty dataset");
    if (data.class_names.size() < 2) throw Error("train: need at least 2 classes");
    std::vector<std::size_t> per_class(data.class_names.size(), 0);
    for (auto l : data.labels) ++per_class.at(l);
    for (std::size_t c = 0; c < per_class.size(); ++c) {
        if (per_class[c] == 0) throw Error("train: class '" + data.class_names[c] + "' has no documents");
    }

    std::vector<std::string> vocab;
    {
        std::unordered_map<std::string, bool> seen;
        for (const auto& d : data.documents) {
            for (const auto& t : d.tokens) {
                if (seen.emplace(t, true).second) vocab.push_back(t);
            }
        }
    }
    LinearTextModel model(data.class_names, vocab);
    const std::size_t n = data.size();
    const std::size_t k = model.num_classes();
    std::vector<SparseCounts> xs;
    xs.reserve(n);
    double mean_sq_norm = 0.0;
    for (const auto& d : data.documents) {
        xs.push_back(model.featurize(d.tokens));
        double sq = 1.0;  // bias feature
        for (const auto& [f, v] : xs.back()) sq += v * v;
        mean_sq_norm += sq / static_cast<double>(n);
    }
    const double step = cfg.learning_rate > 0 ? cfg.learning_rate : 1.0 / (0.5 * mean_sq_norm + cfg.l2);

    std::vector<std::vector<double>> grad_w(k, std::vector<double>(model.num_features()));
    std::vector<double> grad_b(k);
    for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
        for (auto& row : grad_w) std::fill(row.begin(), row.end(), 0.0);
        std::fill(grad_b.begin(), grad_b.end(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            auto p = softmax(model.logits(xs[i]));
            p[data.labels[i]] -= 1.0;
            for (std::size_t c = 0; c < k; ++c) {
                const double r = p[c] / static_cast<double>(n);
                grad_b[c] += r;
                for (const auto& [f, v] : xs[i]) grad_w[c][f] += r * v;
            }
        }
        double max_grad = 0.0;
        for (std::size_t c = 0; c < k; ++c) {
            for (std::size_t f = 0; f < model.num_features(); ++f) {
                grad_w[c][f] += cfg.l2 * model.weight(c, f);
                max_grad = std::max(max_grad, std::abs(grad_w[c][f]));
                model.weight(c, f) -= step * grad_w[c][f];
            }
            max_grad = std::max(max_grad, std::abs(grad_b[c]));
            model.bias(c) -= step * grad_b[c];
        }
        if (max_grad < cfg.tolerance) break;
    }

    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (ClassDistribution{softmax(model.logits(xs[i]))}.argmax() == data.labels[i]) ++correct;
    }
    model.set_training_accuracy(static_cast<double>(correct) / static_cast<double>(n));
    return model;
}

}  // namespace toki
