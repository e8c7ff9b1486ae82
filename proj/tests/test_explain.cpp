#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "toki/classifier.hpp"
#include "toki/explain.hpp"

using namespace toki;

namespace {

bool has(const std::vector<std::string>& tokens, const std::string& w) {
    return std::find(tokens.begin(), tokens.end(), w) != tokens.end();
}

// p(pos) = 1 iff "good" is present.
CallbackPredictor good_token_predictor() {
    return CallbackPredictor({"neg", "pos"}, [](const std::vector<std::string>& t) {
        return has(t, "good") ? std::vector<double>{0.0, 1.0} : std::vector<double>{1.0, 0.0};
    });
}

// Smooth nonlinear black box over a few words.
CallbackPredictor smooth_predictor() {
    return CallbackPredictor({"a", "b", "c"}, [](const std::vector<std::string>& t) {
        double za = 0.1, zb = 0.0, zc = -0.2;
        for (const auto& w : t) {
            if (w == "x") za += 1.3;
            if (w == "y") zb += 0.7;
            if (w == "z") zc += 0.4 * za;
            if (w == "q") za -= 0.5;
        }
        return softmax(std::vector<double>{za, zb, zc});
    });
}

// Weighted ridge with unpenalized intercept, solved as an augmented
// least-squares problem by column-pivoting QR.
Eigen::VectorXd wls_oracle(const LimeFit& fit, double ridge) {
    const auto n = static_cast<Eigen::Index>(fit.masks.size());
    const auto d = static_cast<Eigen::Index>(fit.words.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + d, d + 1);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n + d);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double sw = std::sqrt(fit.weights[static_cast<std::size_t>(i)]);
        a(i, 0) = sw;
        for (Eigen::Index j = 0; j < d; ++j) a(i, j + 1) = sw * fit.masks[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
        b(i) = sw * fit.responses[static_cast<std::size_t>(i)];
    }
    for (Eigen::Index j = 0; j < d; ++j) a(n + j, j + 1) = std::sqrt(ridge);
    return a.colPivHouseholderQr().solve(b);
}

double direct_kernel(const std::vector<std::uint8_t>& mask, double width) {
    double dotp = 0.0, norm = 0.0;
    for (auto m : mask) {
        dotp += m;
        norm += m * m;
    }
    const double cos = norm == 0 ? 0.0 : dotp / (std::sqrt(norm) * std::sqrt(static_cast<double>(mask.size())));
    return std::exp(-(1 - cos) * (1 - cos) / (width * width));
}

}  // namespace

TEST(LimeKernel, MatchesCosineDefinition) {
    for (std::uint8_t bits = 0; bits < 32; ++bits) {
        std::vector<std::uint8_t> mask(5);
        for (int j = 0; j < 5; ++j) mask[static_cast<std::size_t>(j)] = (bits >> j) & 1;
        EXPECT_NEAR(lime_kernel(mask, 0.5), direct_kernel(mask, 0.5), 1e-15);
    }
    EXPECT_DOUBLE_EQ(lime_kernel(std::vector<std::uint8_t>(4, 1), 0.5), 1.0);
}

TEST(Lime, EnumeratedFitMatchesQrOracle) {
    const auto p = smooth_predictor();
    LimeConfig cfg;
    cfg.enumerate_all = true;
    for (const char* text : {"x y z", "x y z q w v", "q x x y z z a b c d e f"}) {
        const auto doc = Document::from_text("d", text);
        for (double ridge : {1.0, 0.0}) {
            cfg.ridge = ridge;
            const auto fit = lime_fit(p, doc, cfg, 0);
            ASSERT_EQ(fit.masks.size(), std::size_t{1} << fit.words.size());
            const auto beta = wls_oracle(fit, ridge);
            EXPECT_NEAR(fit.intercept, beta(0), 1e-6);
            for (std::size_t j = 0; j < fit.words.size(); ++j) {
                EXPECT_NEAR(fit.coefficients[j], beta(static_cast<Eigen::Index>(j + 1)), 1e-6) << text << " " << fit.words[j];
            }
        }
    }
}

TEST(Lime, GoodTokenRanksFirst) {
    const auto p = good_token_predictor();
    ExplainerConfig cfg;
    cfg.k = 3;
    cfg.lime.enumerate_all = true;
    const auto e = explain(p, Document::from_text("d", "a good day"), cfg, 0);
    ASSERT_EQ(e.attributions.size(), 3u);
    EXPECT_EQ(e.predicted_class, 1u);
    EXPECT_EQ(e.attributions[0].word, "good");
    EXPECT_GT(e.attributions[0].score, e.attributions[1].score);

    cfg.lime.enumerate_all = false;
    cfg.lime.n_samples = 500;
    const auto sampled = explain(p, Document::from_text("d", "a good day"), cfg, 42);
    EXPECT_EQ(sampled.attributions[0].word, "good");
}

TEST(Lime, ConstantPredictorGivesZeroScores) {
    CallbackPredictor p({"a", "b"}, [](const std::vector<std::string>&) { return std::vector<double>{0.3, 0.7}; });
    LimeConfig cfg;
    cfg.n_samples = 200;
    const auto e = explain_lime(p, Document::from_text("d", "one two three four"), 10, cfg, 9);
    for (const auto& a : e.attributions) EXPECT_NEAR(a.score, 0.0, 1e-6);
}

TEST(Lime, CardinalityAndDeterminism) {
    const auto p = smooth_predictor();
    LimeConfig cfg;
    cfg.n_samples = 300;
    const auto doc = Document::from_text("d", "x y y z q");
    const auto a = explain_lime(p, doc, 100, cfg, 5);
    EXPECT_LE(a.attributions.size(), 4u);
    const auto b = explain_lime(p, doc, 100, cfg, 5);
    EXPECT_EQ(a.attributions, b.attributions);
    const auto c = explain_lime(p, doc, 2, cfg, 5);
    ASSERT_EQ(c.attributions.size(), 2u);
    EXPECT_EQ(c.attributions[0], a.attributions[0]);
}

TEST(Lime, RejectsEmptyDocumentsAndTinySamples) {
    const auto p = smooth_predictor();
    LimeConfig cfg;
    EXPECT_THROW(explain_lime(p, Document::from_text("d", "..."), 5, cfg, 0), Error);
    cfg.n_samples = 5;
    EXPECT_THROW(explain_lime(p, Document::from_text("d", "x"), 5, cfg, 0), Error);
}

TEST(Omission, SingleTokenIsProbabilityDrop) {
    const auto p = smooth_predictor();
    const auto e = explain_omission(p, Document::from_text("d", "x"), 5);
    const auto full = p.predict_one("x");
    const auto empty = p.predict_one("");
    ASSERT_EQ(e.attributions.size(), 1u);
    EXPECT_DOUBLE_EQ(e.attributions[0].score, full.probs[full.argmax()] - empty.probs[full.argmax()]);
}

TEST(Omission, MatchesBruteForceDeletionOnTrainedModel) {
    LabeledDataset ds;
    ds.class_names = {"neg", "pos"};
    ds.add(Document::from_text("1", "good movie"), 1);
    ds.add(Document::from_text("2", "bad movie"), 0);
    const auto model = train(ds);
    const auto doc = Document::from_text("d", "good movie good unseen");
    const auto e = explain_omission(model, doc, 10);
    const auto y = model.predict_one("good movie good unseen").argmax();
    const double base = model.predict_one("good movie good unseen").probs[y];
    std::map<std::string, double> expected{{"good", base - model.predict_one("movie unseen").probs[y]},
                                           {"movie", base - model.predict_one("good good unseen").probs[y]},
                                           {"unseen", 0.0}};
    ASSERT_EQ(e.attributions.size(), 3u);
    for (const auto& a : e.attributions) EXPECT_DOUBLE_EQ(a.score, expected.at(a.word)) << a.word;
    EXPECT_EQ(e.attributions.front().word, "good");
}

TEST(Gradient, ZeroWeightModelKeepsOccurrenceOrderWithZeroScores) {
    LinearTextModel m({"a", "b"}, {"x", "y"});
    const auto e = explain_gradient(m, Document::from_text("d", "y x y w"), 10);
    ASSERT_EQ(e.attributions.size(), 3u);
    EXPECT_EQ(e.attributions[0].word, "y");
    EXPECT_EQ(e.attributions[1].word, "x");
    EXPECT_EQ(e.attributions[2].word, "w");
    for (const auto& a : e.attributions) EXPECT_EQ(a.score, 0.0);
}

TEST(Gradient, DuplicatesSumAndRankingFollowsFiniteDifferences) {
    LinearTextModel m({"a", "b"}, {"x", "y", "z"});
    m.weight(1, 0) = 0.5;
    m.weight(1, 1) = 2.0;
    m.weight(1, 2) = -1.0;
    m.bias(1) = 3.0;
    const auto once = explain_gradient(m, Document::from_text("d", "x y z"), 10);
    const auto twice = explain_gradient(m, Document::from_text("d", "x y z x"), 10);
    auto score = [](const Explanation& e, const std::string& w) {
        for (const auto& a : e.attributions) {
            if (a.word == w) return a.score;
        }
        return std::nan("");
    };
    EXPECT_DOUBLE_EQ(score(twice, "x"), 2 * score(once, "x"));

    // Finite differences of the predicted-class logit with respect to each word's count.
    const auto doc = Document::from_text("d", "x y z x");
    const auto y = m.predict_one("x y z x").argmax();
    std::vector<std::pair<double, std::string>> fd;
    for (const auto& w : doc.distinct_tokens()) {
        auto logit_with = [&](double delta) {
            auto counts = m.featurize(doc.tokens);
            const auto f = static_cast<std::size_t>(m.feature_index(w));
            for (auto& [idx, v] : counts) {
                if (idx == f) v += delta;
            }
            return m.logits(counts)[y];
        };
        const double per_count = (logit_with(1e-4) - logit_with(-1e-4)) / 2e-4;
        const auto occurrences = static_cast<double>(std::count(doc.tokens.begin(), doc.tokens.end(), w));
        fd.emplace_back(per_count * occurrences, w);
    }
    std::stable_sort(fd.begin(), fd.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t i = 0; i < fd.size(); ++i) {
        EXPECT_EQ(twice.attributions[i].word, fd[i].second);
        EXPECT_NEAR(twice.attributions[i].score, fd[i].first, 1e-6);
    }
}

TEST(Gradient, BlackBoxRaisesCapabilityError) {
    const auto p = smooth_predictor();
    EXPECT_THROW(explain_gradient(p, Document::from_text("d", "x"), 3), CapabilityError);
    ExplainerConfig cfg;
    cfg.kind = ExplainerKind::gradient;
    EXPECT_THROW(explain(p, Document::from_text("d", "x"), cfg, 0), CapabilityError);
}

TEST(Explain, ClassPermutationPermutesPredictionOnly) {
    const auto p = smooth_predictor();
    CallbackPredictor rotated({"c", "a", "b"}, [&p](const std::vector<std::string>& t) {
        const auto d = p.predict_one(join_tokens(t));
        return std::vector<double>{d.probs[2], d.probs[0], d.probs[1]};
    });
    const auto doc = Document::from_text("d", "x y z q x");
    for (auto kind : {ExplainerKind::lime, ExplainerKind::omission}) {
        ExplainerConfig cfg;
        cfg.kind = kind;
        cfg.lime.n_samples = 400;
        const auto a = explain(p, doc, cfg, 17);
        const auto b = explain(rotated, doc, cfg, 17);
        EXPECT_EQ((a.predicted_class + 1) % 3, b.predicted_class);
        ASSERT_EQ(a.attributions.size(), b.attributions.size());
        for (std::size_t i = 0; i < a.attributions.size(); ++i) {
            EXPECT_EQ(a.attributions[i].word, b.attributions[i].word);
            EXPECT_NEAR(a.attributions[i].score, b.attributions[i].score, 1e-12);
        }
    }
}

TEST(Explainer, ParsesNames) {
    EXPECT_EQ(parse_explainer("lime"), ExplainerKind::lime);
    EXPECT_EQ(parse_explainer("omis"), ExplainerKind::omission);
    EXPECT_EQ(parse_explainer("gradient"), ExplainerKind::gradient);
    EXPECT_THROW(parse_explainer("shap"), Error);
}
