#include <cmath>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "toki/bench.hpp"
#include "toki/synthetic.hpp"

using namespace toki;

namespace {

ConfusionCounts counts(std::uint64_t tp, std::uint64_t fp, std::uint64_t tn, std::uint64_t fn) {
    ConfusionCounts c;
    c.tp = tp;
    c.fp = fp;
    c.tn = tn;
    c.fn = fn;
    return c;
}

TrustLabels labels(std::initializer_list<std::pair<const char*, TrustLabel>> items) {
    TrustLabels out;
    for (const auto& [id, l] : items) out[id] = l;
    return out;
}

constexpr auto T = TrustLabel::trustworthy;
constexpr auto U = TrustLabel::untrustworthy;

}  // namespace

TEST(Metrics, GMeanAndF1ReferenceValues) {
    EXPECT_NEAR(g_mean(0.974, 0.638), 0.7883, 1e-4);
    EXPECT_NEAR(g_mean(0.925, 0.105), 0.3117, 1e-4);
    EXPECT_NEAR(f1_score(0.947, 0.974), 0.9603, 1e-4);
}

TEST(Metrics, HandCountedConfusionMatrix) {
    const auto m = compute_metrics(counts(8, 2, 6, 4));
    EXPECT_DOUBLE_EQ(m.accuracy, 0.7);
    EXPECT_DOUBLE_EQ(m.precision, 0.8);
    EXPECT_NEAR(m.sensitivity, 8.0 / 12.0, 1e-15);
    EXPECT_DOUBLE_EQ(m.specificity, 0.75);
    EXPECT_NEAR(m.f1, 2 * 0.8 * (2.0 / 3.0) / (0.8 + 2.0 / 3.0), 1e-15);
    EXPECT_NEAR(m.g_mean, std::sqrt(0.5), 1e-15);
    EXPECT_TRUE(m.undefined.empty());
}

TEST(Metrics, RandomCountsSatisfyDefinitions) {
    std::mt19937_64 rng(17);
    for (int i = 0; i < 1000; ++i) {
        const auto c = counts(1 + rng() % 50, 1 + rng() % 50, 1 + rng() % 50, 1 + rng() % 50);
        const auto m = compute_metrics(c);
        const double n = static_cast<double>(c.total());
        EXPECT_NEAR(m.accuracy, (c.tp + c.tn) / n, 1e-12);
        for (double v : {m.accuracy, m.precision, m.sensitivity, m.specificity, m.f1, m.g_mean}) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
        EXPECT_LE(m.g_mean, 0.5 * (m.sensitivity + m.specificity) + 1e-12);
        EXPECT_LE(m.f1, std::max(m.precision, m.sensitivity) + 1e-12);
        EXPECT_GE(m.f1, std::min(m.precision, m.sensitivity) - 1e-12);
        // Swapping the roles of the two classes swaps sensitivity and specificity.
        const auto flipped = compute_metrics(counts(c.tn, c.fn, c.tp, c.fp));
        EXPECT_NEAR(flipped.sensitivity, m.specificity, 1e-12);
        EXPECT_NEAR(flipped.g_mean, m.g_mean, 1e-12);
    }
}

TEST(Metrics, ZeroDenominatorsAreFlagged) {
    const auto all_negative = compute_metrics(counts(0, 0, 5, 0));
    EXPECT_EQ(all_negative.precision, 0.0);
    EXPECT_EQ(all_negative.g_mean, 0.0);
    EXPECT_NE(std::find(all_negative.undefined.begin(), all_negative.undefined.end(), "precision"), all_negative.undefined.end());
    EXPECT_NE(std::find(all_negative.undefined.begin(), all_negative.undefined.end(), "sensitivity"), all_negative.undefined.end());
    EXPECT_NE(std::find(all_negative.undefined.begin(), all_negative.undefined.end(), "f1"), all_negative.undefined.end());
    EXPECT_THROW(compute_metrics(ConfusionCounts{}), Error);
}

TEST(Roc, MatchesBruteForceAndHitsEndpoints) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<double> conf;
    std::vector<bool> truth;
    for (int i = 0; i < 300; ++i) {
        conf.push_back(u(rng));
        truth.push_back(u(rng) < conf.back());
    }
    const auto thresholds = default_roc_thresholds();
    const auto roc = roc_sweep(conf, truth, thresholds);
    ASSERT_EQ(roc.size(), thresholds.size());
    for (const auto& p : roc) {
        ConfusionCounts c;
        for (std::size_t i = 0; i < conf.size(); ++i) c.add(naive_assess(conf[i], p.threshold).label, truth[i] ? T : U);
        EXPECT_NEAR(p.tpr, static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn), 1e-12);
        EXPECT_NEAR(p.fpr, static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn), 1e-12);
    }
    EXPECT_EQ(roc.front().tpr, 1.0);
    EXPECT_EQ(roc.front().fpr, 1.0);
    EXPECT_EQ(roc.back().tpr, 0.0);
    EXPECT_EQ(roc.back().fpr, 0.0);
    for (std::size_t i = 1; i < roc.size(); ++i) {
        EXPECT_LE(roc[i].tpr, roc[i - 1].tpr);
        EXPECT_LE(roc[i].fpr, roc[i - 1].fpr);
    }
    EXPECT_THROW(roc_sweep({0.5}, {}, thresholds), Error);
}

TEST(ExplanationPrecision, DistinctWordOverlap) {
    EXPECT_DOUBLE_EQ(explanation_precision({"good", "movie", "zq", "good"}, {"good", "great"}), 1.0 / 3.0);
    EXPECT_DOUBLE_EQ(explanation_precision({"good"}, {"good"}), 1.0);
    EXPECT_DOUBLE_EQ(explanation_precision({"zq"}, {}), 0.0);
    EXPECT_THROW(explanation_precision({}, {"good"}), Error);
    EXPECT_EQ(label_by_precision(0.5), T);
    EXPECT_EQ(label_by_precision(0.49), U);
}

TEST(Annotations, PluralityMergeWithTiesUntrustworthy) {
    const auto merged = merge_annotations({labels({{"a", T}, {"b", T}, {"c", U}}),
                                           labels({{"a", T}, {"b", U}, {"c", U}}),
                                           labels({{"a", U}, {"b", U}, {"d", T}})});
    EXPECT_EQ(merged.at("a"), T);
    EXPECT_EQ(merged.at("b"), U);
    EXPECT_EQ(merged.at("c"), U);
    EXPECT_EQ(merged.at("d"), T);
    const auto tie = merge_annotations({labels({{"x", T}}), labels({{"x", U}})});
    EXPECT_EQ(tie.at("x"), U);
}

TEST(Annotations, ReadsJsonLinesAndReportsBadLines) {
    std::istringstream in("{\"doc_id\":\"1\",\"trust_label\":\"trustworthy\"}\n\n{\"doc_id\":\"2\",\"trust_label\":\"untrustworthy\"}\n");
    const auto l = read_trust_labels(in);
    EXPECT_EQ(l.size(), 2u);
    EXPECT_EQ(l.at("2"), U);
    std::istringstream bad("{\"doc_id\":\"1\",\"trust_label\":\"trustworthy\"}\n{\"doc_id\":\"2\"}\n");
    try {
        read_trust_labels(bad);
        FAIL();
    } catch (const ParseError& e) {
        EXPECT_EQ(e.line, 2u);
    }
}

class BenchFixture : public ::testing::Test {
protected:
    static void SetUpTestSuite() {
        synthetic::PlantedConfig pc;
        pc.train_per_class = 80;
        pc.genuine_test_per_class = 15;
        pc.shortcut_test_per_class = 10;
        pc.natural_test_per_class = 5;
        fx_ = new synthetic::PlantedFixture(synthetic::make_planted_fixture(pc));
        model_ = new LinearTextModel(train(fx_->train));
        ens_ = new EmbeddingEnsemble;
        for (const auto& s : fx_->stores) {
            ens_->stores.push_back(s);
            ens_->thetas.push_back(estimate_theta_relate(s, fx_->related_pairs, fx_->unrelated_pairs).theta);
        }
    }
    static void TearDownTestSuite() {
        delete fx_;
        delete model_;
        delete ens_;
    }
    static BenchOptions options() {
        BenchOptions o;
        o.explainer.lime.n_samples = 200;
        o.sample_limit = 0;
        o.seed = 3;
        o.workers = 2;
        return o;
    }
    static inline synthetic::PlantedFixture* fx_ = nullptr;
    static inline LinearTextModel* model_ = nullptr;
    static inline EmbeddingEnsemble* ens_ = nullptr;
};

TEST_F(BenchFixture, ReportShapeAndCounts) {
    const auto r = run_benchmark(*model_, fx_->train, fx_->test, fx_->trust, ens_, options());
    const auto& rep = r.report;
    EXPECT_EQ(rep["schema_version"], 1);
    EXPECT_EQ(rep["test"]["documents"], fx_->test.size());
    const std::size_t correct = rep["test"]["correct"];
    EXPECT_EQ(rep["test"]["assessed"].get<std::size_t>() + rep["test"]["unlabeled"].get<std::size_t>(), correct);
    EXPECT_EQ(rep["predictions"].size(), rep["test"]["assessed"].get<std::size_t>());
    for (const char* m : {"toki", "naive", "toki-no-ki"}) {
        ASSERT_TRUE(rep["methods"][m].contains("metrics")) << m;
        const auto& c = rep["methods"][m]["counts"];
        EXPECT_EQ(c["tp"].get<std::size_t>() + c["fp"].get<std::size_t>() + c["tn"].get<std::size_t>() +
                      c["fn"].get<std::size_t>(),
                  rep["test"]["assessed"].get<std::size_t>());
    }
    EXPECT_FALSE(rep.contains("timing"));
    ASSERT_TRUE(r.index.has_value());
    EXPECT_GT(rep["methods"]["toki"]["metrics"]["g_mean"].get<double>(),
              rep["methods"]["naive"]["metrics"]["g_mean"].get<double>());
}

TEST_F(BenchFixture, ReportIsIndependentOfWorkerCount) {
    auto one = options();
    one.workers = 1;
    auto four = options();
    four.workers = 4;
    EXPECT_EQ(run_benchmark(*model_, fx_->train, fx_->test, fx_->trust, ens_, one).report.dump(),
              run_benchmark(*model_, fx_->train, fx_->test, fx_->trust, ens_, four).report.dump());
}

TEST_F(BenchFixture, SingleMethodAndMissingEnsemble) {
    auto o = options();
    o.methods = {OracleMethod::naive};
    const auto naive_only = run_benchmark(*model_, fx_->train, fx_->test, fx_->trust, nullptr, o);
    EXPECT_EQ(naive_only.report["methods"].size(), 1u);
    EXPECT_FALSE(naive_only.index.has_value());
    EXPECT_TRUE(naive_only.report.contains("naive_roc"));

    o.methods = {OracleMethod::toki};
    const auto no_ens = run_benchmark(*model_, fx_->train, fx_->test, fx_->trust, nullptr, o);
    EXPECT_TRUE(no_ens.report["methods"]["toki"].contains("error"));
}

TEST_F(BenchFixture, RejectsEmptyInputsAndHandlesUnmatchedLabels) {
    LabeledDataset empty;
    empty.class_names = fx_->test.class_names;
    EXPECT_THROW(run_benchmark(*model_, fx_->train, empty, fx_->trust, ens_, options()), Error);
    EXPECT_THROW(run_benchmark(*model_, fx_->train, fx_->test, {}, ens_, options()), Error);
    auto o = options();
    o.methods = {OracleMethod::naive};
    const auto r = run_benchmark(*model_, fx_->train, fx_->test, labels({{"no-such-doc", T}}), ens_, o);
    EXPECT_EQ(r.report["test"]["assessed"], 0);
    EXPECT_TRUE(r.report["methods"]["naive"].contains("error"));
}
