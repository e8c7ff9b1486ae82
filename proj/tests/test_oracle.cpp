#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "toki/oracle.hpp"

using namespace toki;

namespace {

std::vector<double> unit2(double angle) { return {std::cos(angle), std::sin(angle)}; }

Explanation expl(ClassId c, std::vector<Attribution> a) { return {c, 0.95, std::move(a), 10}; }

// "great" and "superb" sit next to the keyword; "zq" next to the non-keyword.
struct Toy {
    EmbeddingStore store{"toy", 2};
    KeywordIndex index;
    EmbeddingEnsemble ensemble;
};

Toy toy() {
    Toy t;
    t.store.insert("positive", unit2(0.0));
    t.store.insert("good", unit2(0.05));
    t.store.insert("great", unit2(0.15));
    t.store.insert("superb", unit2(0.25));
    t.store.insert("movie", unit2(1.6));
    t.store.insert("zq", unit2(2.5));
    t.store.insert("qz", unit2(2.45));
    ClassKeywords ck;
    ck.class_name = "positive";
    ck.keywords = {"good"};
    ck.non_keywords = {"movie", "zq"};
    t.index.classes = {ck};
    t.ensemble = {{t.store}, {0.8}};
    return t;
}

}  // namespace

TEST(Relatedness, NearestPoolWordDecides) {
    const auto t = toy();
    const auto& ck = t.index.at(0);
    EXPECT_EQ(relatedness_indicator("great", ck, t.store), 1);
    EXPECT_EQ(relatedness_indicator("good", ck, t.store), 1);
    EXPECT_EQ(relatedness_indicator("qz", ck, t.store), 0);
    EXPECT_EQ(relatedness_indicator("zq", ck, t.store), 0);
    EXPECT_EQ(relatedness_indicator("never-seen", ck, t.store), 0);
}

TEST(Relatedness, EquidistantWordGoesToKeywords) {
    ClassKeywords ck;
    ck.keywords = {"k"};
    ck.non_keywords = {"f"};
    // "f" duplicates "k", so the tie is exact.
    EmbeddingStore exact("exact", 2);
    exact.insert("k", unit2(0.3));
    exact.insert("f", unit2(0.3));
    exact.insert("w", unit2(1.0));
    EXPECT_EQ(relatedness_indicator("w", ck, exact), 1);
}

TEST(Relatedness, EmptyKeywordSetMeansUnrelated) {
    const auto t = toy();
    ClassKeywords ck = t.index.at(0);
    ck.keywords.clear();
    EXPECT_EQ(relatedness_indicator("good", ck, t.store), 0);
    ck.keywords = {"ghost"};  // not embeddable
    EXPECT_EQ(relatedness_indicator("good", ck, t.store), 0);
}

TEST(Assess, ShortcutDominatedExplanationIsUntrustworthy) {
    const auto t = toy();
    const auto v = assess(expl(0, {{"zq", 0.6}, {"great", 0.2}, {"movie", -0.1}}), 0, t.index, t.ensemble);
    EXPECT_FALSE(v.trustworthy());
    EXPECT_NEAR(v.is_rel, 0.2, 1e-15);
    EXPECT_NEAR(v.is_unr, 0.6, 1e-15);
    EXPECT_FALSE(v.words[2].counted);
}

TEST(Assess, KeywordDominatedExplanationIsTrustworthy) {
    const auto t = toy();
    const auto v = assess(expl(0, {{"great", 0.5}, {"superb", 0.3}, {"zq", 0.1}}), 0, t.index, t.ensemble);
    EXPECT_TRUE(v.trustworthy());
    EXPECT_NEAR(v.is_rel, 0.8, 1e-15);
    EXPECT_NEAR(v.is_unr, 0.1, 1e-15);
}

TEST(Assess, EqualSumsAreTrustworthyAndNonPositiveScoresIgnored) {
    const auto t = toy();
    EXPECT_TRUE(assess(expl(0, {{"great", 0.25}, {"zq", 0.25}}), 0, t.index, t.ensemble).trustworthy());
    const auto neg = assess(expl(0, {{"great", -0.5}, {"zq", 0.0}}), 0, t.index, t.ensemble);
    EXPECT_EQ(neg.is_rel, 0.0);
    EXPECT_EQ(neg.is_unr, 0.0);
    EXPECT_TRUE(neg.trustworthy());
    const auto unrelated_only = assess(expl(0, {{"zq", 1e-12}, {"great", -5.0}}), 0, t.index, t.ensemble);
    EXPECT_FALSE(unrelated_only.trustworthy());
}

TEST(Assess, OutOfVocabularyWordsCountAsUnrelated) {
    const auto t = toy();
    const auto v = assess(expl(0, {{"mystery", 0.4}, {"great", 0.3}}), 0, t.index, t.ensemble);
    EXPECT_FALSE(v.words[0].related);
    EXPECT_FALSE(v.trustworthy());
}

TEST(Assess, RejectsEmptyAndMismatchedExplanations) {
    const auto t = toy();
    EXPECT_THROW(assess(expl(0, {}), 0, t.index, t.ensemble), Error);
    EXPECT_THROW(assess(expl(1, {{"great", 0.3}}), 0, t.index, t.ensemble), Error);
    EmbeddingEnsemble empty;
    EXPECT_THROW(assess(expl(0, {{"great", 0.3}}), 0, t.index, empty), Error);
}

TEST(Assess, MatchesDirectComputationOnRandomInstances) {
    std::mt19937_64 rng(404);
    std::normal_distribution<double> n(0.0, 1.0);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n_stores = 1 + rng() % 3;
        const std::size_t dim = 2 + rng() % 4;
        std::vector<std::string> vocab;
        for (int i = 0; i < 12; ++i) vocab.push_back("v" + std::to_string(i));
        EmbeddingEnsemble ens;
        for (std::size_t s = 0; s < n_stores; ++s) {
            EmbeddingStore store("s" + std::to_string(s), dim);
            for (const auto& w : vocab) {
                if (rng() % 8 == 0) continue;  // holes in the vocabulary
                std::vector<double> v(dim);
                for (auto& x : v) x = n(rng);
                store.insert(w, v);
            }
            ens.stores.push_back(std::move(store));
            ens.thetas.push_back(0.5);
        }
        ClassKeywords ck;
        for (std::size_t i = 0; i < 8; ++i) (rng() % 2 ? ck.keywords : ck.non_keywords).insert(vocab[i]);
        KeywordIndex idx;
        idx.classes = {ck};
        std::vector<Attribution> attr;
        for (std::size_t i = 0; i < 5; ++i) attr.push_back({vocab[rng() % vocab.size()] + (rng() % 10 ? "" : "x"), u(rng)});

        double is_rel = 0.0, is_unr = 0.0;
        for (const auto& a : attr) {
            int yes = 0;
            for (const auto& store : ens.stores) {
                const auto q = store.find(a.word);
                if (!q) continue;
                double bk = -2.0, bf = -2.0;
                for (const auto& w : vocab) {
                    const auto v = store.find(w);
                    if (!v) continue;
                    double c = 0.0;
                    for (std::size_t d = 0; d < dim; ++d) c += (*q)[d] * (*v)[d];
                    if (ck.keywords.count(w)) bk = std::max(bk, c);
                    if (ck.non_keywords.count(w)) bf = std::max(bf, c);
                }
                if (bk > -2.0 && bk >= bf - 1e-15) ++yes;
            }
            const bool related = 2 * yes > static_cast<int>(ens.size());
            if (a.score > 0) (related ? is_rel : is_unr) += a.score;
        }
        const auto v = assess(expl(0, attr), 0, idx, ens);
        EXPECT_NEAR(v.is_rel, is_rel, 1e-12) << trial;
        EXPECT_NEAR(v.is_unr, is_unr, 1e-12) << trial;
        EXPECT_EQ(v.trustworthy(), v.is_rel >= v.is_unr);
    }
}

TEST(AssessNoKi, ComparesWordsToTheClassName) {
    const auto t = toy();
    const auto v = assess_no_ki(expl(0, {{"great", 0.4}, {"movie", 0.3}}), 0, "positive", t.ensemble);
    EXPECT_EQ(v.method, OracleMethod::toki_no_ki);
    EXPECT_TRUE(v.words[0].related);   // cos 0.989 >= 0.8
    EXPECT_FALSE(v.words[1].related);  // cos -0.03
    EXPECT_TRUE(v.trustworthy());
    const auto unnamed = assess_no_ki(expl(0, {{"great", 0.4}}), 0, "not in store", t.ensemble);
    EXPECT_FALSE(unnamed.trustworthy());
}

TEST(Naive, ThresholdIsInclusiveForTrust) {
    EXPECT_TRUE(naive_assess(0.9).trustworthy());
    EXPECT_FALSE(naive_assess(0.8999).trustworthy());
    EXPECT_TRUE(naive_assess(0.99, 0.95).trustworthy());
    EXPECT_FALSE(naive_assess(0.94, 0.95).trustworthy());
}

TEST(Verdict, JsonCarriesEvidence) {
    const auto t = toy();
    const auto v = assess(expl(0, {{"zq", 0.6}, {"great", 0.2}}), 0, t.index, t.ensemble);
    const auto j = v.to_json("d1");
    EXPECT_EQ(j["doc_id"], "d1");
    EXPECT_EQ(j["method"], "toki");
    EXPECT_EQ(j["label"], "untrustworthy");
    EXPECT_EQ(j["words"].size(), 2u);
    EXPECT_EQ(j["words"][1]["votes"], nlohmann::json::array({1}));
    const auto nj = naive_assess(0.7).to_json("d2");
    EXPECT_EQ(nj["confidence"], 0.7);
    EXPECT_FALSE(nj.contains("words"));
}

TEST(Methods, ParseAndPrint) {
    for (auto m : {OracleMethod::toki, OracleMethod::naive, OracleMethod::toki_no_ki}) EXPECT_EQ(parse_method(to_string(m)), m);
    EXPECT_THROW(parse_method("vote"), Error);
    EXPECT_EQ(parse_trust_label("trustworthy"), TrustLabel::trustworthy);
    EXPECT_THROW(parse_trust_label("maybe"), Error);
}
