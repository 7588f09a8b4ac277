#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gradcheck.hpp"
#include "nerclust/embeddings.hpp"
#include "nerclust/error.hpp"
#include "nerclust/text.hpp"
#include "test_util.hpp"

namespace nerclust {
namespace {

TokenCorpus corpus(std::initializer_list<std::string> docs) {
  TokenCorpus c;
  int i = 0;
  for (const auto& d : docs) c.push_back({"d" + std::to_string(i++), text::split_whitespace(d)});
  return c;
}

// Two entity groups whose mentions are surrounded by disjoint context words.
TokenCorpus two_group_corpus(std::size_t sentences, std::uint64_t seed) {
  const std::vector<std::vector<std::string>> entities = {{"Ann_Lee_PER", "Bob_Ray_PER", "Cy_Orr_PER"},
                                                          {"Acme_Corp_ORG", "Beta_Bank_ORG", "Core_Group_ORG"}};
  const std::vector<std::vector<std::string>> contexts = {{"vote", "senate", "bill", "campaign", "party", "law"},
                                                          {"shares", "profit", "merger", "stock", "bond", "loan"}};
  std::mt19937_64 rng(seed);
  TokenCorpus c;
  for (std::size_t s = 0; s < sentences; ++s) {
    const std::size_t g = s % 2;
    TokenDocument doc{"s" + std::to_string(s), {}};
    for (int w = 0; w < 3; ++w) doc.tokens.push_back(contexts[g][rng() % 6]);
    doc.tokens.push_back(entities[g][rng() % 3]);
    for (int w = 0; w < 3; ++w) doc.tokens.push_back(contexts[g][rng() % 6]);
    c.push_back(std::move(doc));
  }
  return c;
}

Hyperparameters small(ModelKind kind = ModelKind::SkipGram) {
  Hyperparameters h;
  h.kind = kind;
  h.dim = 16;
  h.window = 2;
  h.negatives = 3;
  h.epochs = 5;
  h.min_count = 1;
  h.learning_rate = Hyperparameters::default_learning_rate(kind);
  return h;
}

// ---------------------------------------------------------------------------
// Kernels

TEST(Kernels, ZeroVectorsLossIsTwoLogTwo) {
  std::vector<double> c(4, 0.0), ctx(4, 0.0), neg(4, 0.0);
  std::vector<std::span<double>> negs = {neg};
  const double loss = sgns_step<double>(c, ctx, negs, 0.1);
  EXPECT_NEAR(loss, 2 * std::log(2.0), 1e-12);
  EXPECT_NEAR(loss, 1.3863, 1e-4);
}

TEST(Kernels, SaturatedPositiveHasNoLossOrGradient) {
  // dot(center, context) = 30 at the clamp boundary.
  std::vector<double> c = {3.0, 0.0}, ctx = {10.0, 0.0};
  std::vector<double> c0 = c, ctx0 = ctx;
  std::vector<std::span<double>> none;
  const double loss = sgns_step<double>(c, ctx, none, 1.0);
  EXPECT_LT(loss, 1e-12);
  EXPECT_NEAR(1.0 - sigmoid(30.0), std::exp(-30.0), 1e-15);
  for (std::size_t i = 0; i < 2; ++i) {
    EXPECT_LT(std::abs(c[i] - c0[i]), 1e-11);
    EXPECT_LT(std::abs(ctx[i] - ctx0[i]), 1e-11);
  }
  // Far beyond the clamp the loss stays finite.
  EXPECT_TRUE(std::isfinite(neg_log_sigmoid(-1e6)));
  EXPECT_NEAR(neg_log_sigmoid(-1e6), 30.0, 1e-9);
}

TEST(Kernels, LossMatchesReferenceAndUpdateIsDescent) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    auto g = testing::random_instance(rng, 8, 1, 3);
    double loss = 0;
    testing::analytic_gradient(g, false, &loss);
    EXPECT_NEAR(loss, testing::instance_loss(g), 1e-12);
    // A small step along the update lowers the loss.
    auto moved = g;
    std::vector<std::span<double>> negs;
    for (auto& n : moved.negatives) negs.emplace_back(n);
    sgns_step<double>(moved.inputs[0], moved.positive, negs, 1e-3);
    EXPECT_LT(testing::instance_loss(moved), testing::instance_loss(g));
  }
}

TEST(Kernels, SkipGramGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(17);
  for (int t = 0; t < 100; ++t) {
    const auto g = testing::random_instance(rng, 8, 1, 1 + t % 5);
    const double err = testing::relative_error(testing::analytic_gradient(g, false), testing::numeric_gradient(g, 1e-5));
    EXPECT_LT(err, 1e-4) << "instance " << t;
  }
}

TEST(Kernels, CbowGradientMatchesFiniteDifference) {
  std::mt19937_64 rng(29);
  for (int t = 0; t < 100; ++t) {
    const auto g = testing::random_instance(rng, 8, 1 + t % 4, 1 + t % 5);
    const double err = testing::relative_error(testing::analytic_gradient(g, true), testing::numeric_gradient(g, 1e-5));
    EXPECT_LT(err, 1e-4) << "instance " << t;
  }
}

TEST(Kernels, FloatKernelAgreesWithDouble) {
  std::vector<float> c = {0.1f, -0.2f, 0.3f}, ctx = {0.4f, 0.1f, -0.5f}, neg = {-0.3f, 0.2f, 0.1f};
  std::vector<std::span<float>> negs = {neg};
  std::vector<double> cd = {0.1, -0.2, 0.3}, ctxd = {0.4, 0.1, -0.5}, negd = {-0.3, 0.2, 0.1};
  std::vector<std::span<double>> negsd = {negd};
  EXPECT_NEAR(sgns_step<float>(c, ctx, negs, 0.5f), sgns_step<double>(cd, ctxd, negsd, 0.5), 1e-6);
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(c[i], cd[i], 1e-6);
}

// ---------------------------------------------------------------------------
// Vocabulary

TEST(Vocab, MinCountDropsRareTokens) {
  const Vocabulary v = build_vocab(corpus({"a a a b"}), 2);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v.contains("a"));
  EXPECT_FALSE(v.contains("b"));
  EXPECT_EQ(v.count(v.index("a")), 3u);
}

TEST(Vocab, EntityTokensExempt) {
  const Vocabulary v = build_vocab(corpus({"x X_PER"}), 5);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(v.contains("X_PER"));
  EXPECT_FALSE(v.contains("x"));
}

TEST(Vocab, NoiseDistributionThreeQuarterPower) {
  const Vocabulary v = build_vocab(corpus({"a a a a a a a a b"}), 1);
  const auto& noise = v.noise_distribution();
  // Brute-force normalisation of count^0.75.
  const double wa = std::pow(8.0, 0.75), wb = 1.0;
  EXPECT_NEAR(wa, 4.757, 1e-3);
  EXPECT_NEAR(noise[v.index("a")], wa / (wa + wb), 1e-12);
  EXPECT_NEAR(noise[v.index("b")] * wa, noise[v.index("a")], 1e-12);
  EXPECT_NEAR(std::accumulate(noise.begin(), noise.end(), 0.0), 1.0, 1e-9);
}

TEST(Vocab, IndicesDenseAndOrdered) {
  const Vocabulary v = build_vocab(corpus({"c b a b c c", "Z_ORG a"}), 1);
  ASSERT_EQ(v.size(), 4u);
  EXPECT_EQ(v.token(0), "c");
  EXPECT_EQ(v.token(1), "a");  // ties by token
  EXPECT_EQ(v.token(2), "b");
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(v.index(v.token(i)), i);
  EXPECT_EQ(v.document_frequency(v.index("a")), 2u);
  EXPECT_EQ(v.total_count(), 8u);
}

TEST(Vocab, SampleNoiseFollowsDistribution) {
  const Vocabulary v = build_vocab(corpus({"a a a a a a a a b"}), 1);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::size_t hits = 0;
  const std::size_t n = 200000;
  for (std::size_t i = 0; i < n; ++i) hits += v.sample_noise(u(rng)) == v.index("b");
  const double expected = v.noise_distribution()[v.index("b")];
  EXPECT_NEAR(static_cast<double>(hits) / n, expected, 0.005);
  EXPECT_LT(v.sample_noise(0.0), v.size());
  EXPECT_LT(v.sample_noise(std::nextafter(1.0, 0.0)), v.size());
}

TEST(Vocab, Errors) {
  EXPECT_THROW(build_vocab({}, 1), Error);
  EXPECT_THROW(build_vocab(corpus({"a b c"}), 2), Error);
  const Vocabulary v = build_vocab(corpus({"a a"}), 1);
  try {
    v.index("nope");
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("\"nope\""), std::string::npos);
  }
}

// ---------------------------------------------------------------------------
// Training

TEST(Train, DeterministicBitIdentical) {
  const auto c = two_group_corpus(100, 1);
  const auto v = build_vocab(c, 1);
  for (auto kind : {ModelKind::SkipGram, ModelKind::Cbow}) {
    const auto a = train(c, v, small(kind));
    const auto b = train(c, v, small(kind));
    EXPECT_EQ(a.input.data, b.input.data);
    EXPECT_EQ(a.output.data, b.output.data);
    EXPECT_EQ(a.stats.epoch_mean_loss, b.stats.epoch_mean_loss);
    auto other = small(kind);
    other.seed = 2;
    EXPECT_NE(train(c, v, other).input.data, a.input.data);
  }
}

TEST(Train, LossDecreasesOnTwoGroupCorpus) {
  const auto c = two_group_corpus(200, 2);
  const auto v = build_vocab(c, 1);
  for (auto kind : {ModelKind::SkipGram, ModelKind::Cbow}) {
    const auto m = train(c, v, small(kind));
    ASSERT_EQ(m.stats.epoch_mean_loss.size(), 5u);
    EXPECT_LT(m.stats.epoch_mean_loss.back(), m.stats.epoch_mean_loss.front()) << display_name(kind);
    EXPECT_GT(m.stats.updates, 0u);
  }
}

TEST(Train, InitialisationRange) {
  const auto c = two_group_corpus(10, 3);
  const auto v = build_vocab(c, 1);
  auto h = small();
  h.epochs = 1;
  h.learning_rate = 1e-30;  // effectively no movement
  const auto m = train(c, v, h);
  EXPECT_EQ(m.input.rows, v.size());
  EXPECT_EQ(m.input.cols, 16u);
  for (float x : m.input.data) {
    EXPECT_LE(std::abs(x), 0.5f / 16 + 1e-7f);
  }
  for (float x : m.output.data) EXPECT_LT(std::abs(x), 1e-20f);
}

TEST(Train, WithinGroupSimilarityDominates) {
  const auto c = two_group_corpus(2000, 4);
  const auto v = build_vocab(c, 1);
  auto h = small();
  h.epochs = 10;
  const auto m = train(c, v, h);
  const std::vector<std::string> ents = {"Ann_Lee_PER", "Bob_Ray_PER", "Cy_Orr_PER",
                                         "Acme_Corp_ORG", "Beta_Bank_ORG", "Core_Group_ORG"};
  double min_within = 2, max_between = -2;
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = i + 1; j < 6; ++j) {
      const double s = cosine(ents[i], ents[j], m);
      if ((i < 3) == (j < 3)) {
        min_within = std::min(min_within, s);
      } else {
        max_between = std::max(max_between, s);
      }
    }
  }
  EXPECT_GT(min_within, max_between);
}

TEST(Train, FastModeRuns) {
  const auto c = two_group_corpus(400, 5);
  const auto v = build_vocab(c, 1);
  auto h = small();
  h.threads = 4;
  const auto m = train(c, v, h);
  for (float x : m.input.data) ASSERT_TRUE(std::isfinite(x));
  EXPECT_LT(m.stats.epoch_mean_loss.back(), m.stats.epoch_mean_loss.front());
}

TEST(Train, SubsamplingKeepsEntities) {
  const auto c = two_group_corpus(200, 6);
  const auto v = build_vocab(c, 1);
  auto h = small();
  h.subsample = 1e-3;
  const auto m = train(c, v, h);
  EXPECT_GT(m.stats.updates, 0u);
}

TEST(Train, InvalidHyperparameters) {
  const auto c = two_group_corpus(10, 7);
  const auto v = build_vocab(c, 1);
  auto bad = [&](auto mutate) {
    auto h = small();
    mutate(h);
    EXPECT_THROW(train(c, v, h), Error);
  };
  bad([](Hyperparameters& h) { h.epochs = 0; });
  bad([](Hyperparameters& h) { h.dim = 0; });
  bad([](Hyperparameters& h) { h.window = 0; });
  bad([](Hyperparameters& h) { h.negatives = 0; });
  bad([](Hyperparameters& h) { h.learning_rate = 0; });
  bad([](Hyperparameters& h) { h.threads = 0; });
}

TEST(Train, VocabularyCorpusMismatch) {
  const auto v = build_vocab(corpus({"a a b b"}), 1);
  EXPECT_THROW(train(corpus({"a b c a"}), v, small()), Error);
  EXPECT_THROW(train(corpus({"a a b b"}), Vocabulary::from_tokens({"a", "b"}), small()), Error);
}

TEST(Train, DefaultsAndNames) {
  const Hyperparameters h;
  EXPECT_EQ(h.dim, 500u);
  EXPECT_EQ(h.window, 10u);
  EXPECT_EQ(h.negatives, 5u);
  EXPECT_EQ(h.epochs, 5u);
  EXPECT_EQ(h.min_count, 5u);
  EXPECT_DOUBLE_EQ(Hyperparameters::default_learning_rate(ModelKind::SkipGram), 0.025);
  EXPECT_DOUBLE_EQ(Hyperparameters::default_learning_rate(ModelKind::Cbow), 0.05);
  EXPECT_EQ(parse_model_kind("cbow"), ModelKind::Cbow);
  EXPECT_EQ(parse_model_kind("skipgram"), ModelKind::SkipGram);
  EXPECT_THROW(parse_model_kind("glove"), Error);
}

// ---------------------------------------------------------------------------
// Cosine and persistence

TEST(Cosine, Examples) {
  const std::vector<float> x = {0.3f, -1.2f, 2.0f}, e1 = {1, 0}, e2 = {0, 1}, neg = {-1, 0}, zero = {0, 0};
  EXPECT_NEAR(cosine(x, x), 1.0, 1e-9);
  EXPECT_EQ(cosine(e1, e2), 0.0);
  EXPECT_EQ(cosine(e1, neg), -1.0);
  EXPECT_EQ(cosine(e1, zero), 0.0);
}

TEST(Cosine, SymmetricAndBoundedOverVocabulary) {
  const auto c = two_group_corpus(200, 8);
  const auto v = build_vocab(c, 1);
  const auto m = train(c, v, small());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double s = cosine(v.token(i), v.token(j), m);
      EXPECT_EQ(s, cosine(v.token(j), v.token(i), m));
      EXPECT_GE(s, -1.0);
      EXPECT_LE(s, 1.0);
    }
  }
  try {
    cosine("Ann_Lee_PER", "Nobody_PER", m);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("Nobody_PER"), std::string::npos);
  }
}

TEST(ModelText, RoundTripWithinTolerance) {
  testing::TempDir dir;
  const auto c = two_group_corpus(100, 9);
  const auto v = build_vocab(c, 1);
  const auto m = train(c, v, small());
  const std::string text = write_model_text(m);
  EXPECT_EQ(text.substr(0, text.find('\n')), std::to_string(v.size()) + " 16");
  const auto p = dir.write("model.txt", text);
  const auto back = load_model_text(p);
  ASSERT_EQ(back.vocab.tokens(), v.tokens());
  ASSERT_EQ(back.input.data.size(), m.input.data.size());
  for (std::size_t i = 0; i < m.input.data.size(); ++i) EXPECT_NEAR(back.input.data[i], m.input.data[i], 1e-6);
  EXPECT_NEAR(cosine("Ann_Lee_PER", "Bob_Ray_PER", back), cosine("Ann_Lee_PER", "Bob_Ray_PER", m), 1e-6);
}

TEST(ModelText, MalformedRejected) {
  EXPECT_THROW(read_model_text(""), Error);
  EXPECT_THROW(read_model_text("2 2\na 1 2\n"), Error);
  EXPECT_THROW(read_model_text("1 2\na 1 x\n"), Error);
  EXPECT_THROW(read_model_text("1 2\na 1\n"), Error);
}

}  // namespace
}  // namespace nerclust
