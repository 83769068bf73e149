#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "corpusforge/errors.h"
#include "corpusforge/histogram.h"
#include "corpusforge/knn_histogram.h"
#include "stubs.h"

namespace corpusforge {
namespace {

TEST(Histogram, BinsAreHalfOpenExceptTheLast) {
  const std::vector<double> values = {0.0, 0.49, 0.5, 1.0, 1.5, 2.0};
  const auto h = Histogram::build(values, {0.0, 2.0, 4});
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{2, 1, 1, 2}));
  EXPECT_EQ(h.clamped, 0u);
  EXPECT_DOUBLE_EQ(h.bin_left(1), 0.5);
  EXPECT_DOUBLE_EQ(h.bin_right(3), 2.0);
}

TEST(Histogram, ClampsOutOfRangeValues) {
  const std::vector<double> values = {-1.0, 3.0, 1.0};
  const auto h = Histogram::build(values, {0.0, 2.0, 2});
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{1, 2}));
  EXPECT_EQ(h.clamped, 2u);
}

TEST(Histogram, PopulationStatistics) {
  const std::vector<double> values = {2, 4, 4, 4, 5, 5, 7, 9};
  const auto h = Histogram::build(values, {0.0, 10.0, 10});
  EXPECT_DOUBLE_EQ(h.mean, 5.0);
  EXPECT_DOUBLE_EQ(h.stddev, 2.0);
  EXPECT_EQ(h.n, 8u);
}

TEST(Histogram, EmptyInputAndBadSpec) {
  const auto h = Histogram::build({}, {0.0, 1.0, 3});
  EXPECT_EQ(h.n, 0u);
  EXPECT_EQ(h.counts, (std::vector<std::size_t>{0, 0, 0}));
  EXPECT_THROW(Histogram::build({}, {0.0, 1.0, 0}), ConfigError);
  EXPECT_THROW(Histogram::build({}, {1.0, 1.0, 3}), ConfigError);
}

TEST(Histogram, CountsSumToN) {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-0.5, 2.5);
  std::vector<double> values(1000);
  for (auto& v : values) v = u(rng);
  const auto h = Histogram::build(values, {0.0, 2.0, 40});
  std::size_t total = 0;
  for (auto c : h.counts) total += c;
  EXPECT_EQ(total, values.size());
}

TEST(Histogram, CsvLayout) {
  const std::vector<double> values = {0.1, 0.6};
  const auto h = Histogram::build(values, {0.0, 1.0, 2});
  EXPECT_EQ(h.to_csv(), "bin_left,bin_right,count\n0,0.5,1\n0.5,1,1\n");
  EXPECT_EQ(format_double(0.1), "0.1");
}

TEST(KnnHistogram, AxisVectorsAreAtUnitDistance) {
  VectorStore store(4);
  for (std::size_t i = 0; i < 4; ++i) {
    std::vector<float> v(4, 0.0f);
    v[i] = 1.0f;
    store.add(v);
  }
  store.add(std::vector<float>{2, 0, 0, 0});  // identical direction to entry 0
  KnnHistogramOptions options;
  options.k = 10;
  options.histogram = {0.0, 2.0, 4};
  const auto result = distance_histogram(store, options);
  // Entries 0 and 4 see three axes; entries 1..3 see four vectors.
  EXPECT_EQ(result.distances.size(), 3u + 4u * 3u + 3u);
  for (double d : result.distances) EXPECT_NEAR(d, 1.0, 1e-12);
  EXPECT_EQ(result.histogram.counts[2], result.distances.size());
}

TEST(KnnHistogram, KLimitsNeighbors) {
  testing::HashEmbedder embedder(32);
  Corpus corpus;
  Conversation c;
  c.id = "c";
  for (int i = 0; i < 12; ++i) {
    c.messages.push_back({"c/" + std::to_string(i), Role::kHuman, "testo " + std::to_string(i)});
  }
  corpus.conversations.push_back(c);
  KnnHistogramOptions options;
  options.k = 3;
  options.dimension = 32;
  options.batch_size = 5;
  const auto result = distance_histogram(corpus, embedder, options);
  EXPECT_EQ(result.distances.size(), 36u);
  EXPECT_EQ(embedder.calls(), 3);
  for (double d : result.distances) {
    EXPECT_GE(d, 0.0);
    EXPECT_LE(d, 2.0);
  }
}

TEST(KnnHistogram, TransportErrorNamesMessage) {
  testing::FailingEmbedder embedder;
  Corpus corpus;
  Conversation c;
  c.id = "c";
  c.messages.push_back({"c/0", Role::kHuman, "x"});
  corpus.conversations.push_back(c);
  try {
    distance_histogram(corpus, embedder, KnnHistogramOptions{});
    FAIL();
  } catch (const TransportError& e) {
    EXPECT_NE(std::string(e.what()).find("c/0"), std::string::npos);
  }
  EXPECT_THROW(distance_histogram(Corpus{}, embedder, KnnHistogramOptions{}), DataError);
}

}  // namespace
}  // namespace corpusforge
