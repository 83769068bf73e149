#include <gtest/gtest.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <random>
#include <thread>

#include "corpusforge/errors.h"
#include "corpusforge/vector_store.h"

namespace corpusforge {
namespace {

std::vector<float> random_vector(std::mt19937_64& rng, std::size_t dim) {
  std::normal_distribution<float> normal;
  std::vector<float> v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

// Independent oracle: cosine from raw vectors in long double.
double cosine(const std::vector<float>& a, const std::vector<float>& b) {
  long double ab = 0, aa = 0, bb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += static_cast<long double>(a[i]) * b[i];
    aa += static_cast<long double>(a[i]) * a[i];
    bb += static_cast<long double>(b[i]) * b[i];
  }
  return static_cast<double>(ab / std::sqrt(aa * bb));
}

TEST(VectorStore, AssignsSequentialIdsAndNormalizes) {
  VectorStore store(3);
  EXPECT_EQ(store.add(std::vector<float>{3, 0, 4}, "a"), 0u);
  EXPECT_EQ(store.add(std::vector<float>{0, 2, 0}, "b"), 1u);
  EXPECT_EQ(store.size(), 2u);
  const auto v = store.vector(0);
  EXPECT_FLOAT_EQ(v[0], 0.6f);
  EXPECT_FLOAT_EQ(v[2], 0.8f);
  EXPECT_EQ(store.label(1), "b");
  EXPECT_NEAR(store.similarity(0, 1), 0.0, 1e-12);
}

TEST(VectorStore, RejectsBadVectors) {
  VectorStore store(3);
  EXPECT_THROW(store.add(std::vector<float>{1, 2}), DimensionMismatch);
  EXPECT_THROW(store.add(std::vector<float>{0, 0, 0}), DataError);
  EXPECT_THROW(store.add(std::vector<float>{NAN, 0, 1}), DataError);
  EXPECT_THROW(store.max_similarity(std::vector<float>{1, 0}), DimensionMismatch);
  EXPECT_EQ(store.size(), 0u);
}

TEST(VectorStore, EmptyStoreHasNoNeighbor) {
  VectorStore store(4);
  EXPECT_FALSE(store.max_similarity(std::vector<float>{1, 0, 0, 0}).has_value());
  EXPECT_TRUE(store.knn(std::vector<float>{1, 0, 0, 0}, 5, false).empty());
}

TEST(VectorStore, ExactSimilarityAtBoundary) {
  VectorStore store(2);
  store.add(std::vector<float>{1, 0});
  const auto best = store.max_similarity(std::vector<float>{0.9f, std::sqrt(0.19f)});
  ASSERT_TRUE(best.has_value());
  EXPECT_NEAR(best->similarity, 0.9, 1e-7);
}

TEST(VectorStore, MaxSimilarityAndKnnMatchBruteForce) {
  std::mt19937_64 rng(11);
  const std::size_t dim = 24;
  for (int trial = 0; trial < 20; ++trial) {
    VectorStore store(dim);
    std::vector<std::vector<float>> raw;
    const std::size_t n = 1 + rng() % 60;
    for (std::size_t i = 0; i < n; ++i) {
      raw.push_back(random_vector(rng, dim));
      store.add(raw.back());
    }
    const auto query = random_vector(rng, dim);
    std::vector<std::pair<double, std::size_t>> oracle;
    for (std::size_t i = 0; i < n; ++i) oracle.push_back({cosine(query, raw[i]), i});
    std::sort(oracle.begin(), oracle.end(), [](const auto& a, const auto& b) {
      return a.first != b.first ? a.first > b.first : a.second < b.second;
    });

    const auto best = store.max_similarity(query);
    ASSERT_TRUE(best.has_value());
    EXPECT_EQ(best->id, oracle[0].second);
    EXPECT_NEAR(best->similarity, oracle[0].first, 1e-6);

    const std::size_t k = 1 + rng() % 10;
    const auto neighbors = store.knn(query, k, false);
    ASSERT_EQ(neighbors.size(), std::min(k, n));
    for (std::size_t r = 0; r < neighbors.size(); ++r) {
      EXPECT_EQ(neighbors[r].id, oracle[r].second);
      EXPECT_NEAR(neighbors[r].similarity, oracle[r].first, 1e-6);
    }

    const std::size_t prefix = rng() % (n + 1);
    const auto limited = store.max_similarity(query, prefix);
    if (prefix == 0) {
      EXPECT_FALSE(limited.has_value());
    } else {
      std::size_t arg = 0;
      for (std::size_t i = 1; i < prefix; ++i) {
        if (cosine(query, raw[i]) > cosine(query, raw[arg])) arg = i;
      }
      EXPECT_EQ(limited->id, arg);
    }
  }
}

TEST(VectorStore, TiesGoToSmallerId) {
  VectorStore store(2);
  store.add(std::vector<float>{0, 1});
  store.add(std::vector<float>{1, 0});
  store.add(std::vector<float>{2, 0});
  EXPECT_EQ(store.max_similarity(std::vector<float>{1, 0})->id, 1u);
  const auto top = store.knn(std::vector<float>{1, 0}, 2, false);
  EXPECT_EQ(top[0].id, 1u);
  EXPECT_EQ(top[1].id, 2u);
}

TEST(VectorStore, KnnCanExcludeIdenticalVectors) {
  VectorStore store(2);
  store.add(std::vector<float>{1, 0});
  store.add(std::vector<float>{5, 0});
  store.add(std::vector<float>{1, 1});
  const auto top = store.knn(std::vector<float>{1, 0}, 3, true);
  ASSERT_EQ(top.size(), 1u);
  EXPECT_EQ(top[0].id, 2u);
}

TEST(VectorStore, QueriesAreBitReproducible) {
  std::mt19937_64 rng(5);
  VectorStore store(64);
  for (int i = 0; i < 100; ++i) store.add(random_vector(rng, 64));
  const auto query = random_vector(rng, 64);
  const auto first = store.knn(query, 10, false);
  VectorStore copy = store;
  for (int i = 0; i < 5; ++i) EXPECT_EQ(copy.knn(query, 10, false), first);
}

TEST(VectorStore, SaveLoadRoundTrip) {
  std::mt19937_64 rng(9);
  VectorStore store(16);
  for (int i = 0; i < 30; ++i) store.add(random_vector(rng, 16), "m" + std::to_string(i));
  store.metadata()["seed_pool_digest"] = "abc";
  const auto path = std::filesystem::temp_directory_path() / "cf_store_test.f32";
  store.save(path);
  EXPECT_TRUE(std::filesystem::exists(VectorStore::header_path(path)));
  EXPECT_EQ(std::filesystem::file_size(path), 30u * 16u * 4u);

  const auto loaded = VectorStore::load(path);
  ASSERT_EQ(loaded.size(), 30u);
  EXPECT_EQ(loaded.metadata().at("seed_pool_digest"), "abc");
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(loaded.vector(i), store.vector(i));
    EXPECT_EQ(loaded.label(i), store.label(i));
  }
  EXPECT_EQ(VectorStore::load(path, 7).size(), 7u);

  std::filesystem::resize_file(path, 100);
  EXPECT_THROW(VectorStore::load(path), DataError);
  std::filesystem::remove(path);
  std::filesystem::remove(VectorStore::header_path(path));
}

TEST(VectorStore, ConcurrentQueriesSeePrefixes) {
  VectorStore store(8);
  std::atomic<bool> done{false};
  std::atomic<int> bad{0};
  std::thread reader([&] {
    std::vector<float> q(8, 1.0f);
    std::size_t last = 0;
    // Rows are stored as float32, so a unit vector can score a few ulps above 1.
    bool finished = false;
    do {
      finished = done;
      const auto top = store.knn(q, 1000, false);
      if (top.size() < last) bad++;
      last = top.size();
      for (const auto& n : top) {
        if (!(n.similarity > 0.99 && n.similarity < 1.0 + 1e-6)) bad++;
      }
    } while (!finished);
    if (last != 1000) bad++;
  });
  std::vector<float> v(8, 1.0f);
  for (int i = 0; i < 2000; ++i) {
    v[i % 8] = 1.0f + 1e-4f * static_cast<float>(i % 3);
    store.add(v);
  }
  done = true;
  reader.join();
  EXPECT_EQ(bad.load(), 0);
  EXPECT_EQ(store.size(), 2000u);
}

}  // namespace
}  // namespace corpusforge
