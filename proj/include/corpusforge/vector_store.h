#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <vector>

namespace corpusforge {

// A raw embedding and the id of the message it came from.
struct EmbeddingVector {
  std::string id;
  std::vector<float> values;
};

struct Neighbor {
  std::size_t id = 0;
  double similarity = 0.0;

  bool operator==(const Neighbor&) const = default;
};

// Exact cosine-similarity index over unit vectors.
//
// Vectors are L2-normalized once at ingest and stored as float32. Queries are
// normalized in double precision and scored by a double-accumulated dot
// product in id order, so the same query against the same prefix of the store
// always produces bit-identical similarities.
//
// The store is append-only. Appends take an exclusive lock and queries a
// shared one, so a concurrent query observes some prefix of the entries and
// never a partially written vector.
class VectorStore {
 public:
  explicit VectorStore(std::size_t dimension);

  VectorStore(const VectorStore& other);
  VectorStore& operator=(const VectorStore& other);

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const;

  // Normalizes and appends; returns the new id (ids are 0, 1, 2, ...).
  // Throws DimensionMismatch, or DataError for a zero or non-finite vector.
  std::size_t add(std::span<const float> values, std::string label = {});
  std::size_t add(const EmbeddingVector& vector) { return add(vector.values, vector.id); }

  // Highest similarity over the first `prefix` entries (all when omitted);
  // ties go to the smaller id. nullopt when that range is empty.
  std::optional<Neighbor> max_similarity(std::span<const float> query,
                                         std::optional<std::size_t> prefix = {}) const;

  // Top-k by similarity, descending, ties by ascending id. With
  // exclude_identical, entries with similarity >= 1 - identity_epsilon are
  // dropped before ranking.
  std::vector<Neighbor> knn(std::span<const float> query, std::size_t k,
                            bool exclude_identical,
                            double identity_epsilon = 1e-6) const;

  // Stored (normalized) vector and label of entry `id`.
  std::vector<float> vector(std::size_t id) const;
  std::string label(std::size_t id) const;

  // Cosine similarity between two stored entries.
  double similarity(std::size_t a, std::size_t b) const;

  std::map<std::string, std::string>& metadata() { return metadata_; }
  const std::map<std::string, std::string>& metadata() const { return metadata_; }

  // `path` holds little-endian float32 rows; `path`.json holds the header
  // {"dimension", "count", "ids", "metadata"}.
  void save(const std::filesystem::path& path) const;

  // Loads at most `max_count` entries (all when omitted).
  static VectorStore load(const std::filesystem::path& path,
                          std::optional<std::size_t> max_count = {});

  static std::filesystem::path header_path(const std::filesystem::path& path);

 private:
  std::vector<double> normalized_query(std::span<const float> query) const;
  double dot(const std::vector<double>& query, std::size_t id) const;

  std::size_t dimension_;
  mutable std::shared_mutex mutex_;
  std::vector<float> data_;
  std::vector<std::string> labels_;
  std::map<std::string, std::string> metadata_;
};

}  // namespace corpusforge
