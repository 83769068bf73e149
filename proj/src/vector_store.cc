#include "corpusforge/vector_store.h"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <mutex>
#include <queue>

#include "corpusforge/corpus_io.h"
#include "corpusforge/errors.h"

namespace corpusforge {
namespace {

// Orders neighbors best-first: higher similarity, then smaller id.
bool better(const Neighbor& a, const Neighbor& b) {
  if (a.similarity != b.similarity) return a.similarity > b.similarity;
  return a.id < b.id;
}

std::uint32_t to_little_endian(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
  return v;
}

}  // namespace

VectorStore::VectorStore(std::size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw DataError("vector store dimension must be positive");
}

VectorStore::VectorStore(const VectorStore& other) : dimension_(other.dimension_) {
  std::shared_lock lock(other.mutex_);
  data_ = other.data_;
  labels_ = other.labels_;
  metadata_ = other.metadata_;
}

VectorStore& VectorStore::operator=(const VectorStore& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mutex_);
  std::shared_lock other_lock(other.mutex_);
  dimension_ = other.dimension_;
  data_ = other.data_;
  labels_ = other.labels_;
  metadata_ = other.metadata_;
  return *this;
}

std::size_t VectorStore::size() const {
  std::shared_lock lock(mutex_);
  return labels_.size();
}

std::size_t VectorStore::add(std::span<const float> values, std::string label) {
  if (values.size() != dimension_) throw DimensionMismatch(dimension_, values.size());
  double norm_sq = 0.0;
  for (float v : values) {
    if (!std::isfinite(v)) throw DataError("embedding contains a non-finite value");
    norm_sq += static_cast<double>(v) * static_cast<double>(v);
  }
  if (norm_sq == 0.0) throw DataError("cannot normalize a zero vector");
  const double inv = 1.0 / std::sqrt(norm_sq);

  std::vector<float> row(dimension_);
  for (std::size_t d = 0; d < dimension_; ++d) {
    row[d] = static_cast<float>(static_cast<double>(values[d]) * inv);
  }

  std::unique_lock lock(mutex_);
  data_.insert(data_.end(), row.begin(), row.end());
  labels_.push_back(std::move(label));
  return labels_.size() - 1;
}

std::vector<double> VectorStore::normalized_query(std::span<const float> query) const {
  if (query.size() != dimension_) throw DimensionMismatch(dimension_, query.size());
  double norm_sq = 0.0;
  for (float v : query) norm_sq += static_cast<double>(v) * static_cast<double>(v);
  if (norm_sq == 0.0 || !std::isfinite(norm_sq)) {
    throw DataError("query vector has zero or non-finite norm");
  }
  const double inv = 1.0 / std::sqrt(norm_sq);
  std::vector<double> out(dimension_);
  for (std::size_t d = 0; d < dimension_; ++d) out[d] = static_cast<double>(query[d]) * inv;
  return out;
}

double VectorStore::dot(const std::vector<double>& query, std::size_t id) const {
  const float* row = data_.data() + id * dimension_;
  double sum = 0.0;
  for (std::size_t d = 0; d < dimension_; ++d) sum += query[d] * static_cast<double>(row[d]);
  return sum;
}

std::optional<Neighbor> VectorStore::max_similarity(std::span<const float> query,
                                                    std::optional<std::size_t> prefix) const {
  const auto q = normalized_query(query);
  std::shared_lock lock(mutex_);
  const std::size_t count = std::min(prefix.value_or(labels_.size()), labels_.size());
  if (count == 0) return std::nullopt;
  Neighbor best{0, dot(q, 0)};
  for (std::size_t id = 1; id < count; ++id) {
    const double s = dot(q, id);
    if (s > best.similarity) best = {id, s};
  }
  return best;
}

std::vector<Neighbor> VectorStore::knn(std::span<const float> query, std::size_t k,
                                       bool exclude_identical,
                                       double identity_epsilon) const {
  if (k == 0) throw DataError("knn requires k >= 1");
  const auto q = normalized_query(query);

  // Bounded heap whose top is the worst of the current best k.
  auto worse_on_top = [](const Neighbor& a, const Neighbor& b) { return better(a, b); };
  std::priority_queue<Neighbor, std::vector<Neighbor>, decltype(worse_on_top)> heap(worse_on_top);

  std::shared_lock lock(mutex_);
  const double identical = 1.0 - identity_epsilon;
  for (std::size_t id = 0; id < labels_.size(); ++id) {
    const Neighbor candidate{id, dot(q, id)};
    if (exclude_identical && candidate.similarity >= identical) continue;
    if (heap.size() < k) {
      heap.push(candidate);
    } else if (better(candidate, heap.top())) {
      heap.pop();
      heap.push(candidate);
    }
  }
  lock.unlock();

  std::vector<Neighbor> out(heap.size());
  for (auto it = out.rbegin(); it != out.rend(); ++it) {
    *it = heap.top();
    heap.pop();
  }
  return out;
}

std::vector<float> VectorStore::vector(std::size_t id) const {
  std::shared_lock lock(mutex_);
  if (id >= labels_.size()) throw DataError("vector id out of range: " + std::to_string(id));
  const auto begin = data_.begin() + static_cast<std::ptrdiff_t>(id * dimension_);
  return {begin, begin + static_cast<std::ptrdiff_t>(dimension_)};
}

std::string VectorStore::label(std::size_t id) const {
  std::shared_lock lock(mutex_);
  if (id >= labels_.size()) throw DataError("vector id out of range: " + std::to_string(id));
  return labels_[id];
}

double VectorStore::similarity(std::size_t a, std::size_t b) const {
  const auto va = vector(a);
  const auto vb = vector(b);
  double sum = 0.0;
  for (std::size_t d = 0; d < dimension_; ++d) {
    sum += static_cast<double>(va[d]) * static_cast<double>(vb[d]);
  }
  return sum;
}

std::filesystem::path VectorStore::header_path(const std::filesystem::path& path) {
  return std::filesystem::path(path.string() + ".json");
}

void VectorStore::save(const std::filesystem::path& path) const {
  std::shared_lock lock(mutex_);
  std::string bytes(data_.size() * sizeof(float), '\0');
  for (std::size_t i = 0; i < data_.size(); ++i) {
    const std::uint32_t le = to_little_endian(std::bit_cast<std::uint32_t>(data_[i]));
    std::memcpy(bytes.data() + i * sizeof(float), &le, sizeof(le));
  }
  nlohmann::ordered_json header;
  header["dimension"] = dimension_;
  header["count"] = labels_.size();
  header["ids"] = labels_;
  header["metadata"] = metadata_;
  lock.unlock();

  write_file(path, bytes);
  write_file(header_path(path), header.dump(2) + "\n");
}

VectorStore VectorStore::load(const std::filesystem::path& path,
                              std::optional<std::size_t> max_count) {
  const auto header = nlohmann::json::parse(read_file(header_path(path)), nullptr, false);
  if (header.is_discarded() || !header.is_object()) {
    throw FileError(header_path(path).string(), "invalid store header");
  }
  std::size_t dimension = 0;
  std::size_t count = 0;
  std::vector<std::string> ids;
  std::map<std::string, std::string> metadata;
  try {
    dimension = header.at("dimension").get<std::size_t>();
    count = header.at("count").get<std::size_t>();
    ids = header.at("ids").get<std::vector<std::string>>();
    if (header.contains("metadata")) {
      metadata = header["metadata"].get<std::map<std::string, std::string>>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw FileError(header_path(path).string(), e.what());
  }
  if (ids.size() != count) throw FileError(header_path(path).string(), "id map size != count");

  const std::string bytes = read_file(path);
  if (bytes.size() != count * dimension * sizeof(float)) {
    throw FileError(path.string(), "size does not match header");
  }

  VectorStore store(dimension);
  store.metadata_ = std::move(metadata);
  const std::size_t keep = std::min(count, max_count.value_or(count));
  store.data_.resize(keep * dimension);
  for (std::size_t i = 0; i < store.data_.size(); ++i) {
    std::uint32_t le = 0;
    std::memcpy(&le, bytes.data() + i * sizeof(float), sizeof(le));
    store.data_[i] = std::bit_cast<float>(to_little_endian(le));
  }
  ids.resize(keep);
  store.labels_ = std::move(ids);
  return store;
}

}  // namespace corpusforge
