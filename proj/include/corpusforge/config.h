#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <string>

#include "corpusforge/fauno_parser.h"
#include "corpusforge/histogram.h"
#include "corpusforge/knn_histogram.h"
#include "corpusforge/quality.h"
#include "corpusforge/refinery.h"
#include "corpusforge/selfchat.h"

namespace corpusforge {

using Environment = std::map<std::string, std::string>;

// Pipeline configuration: the full default document with user overrides
// merged in. Every key exists in the defaults; unknown keys and type
// mismatches are rejected with ConfigError.
class PipelineConfig {
 public:
  PipelineConfig();

  static nlohmann::ordered_json defaults();

  // Merges `overrides` into the current document.
  void merge(const nlohmann::ordered_json& overrides);
  static PipelineConfig load(const std::filesystem::path& path);

  // Endpoint URLs from CORPUSFORGE_* variables take precedence over the file.
  void apply_environment(const Environment& env);

  const nlohmann::ordered_json& json() const { return doc_; }
  std::string digest() const;

  std::uint64_t rng_seed() const;
  RecordReaderOptions record_options() const;
  RefineConfig refine() const;
  std::string triage_url() const;  // falls back to the generator URL
  std::string embed_url() const;
  std::size_t embed_dim() const;
  std::size_t embed_batch_size() const;
  GenerationConfig generation() const;
  std::string generator_url() const;
  std::string mlm_url() const;
  QualityOptions quality() const;
  FilterOptions filter() const;
  KnnHistogramOptions knn() const;

 private:
  nlohmann::ordered_json doc_;
};

}  // namespace corpusforge
