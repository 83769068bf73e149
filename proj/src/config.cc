#include "corpusforge/config.h"

#include "corpusforge/corpus_io.h"
#include "corpusforge/errors.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

using Json = nlohmann::ordered_json;

const char* type_name(const Json& j) {
  if (j.is_number_unsigned()) return "non-negative integer";
  if (j.is_number_integer()) return "integer";
  return j.type_name();
}

bool compatible(const Json& current, const Json& value) {
  if (current.is_number_float()) return value.is_number();
  if (current.is_number_unsigned()) {
    return value.is_number_unsigned() || (value.is_number_integer() && value.get<std::int64_t>() >= 0);
  }
  if (current.is_number_integer()) return value.is_number_integer();
  return current.type() == value.type();
}

void merge_into(Json& target, const Json& overrides, const std::string& prefix) {
  if (!overrides.is_object()) {
    throw ConfigError((prefix.empty() ? std::string("config") : prefix) + " must be an object");
  }
  for (const auto& [key, value] : overrides.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!target.contains(key)) throw ConfigError("unknown config key: " + path);
    Json& current = target[key];
    if (current.is_object()) {
      merge_into(current, value, path);
    } else if (!compatible(current, value)) {
      throw ConfigError("config key " + path + " expects " + type_name(current) + ", got " +
                        type_name(value));
    } else if (current.is_number_float()) {
      current = value.get<double>();
    } else {
      current = value;
    }
  }
}

const Json& at(const Json& doc, std::string_view path) {
  const Json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = path.find('.', start);
    const std::string key(path.substr(start, dot - start));
    node = &node->at(key);
    if (dot == std::string_view::npos) return *node;
    start = dot + 1;
  }
}

template <typename T>
T get(const Json& doc, std::string_view path) {
  return at(doc, path).get<T>();
}

HistogramSpec histogram_spec(const Json& doc, const std::string& path) {
  HistogramSpec spec{get<double>(doc, path + ".min"), get<double>(doc, path + ".max"),
                     get<std::size_t>(doc, path + ".bins")};
  if (spec.bins == 0 || !(spec.max > spec.min)) {
    throw ConfigError(path + " needs bins >= 1 and max > min");
  }
  return spec;
}

Role flow_role(const std::string& value) {
  const auto role = parse_role(value);
  if (!role || *role == Role::kSystem) {
    throw ConfigError("refine.flow.first_role must be \"human\" or \"assistant\"");
  }
  return *role;
}

}  // namespace

PipelineConfig::PipelineConfig() : doc_(defaults()) {}

nlohmann::ordered_json PipelineConfig::defaults() {
  const RefineConfig refine;
  const GenerationConfig generation;
  const QualityOptions quality;
  const FilterOptions filter;
  const KnnHistogramOptions knn;
  const RecordReaderOptions records;

  Json j;
  j["rng_seed"] = generation.rng_seed;
  j["parse"] = {{"layout", "delimited"},
                {"delimiter", records.delimiter},
                {"jsonl_field", records.jsonl_field}};
  j["refine"] = {
      {"flow",
       {{"first_role", to_string(refine.flow.expected_first_role_after_system)},
        {"strict", refine.flow.strict_alternation}}},
      {"dedup", {{"fraction_threshold", refine.dedup_fraction_threshold}}},
      {"lang", {{"min_confidence", refine.min_confidence}}},
      {"english_policy", to_string(refine.english_policy)},
      {"triage",
       {{"url", ""},
        {"model", refine.triage.params.model},
        {"prompt_template", refine.triage.prompt_template},
        {"max_retries", refine.triage.max_retries},
        {"temperature", refine.triage.params.temperature},
        {"max_tokens", refine.triage.params.max_tokens},
        {"max_in_flight", refine.triage.max_in_flight}}}};
  j["embed"] = {{"url", ""}, {"dim", knn.dimension}, {"batch_size", knn.batch_size}};
  Json templates;
  for (const auto& [role, text] : generation.prompt_templates) {
    templates[std::string(to_string(role))] = text;
  }
  j["generate"] = {{"url", ""},
                   {"model", generation.chat.model},
                   {"temperature", generation.chat.temperature},
                   {"max_tokens", generation.chat.max_tokens},
                   {"n_seeds", generation.n_seeds},
                   {"target_length_min", generation.target_length_min},
                   {"target_length_max", generation.target_length_max},
                   {"similarity_threshold", generation.similarity_threshold},
                   {"max_retries_per_turn", generation.max_retries_per_turn},
                   {"rounds", generation.rounds},
                   {"prompt_templates", templates}};
  j["quality"] = {{"url", ""},
                  {"threshold", filter.threshold},
                  {"aggregation", to_string(quality.aggregation)},
                  {"broken_conversation_policy", to_string(filter.broken)},
                  {"histogram",
                   {{"min", quality.histogram.min},
                    {"max", quality.histogram.max},
                    {"bins", quality.histogram.bins}}}};
  j["stats"] = {{"k", knn.k},
                {"identity_epsilon", knn.identity_epsilon},
                {"histogram",
                 {{"min", knn.histogram.min},
                  {"max", knn.histogram.max},
                  {"bins", knn.histogram.bins}}}};
  return j;
}

void PipelineConfig::merge(const nlohmann::ordered_json& overrides) {
  Json merged = doc_;
  merge_into(merged, overrides, "");
  doc_ = std::move(merged);
}

PipelineConfig PipelineConfig::load(const std::filesystem::path& path) {
  std::string content;
  try {
    content = read_file(path);
  } catch (const FileError& e) {
    throw ConfigError(e.what());
  }
  const auto overrides = Json::parse(content, nullptr, false);
  if (overrides.is_discarded()) throw ConfigError(path.string() + ": config is not valid JSON");
  PipelineConfig config;
  config.merge(overrides);
  return config;
}

void PipelineConfig::apply_environment(const Environment& env) {
  const std::pair<const char*, const char*> bindings[] = {
      {"CORPUSFORGE_GENERATOR_URL", "generate"},
      {"CORPUSFORGE_EMBED_URL", "embed"},
      {"CORPUSFORGE_MLM_URL", "quality"},
  };
  for (const auto& [variable, section] : bindings) {
    const auto it = env.find(variable);
    if (it != env.end() && !it->second.empty()) doc_[section]["url"] = it->second;
  }
}

std::string PipelineConfig::digest() const { return hex_digest(doc_.dump()); }

std::uint64_t PipelineConfig::rng_seed() const { return get<std::uint64_t>(doc_, "rng_seed"); }

RecordReaderOptions PipelineConfig::record_options() const {
  RecordReaderOptions options;
  const auto layout = get<std::string>(doc_, "parse.layout");
  if (layout == "whole_file") {
    options.layout = RecordLayout::kWholeFile;
  } else if (layout == "delimited") {
    options.layout = RecordLayout::kDelimited;
  } else if (layout == "jsonl") {
    options.layout = RecordLayout::kJsonl;
  } else {
    throw ConfigError("parse.layout must be whole_file, delimited or jsonl");
  }
  options.delimiter = get<std::string>(doc_, "parse.delimiter");
  options.jsonl_field = get<std::string>(doc_, "parse.jsonl_field");
  if (options.layout == RecordLayout::kDelimited && options.delimiter.empty()) {
    throw ConfigError("parse.delimiter must not be empty");
  }
  return options;
}

RefineConfig PipelineConfig::refine() const {
  RefineConfig config;
  config.flow.expected_first_role_after_system =
      flow_role(get<std::string>(doc_, "refine.flow.first_role"));
  config.flow.strict_alternation = get<bool>(doc_, "refine.flow.strict");
  config.dedup_fraction_threshold = get<double>(doc_, "refine.dedup.fraction_threshold");
  if (config.dedup_fraction_threshold < 0.0 || config.dedup_fraction_threshold > 1.0) {
    throw ConfigError("refine.dedup.fraction_threshold must be in [0, 1]");
  }
  config.min_confidence = get<double>(doc_, "refine.lang.min_confidence");
  if (config.min_confidence < 0.0 || config.min_confidence > 1.0) {
    throw ConfigError("refine.lang.min_confidence must be in [0, 1]");
  }
  const auto policy = parse_english_policy(get<std::string>(doc_, "refine.english_policy"));
  if (!policy) {
    throw ConfigError(
        "refine.english_policy must be flag_only, drop_message or drop_conversation");
  }
  config.english_policy = *policy;
  config.triage.prompt_template = get<std::string>(doc_, "refine.triage.prompt_template");
  config.triage.max_retries = get<int>(doc_, "refine.triage.max_retries");
  config.triage.params.model = get<std::string>(doc_, "refine.triage.model");
  config.triage.params.temperature = get<double>(doc_, "refine.triage.temperature");
  config.triage.params.max_tokens = get<int>(doc_, "refine.triage.max_tokens");
  config.triage.max_in_flight = get<std::size_t>(doc_, "refine.triage.max_in_flight");
  if (config.triage.max_retries < 0) throw ConfigError("refine.triage.max_retries must be >= 0");
  if (config.triage.max_in_flight == 0) {
    throw ConfigError("refine.triage.max_in_flight must be >= 1");
  }
  return config;
}

std::string PipelineConfig::triage_url() const {
  const auto url = get<std::string>(doc_, "refine.triage.url");
  return url.empty() ? generator_url() : url;
}

std::string PipelineConfig::embed_url() const { return get<std::string>(doc_, "embed.url"); }

std::size_t PipelineConfig::embed_dim() const {
  const auto dim = get<std::size_t>(doc_, "embed.dim");
  if (dim == 0) throw ConfigError("embed.dim must be >= 1");
  return dim;
}

std::size_t PipelineConfig::embed_batch_size() const {
  const auto size = get<std::size_t>(doc_, "embed.batch_size");
  if (size == 0) throw ConfigError("embed.batch_size must be >= 1");
  return size;
}

GenerationConfig PipelineConfig::generation() const {
  GenerationConfig config;
  config.n_seeds = get<std::size_t>(doc_, "generate.n_seeds");
  config.target_length_min = get<std::size_t>(doc_, "generate.target_length_min");
  config.target_length_max = get<std::size_t>(doc_, "generate.target_length_max");
  config.similarity_threshold = get<double>(doc_, "generate.similarity_threshold");
  config.max_retries_per_turn = get<int>(doc_, "generate.max_retries_per_turn");
  config.rng_seed = rng_seed();
  config.rounds = get<std::size_t>(doc_, "generate.rounds");
  config.prompt_templates.clear();
  for (const auto& [key, value] : at(doc_, "generate.prompt_templates").items()) {
    const auto role = parse_role(key);
    if (!role || *role == Role::kSystem || !value.is_string()) {
      throw ConfigError("generate.prompt_templates." + key + " is not a role template");
    }
    config.prompt_templates[*role] = value.get<std::string>();
  }
  config.chat.model = get<std::string>(doc_, "generate.model");
  config.chat.temperature = get<double>(doc_, "generate.temperature");
  config.chat.max_tokens = get<int>(doc_, "generate.max_tokens");
  config.validate();
  return config;
}

std::string PipelineConfig::generator_url() const {
  return get<std::string>(doc_, "generate.url");
}

std::string PipelineConfig::mlm_url() const { return get<std::string>(doc_, "quality.url"); }

QualityOptions PipelineConfig::quality() const {
  QualityOptions options;
  const auto aggregation = parse_aggregation(get<std::string>(doc_, "quality.aggregation"));
  if (!aggregation) throw ConfigError("quality.aggregation must be mean or max");
  options.aggregation = *aggregation;
  options.histogram = histogram_spec(doc_, "quality.histogram");
  return options;
}

FilterOptions PipelineConfig::filter() const {
  FilterOptions options;
  options.threshold = get<double>(doc_, "quality.threshold");
  const auto policy = parse_broken_conversation_policy(
      get<std::string>(doc_, "quality.broken_conversation_policy"));
  if (!policy) {
    throw ConfigError(
        "quality.broken_conversation_policy must be drop_conversation or keep_remainder");
  }
  options.broken = *policy;
  options.flow = refine().flow;
  return options;
}

KnnHistogramOptions PipelineConfig::knn() const {
  KnnHistogramOptions options;
  options.k = get<std::size_t>(doc_, "stats.k");
  if (options.k == 0) throw ConfigError("stats.k must be >= 1");
  options.identity_epsilon = get<double>(doc_, "stats.identity_epsilon");
  options.dimension = embed_dim();
  options.batch_size = embed_batch_size();
  options.histogram = histogram_spec(doc_, "stats.histogram");
  return options;
}

}  // namespace corpusforge
