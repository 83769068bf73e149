#include "corpusforge/cli.h"

#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>

#include "corpusforge/corpus_io.h"
#include "corpusforge/errors.h"
#include "corpusforge/fauno_parser.h"
#include "corpusforge/http_clients.h"
#include "corpusforge/knn_histogram.h"
#include "corpusforge/language.h"
#include "corpusforge/parallel.h"
#include "corpusforge/quality.h"
#include "corpusforge/refinery.h"
#include "corpusforge/seed_extractor.h"
#include "corpusforge/segmenter.h"
#include "corpusforge/selfchat.h"
#include "corpusforge/text.h"

extern char** environ;

namespace corpusforge {
namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct Options {
  std::string config_path;
  std::size_t jobs = 0;  // 0: one per logical processor
  std::string in;
  std::string out;
  std::string report;
  std::string hist;
  std::string seeds;
  std::string store;
  std::string lang = "it";
  std::string layout;
  std::optional<double> threshold;
  std::optional<std::size_t> k;
  bool serial = false;
};

// Run-report accumulated by a command. Timing lives under "timing" so the
// rest of the report is reproducible.
struct RunReport {
  Json doc;
  std::vector<StageReport> stages;
};

std::size_t jobs_of(const Options& options) {
  return options.jobs == 0 ? default_jobs() : options.jobs;
}

PipelineConfig load_config(const Options& options, const Environment& env) {
  PipelineConfig config =
      options.config_path.empty() ? PipelineConfig() : PipelineConfig::load(options.config_path);
  config.apply_environment(env);
  return config;
}

std::string env_or_empty(const Environment& env, const std::string& key) {
  const auto it = env.find(key);
  return it == env.end() ? std::string() : it->second;
}

std::string require_url(const std::string& url, const char* what, const char* variable) {
  if (url.empty()) {
    throw ConfigError(std::string("no ") + what + " endpoint configured; set " + variable +
                      " or the config file URL");
  }
  return url;
}

void stamp_and_append(Corpus& corpus, StageReport stage, RunReport& run) {
  stage.timestamp = utc_timestamp();
  run.stages.push_back(stage);
  corpus.manifest.push_back(std::move(stage));
}

std::string stem_of(const fs::path& path) {
  std::string stem = path.filename().string();
  const auto dot = stem.find('.');
  return dot == std::string::npos || dot == 0 ? stem : stem.substr(0, dot);
}

std::string padded(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%05zu", index);
  return buf;
}

// ---------------------------------------------------------------- parse

void cmd_parse(const Options& options, const PipelineConfig& config, RunReport& run) {
  RecordReaderOptions reader = config.record_options();
  if (!options.layout.empty()) {
    PipelineConfig patched = config;
    patched.merge({{"parse", {{"layout", options.layout}}}});
    reader = patched.record_options();
  }

  struct Source {
    std::string name;
    std::string id_base;
    std::vector<RawRecord> records;
  };
  std::vector<Source> sources;
  const fs::path in(options.in);
  if (fs::is_directory(in)) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(in)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& file : files) {
      sources.push_back({file.filename().string(), stem_of(file),
                         {RawRecord{read_file(file), 1}}});
    }
  } else {
    const std::string content = read_file(in);
    sources.push_back({in.filename().string(), stem_of(in), split_records(content, reader)});
  }

  Corpus corpus;
  StageReport stage;
  stage.stage_name = "parse";
  stage.params_digest = hex_digest(config.json()["parse"].dump());
  std::int64_t blank = 0;
  std::int64_t unparseable = 0;
  for (const auto& source : sources) {
    const bool single = source.records.size() == 1 && reader.layout == RecordLayout::kWholeFile;
    for (std::size_t i = 0; i < source.records.size(); ++i) {
      const RawRecord& record = source.records[i];
      ++stage.input_conversations;
      const std::string id = single || fs::is_directory(in) ? source.id_base
                                                            : source.id_base + "-" + padded(i);
      if (canonicalize_text(record.text).empty()) {
        ++blank;
        ++stage.removed_conversations;
        continue;
      }
      try {
        Conversation conversation = parse_raw_fauno(record.text, id);
        conversation.provenance["source"] = source.name;
        conversation.provenance["record"] = std::to_string(i);
        conversation.provenance["line"] = std::to_string(record.line);
        corpus.conversations.push_back(std::move(conversation));
      } catch (const UnparseableTranscript& e) {
        ++unparseable;
        ++stage.removed_conversations;
        stage.errors.push_back(source.name + ":" + std::to_string(record.line) + ": " +
                               e.what());
      }
    }
  }
  stage.counters["blank_records"] = blank;
  stage.counters["unparseable_records"] = unparseable;
  check_unique_ids(corpus);
  stamp_and_append(corpus, std::move(stage), run);
  write_corpus_jsonl(corpus, options.out);
}

// ---------------------------------------------------------------- refine

void cmd_refine(const Options& options, const PipelineConfig& config, const Environment& env,
                RunReport& run) {
  Corpus corpus = read_corpus_jsonl(options.in);
  RefineConfig refine = config.refine();
  refine.jobs = jobs_of(options);

  std::unique_ptr<ChatClient> triage;
  const std::string url = config.triage_url();
  if (!url.empty()) {
    triage = std::make_unique<HttpChatClient>(url,
                                              env_or_empty(env, "CORPUSFORGE_GENERATOR_TOKEN"));
  }
  const StopwordLanguageDetector detector;
  const RuleSegmenter segmenter;
  const std::size_t before = corpus.manifest.size();
  corpus = run_refinement(std::move(corpus), refine, detector, segmenter, triage.get());
  run.stages.insert(run.stages.end(), corpus.manifest.begin() + static_cast<long>(before),
                    corpus.manifest.end());
  write_corpus_jsonl(corpus, options.out);
}

// ---------------------------------------------------------------- seeds

void cmd_seeds(const Options& options, RunReport& run) {
  const auto all_trees = load_trees(options.in, "");
  std::vector<ConversationTree> trees;
  std::size_t nodes = 0;
  std::size_t pruned = 0;
  for (const auto& tree : all_trees) {
    if (auto kept = prune_to_language(tree, options.lang)) {
      nodes += kept->nodes.size();
      pruned += kept->pruned_nodes;
      trees.push_back(std::move(*kept));
    }
  }
  Corpus corpus;
  corpus.conversations = extract_seeds(trees);

  StageReport stage;
  stage.stage_name = "seeds";
  stage.input_conversations = corpus.conversations.size();
  stage.params_digest = hex_digest(Json{{"lang", options.lang}}.dump());
  stage.counters["input_trees"] = static_cast<std::int64_t>(all_trees.size());
  stage.counters["trees"] = static_cast<std::int64_t>(trees.size());
  stage.counters["messages"] = static_cast<std::int64_t>(nodes);
  stage.counters["pruned_nodes"] = static_cast<std::int64_t>(pruned);
  stage.counters["seeds"] = static_cast<std::int64_t>(corpus.conversations.size());
  stamp_and_append(corpus, std::move(stage), run);
  write_corpus_jsonl(corpus, options.out);
}

// ---------------------------------------------------------------- generate

void cmd_generate(const Options& options, const PipelineConfig& config, const Environment& env,
                  RunReport& run) {
  const Corpus seeds = read_corpus_jsonl(options.seeds);
  const GenerationConfig generation = config.generation();

  HttpChatClient chat(require_url(config.generator_url(), "generator", "CORPUSFORGE_GENERATOR_URL"),
                      env_or_empty(env, "CORPUSFORGE_GENERATOR_TOKEN"));
  HttpEmbedderClient embedder(require_url(config.embed_url(), "embedding", "CORPUSFORGE_EMBED_URL"),
                              config.embed_dim());

  CampaignOptions campaign;
  campaign.dimension = config.embed_dim();
  campaign.embed_batch_size = config.embed_batch_size();
  campaign.serial = options.serial;
  campaign.jobs = jobs_of(options);
  if (!options.store.empty() && fs::exists(options.store) &&
      fs::exists(VectorStore::header_path(options.store))) {
    const VectorStore previous = VectorStore::load(options.store);
    const auto it = previous.metadata().find("prepopulated");
    if (it != previous.metadata().end()) {
      const std::size_t prefix = std::stoull(it->second);
      if (prefix <= previous.size()) {
        campaign.cached_seed_store = VectorStore::load(options.store, prefix);
      }
    }
  }

  CampaignResult result = run_campaign(seeds.conversations, generation, chat, embedder, campaign);
  const CampaignReport& report = result.report;
  run.doc["campaign"] = {{"prepopulated", report.prepopulated},
                         {"reused_seed_store", report.reused_seed_store},
                         {"conversations", report.conversations},
                         {"failed_conversations", report.failed_conversations},
                         {"accepted", report.accepted},
                         {"rejected_similar", report.rejected_similar},
                         {"diversity_exhausted", report.diversity_exhausted},
                         {"store_size", result.store.size()},
                         {"params_digest", report.params_digest},
                         {"failures", report.failures}};
  run.stages.insert(run.stages.end(), result.corpus.manifest.begin(),
                    result.corpus.manifest.end());
  if (!options.store.empty()) result.store.save(options.store);
  write_corpus_jsonl(result.corpus, options.out);
}

// ---------------------------------------------------------------- score

int cmd_score(const Options& options, const PipelineConfig& config, RunReport& run) {
  Corpus corpus = read_corpus_jsonl(options.in);
  HttpMlmScorer scorer(require_url(config.mlm_url(), "masked-LM scoring", "CORPUSFORGE_MLM_URL"));
  QualityOptions quality = config.quality();
  quality.jobs = jobs_of(options);
  const RuleSegmenter segmenter;

  ScoreResult result = score_corpus(std::move(corpus), scorer, segmenter, quality);
  run.doc["quality"] = result.report.to_json();
  stamp_and_append(result.corpus, std::move(result.stage), run);
  write_corpus_jsonl(result.corpus, options.out);
  if (!options.hist.empty()) write_file(options.hist, result.report.histogram.to_csv());

  if (result.report.scored == 0 && result.report.transport_failures() > 0) {
    run.doc["error"] = "no message could be scored: " + result.report.failures.front().reason;
    return kExitTransport;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- filter

void cmd_filter(const Options& options, const PipelineConfig& config, RunReport& run) {
  Corpus corpus = read_corpus_jsonl(options.in);
  FilterOptions filter = config.filter();
  if (options.threshold) filter.threshold = *options.threshold;
  StageResult result = filter_by_quality(std::move(corpus), filter);
  stamp_and_append(result.corpus, std::move(result.report), run);
  write_corpus_jsonl(result.corpus, options.out);
}

// ---------------------------------------------------------------- stats

void cmd_knn_hist(const Options& options, const PipelineConfig& config, RunReport& run) {
  const Corpus corpus = read_corpus_jsonl(options.in);
  KnnHistogramOptions knn = config.knn();
  if (options.k) {
    if (*options.k == 0) throw ConfigError("--k must be >= 1");
    knn.k = *options.k;
  }
  knn.jobs = jobs_of(options);
  HttpEmbedderClient embedder(require_url(config.embed_url(), "embedding", "CORPUSFORGE_EMBED_URL"),
                              knn.dimension);
  const KnnHistogram result = distance_histogram(corpus, embedder, knn);
  run.doc["histogram"] = result.histogram.summary_json();
  run.doc["k"] = knn.k;
  write_file(options.out, result.histogram.to_csv());
}

// ---------------------------------------------------------------- driver

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return kExitUsage;
  if (dynamic_cast<const TransportError*>(&e)) return kExitTransport;
  return kExitData;
}

void write_run_report(const fs::path& path, const RunReport& run, std::ostream& err) {
  Json doc = run.doc;
  doc["stages"] = manifest_to_json(run.stages)["stages"];
  try {
    write_file(path, doc.dump(2) + "\n");
  } catch (const Error& e) {
    err << "corpusforge: cannot write report: " << e.what() << "\n";
  }
}

}  // namespace

Environment process_environment() {
  Environment env;
  for (char** entry = environ; entry && *entry; ++entry) {
    const std::string_view text(*entry);
    if (text.rfind("CORPUSFORGE_", 0) != 0) continue;
    const auto eq = text.find('=');
    if (eq == std::string_view::npos) continue;
    env.emplace(std::string(text.substr(0, eq)), std::string(text.substr(eq + 1)));
  }
  return env;
}

int run_cli(const std::vector<std::string>& args, const Environment& env, std::ostream& out,
            std::ostream& err) {
  Options options;
  CLI::App app{"Chat-corpus refinement, seed extraction, self-chat generation and quality scoring",
               "corpusforge"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "corpusforge 0.1.0");
  app.add_option("--config", options.config_path, "JSON config file (merged over defaults)");
  app.add_option("--jobs", options.jobs, "worker threads (default: logical processors)")
      ->check(CLI::PositiveNumber);

  auto* parse = app.add_subcommand("parse", "parse raw tagged transcripts into corpus JSONL");
  parse->add_option("--in", options.in, "raw file or directory (one transcript per file)")
      ->required();
  parse->add_option("--out", options.out, "output corpus JSONL")->required();
  parse->add_option("--layout", options.layout, "whole_file, delimited or jsonl");
  parse->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* refine = app.add_subcommand("refine", "run the refinement pipeline");
  refine->add_option("--in", options.in, "input corpus JSONL")->required();
  refine->add_option("--out", options.out, "output corpus JSONL")->required();
  refine->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* seeds = app.add_subcommand("seeds", "extract root-to-leaf seed conversations");
  seeds->add_option("--in", options.in, "conversation-tree export (JSON)")->required();
  seeds->add_option("--lang", options.lang, "language code to keep")->capture_default_str();
  seeds->add_option("--out", options.out, "output corpus JSONL")->required();
  seeds->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* generate = app.add_subcommand("generate", "self-chat generation campaign");
  generate->add_option("--seeds", options.seeds, "seed corpus JSONL")->required();
  generate->add_option("--out", options.out, "output corpus JSONL")->required();
  generate->add_option("--store", options.store, "vector store file (.vecs)");
  generate->add_flag("--serial", options.serial, "generate conversations one at a time");
  generate->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* score = app.add_subcommand("score", "score every message with the masked-LM metric");
  score->add_option("--in", options.in, "input corpus JSONL")->required();
  score->add_option("--out", options.out, "output corpus JSONL")->required();
  score->add_option("--report", options.report, "run report (default: <out>.report.json)");
  score->add_option("--hist", options.hist, "histogram CSV of message scores");

  auto* filter = app.add_subcommand("filter", "keep messages scoring below the threshold");
  filter->add_option("--in", options.in, "scored corpus JSONL")->required();
  filter->add_option("--out", options.out, "output corpus JSONL")->required();
  filter->add_option("--threshold", options.threshold, "overrides quality.threshold");
  filter->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* stats = app.add_subcommand("stats", "corpus statistics");
  stats->require_subcommand(1);
  auto* knn_hist = stats->add_subcommand("knn-hist", "nearest-neighbor distance histogram");
  knn_hist->add_option("--in", options.in, "input corpus JSONL")->required();
  knn_hist->add_option("--k", options.k, "neighbors per message (overrides stats.k)");
  knn_hist->add_option("--out", options.out, "histogram CSV")->required();
  knn_hist->add_option("--report", options.report, "run report (default: <out>.report.json)");

  auto* config_cmd = app.add_subcommand("config", "configuration helpers");
  config_cmd->require_subcommand(1);
  auto* config_default = config_cmd->add_subcommand("default", "print the default config");

  std::vector<std::string> storage = {"corpusforge"};
  storage.insert(storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& arg : storage) argv.push_back(arg.data());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (config_default->parsed()) {
    out << PipelineConfig::defaults().dump(2) << "\n";
    return kExitOk;
  }

  std::string command;
  for (auto* sub : {parse, refine, seeds, generate, score, filter}) {
    if (sub->parsed()) command = sub->get_name();
  }
  if (knn_hist->parsed()) command = "stats knn-hist";
  const fs::path report_path =
      options.report.empty() ? fs::path(options.out + ".report.json") : fs::path(options.report);

  RunReport run;
  run.doc["command"] = command;
  run.doc["inputs"] = Json::object();
  if (!options.in.empty()) run.doc["inputs"]["in"] = options.in;
  if (!options.seeds.empty()) run.doc["inputs"]["seeds"] = options.seeds;
  if (!options.store.empty()) run.doc["inputs"]["store"] = options.store;
  if (!options.config_path.empty()) run.doc["inputs"]["config"] = options.config_path;
  run.doc["outputs"] = {{"out", options.out}};
  run.doc["status"] = "ok";
  run.doc["exit_code"] = 0;

  const auto started = std::chrono::steady_clock::now();
  const std::string started_at = utc_timestamp();
  int code = kExitOk;
  bool reported = false;
  try {
    const PipelineConfig config = load_config(options, env);
    run.doc["config_digest"] = config.digest();
    if (parse->parsed()) {
      cmd_parse(options, config, run);
    } else if (refine->parsed()) {
      cmd_refine(options, config, env, run);
    } else if (seeds->parsed()) {
      cmd_seeds(options, run);
    } else if (generate->parsed()) {
      cmd_generate(options, config, env, run);
    } else if (score->parsed()) {
      code = cmd_score(options, config, run);
    } else if (filter->parsed()) {
      cmd_filter(options, config, run);
    } else if (knn_hist->parsed()) {
      cmd_knn_hist(options, config, run);
    }
  } catch (const std::exception& e) {
    code = exit_code_for(e);
    run.doc["error"] = e.what();
    err << "corpusforge " << command << ": " << e.what() << "\n";
    reported = true;
  }
  if (code != kExitOk) {
    run.doc["status"] = "error";
    run.doc["exit_code"] = code;
    if (!reported && run.doc.contains("error")) {
      err << "corpusforge " << command << ": " << run.doc["error"].get<std::string>() << "\n";
    }
  }
  const std::chrono::duration<double> wall = std::chrono::steady_clock::now() - started;
  run.doc["timing"] = {{"started_at", started_at}, {"wall_time_seconds", wall.count()}};
  write_run_report(report_path, run, err);
  return code;
}

}  // namespace corpusforge
