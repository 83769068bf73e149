// Acceptance suite: one PASS/FAIL/SKIP line per criterion, each with its
// wall time checked against a fixed limit. Exits non-zero on any FAIL.
//
// Criterion 10 runs only when snapshot paths are given:
//   CORPUSFORGE_FAUNO_SNAPSHOT  raw Fauno dump (JSONL, transcript under "input")
//   CORPUSFORGE_OASST_SNAPSHOT  OASST tree export ({"trees": [...]})
// Triage uses CORPUSFORGE_GENERATOR_URL when set.

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <random>
#include <sstream>

#include "corpusforge/cli.h"
#include "corpusforge/corpus_io.h"
#include "corpusforge/errors.h"
#include "corpusforge/fauno_parser.h"
#include "corpusforge/http_clients.h"
#include "corpusforge/language.h"
#include "corpusforge/quality.h"
#include "corpusforge/refinery.h"
#include "corpusforge/seed_extractor.h"
#include "corpusforge/selfchat.h"
#include "corpusforge/vector_store.h"
#include "stub_server.h"
#include "stubs.h"

namespace corpusforge {
namespace {

namespace fs = std::filesystem;
const fs::path kData = CORPUSFORGE_TEST_DATA;

// Failed checks accumulate here; a criterion passes when none were added.
class Checks {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  std::string summary() const {
    std::string out;
    for (std::size_t i = 0; i < failures_.size() && i < 5; ++i) {
      out += (i ? "; " : "") + failures_[i];
    }
    if (failures_.size() > 5) out += "; ... " + std::to_string(failures_.size() - 5) + " more";
    return out;
  }
  std::string note;  // printed on PASS as well

 private:
  std::vector<std::string> failures_;
};

std::string str(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

Conversation dialogue(const std::string& id, const std::vector<std::string>& texts) {
  Conversation c;
  c.id = id;
  Role role = Role::kHuman;
  for (std::size_t i = 0; i < texts.size(); ++i) {
    c.messages.push_back({id + "/" + std::to_string(i), role, texts[i]});
    role = next_role(role);
  }
  return c;
}

// 1 -----------------------------------------------------------------------

void nll_closed_form(Checks& checks) {
  const RuleSegmenter segmenter;
  const std::string message =
      "Il gatto dorme sul divano. Fuori piove da stamattina, ma domani torna il sole!";
  for (double v : {2.0, 16.0, 1000.0}) {
    auto scorer = testing::uniform_scorer(v);
    const auto score = message_quality(message, scorer, segmenter, Aggregation::kMean, 512);
    const double err = std::fabs(score.nll - std::log(v));
    checks.expect(err <= 1e-9, "V=" + str(v) + ": nll " + str(score.nll));
    checks.note += "V=" + str(v) + " err=" + str(err) + " ";
  }
}

// 2 -----------------------------------------------------------------------

void filter_boundary(Checks& checks) {
  testing::TableScorer scorer;
  scorer.set("appena sotto", {-1.999});
  scorer.set("esattamente due", {-2.0});
  Corpus corpus;
  corpus.conversations = {dialogue("below", {"appena sotto"}),
                          dialogue("equal", {"esattamente due"})};
  const auto scored = score_corpus(corpus, scorer, RuleSegmenter{}, QualityOptions{});
  checks.expect(*scored.corpus.conversations[0].messages[0].quality_nll == 1.999, "score 1.999");
  checks.expect(*scored.corpus.conversations[1].messages[0].quality_nll == 2.0, "score 2.000");
  FilterOptions options;
  options.threshold = 2.0;
  const auto filtered = filter_by_quality(scored.corpus, options);
  checks.expect(filtered.corpus.conversations.size() == 1 &&
                    filtered.corpus.conversations[0].id == "below",
                "1.999 kept and 2.000 removed");
  checks.expect(filtered.report.counters.at("at_or_above_threshold") == 1, "removal count");
}

// 3 -----------------------------------------------------------------------

void knn_exactness(Checks& checks) {
  const std::size_t n = 500;
  const std::size_t dim = 32;
  const std::size_t k = 10;
  std::mt19937_64 rng(20240229);
  std::normal_distribution<double> normal;

  std::vector<std::vector<float>> raw;
  for (std::size_t i = 0; i < n; ++i) {
    if (i >= 440 && i % 3 == 0) {
      // Exact copies and power-of-two rescalings: identical after
      // normalization, so they exercise both exclusion and tie breaking.
      auto copy = raw[rng() % raw.size()];
      if (i % 2 == 0) {
        for (auto& x : copy) x *= 2.0f;
      }
      raw.push_back(copy);
      continue;
    }
    std::vector<double> v(dim);
    double norm = 0;
    for (auto& x : v) {
      x = normal(rng);
      norm += x * x;
    }
    std::vector<float> unit(dim);
    for (std::size_t d = 0; d < dim; ++d) unit[d] = static_cast<float>(v[d] / std::sqrt(norm));
    raw.push_back(unit);
  }

  VectorStore store(dim);
  for (const auto& v : raw) store.add(v);

  // Oracle: all N^2 similarities from the stored rows, full sort.
  auto normalize = [&](const std::vector<float>& v) {
    double sq = 0;
    for (float x : v) sq += static_cast<double>(x) * x;
    const double inv = 1.0 / std::sqrt(sq);
    std::vector<double> out(v.size());
    for (std::size_t d = 0; d < v.size(); ++d) out[d] = static_cast<double>(v[d]) * inv;
    return out;
  };
  std::vector<std::vector<float>> rows;
  for (const auto& v : raw) {
    const auto u = normalize(v);
    rows.emplace_back(u.begin(), u.end());
  }

  std::size_t ties = 0;
  std::size_t excluded = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const auto query = normalize(raw[q]);
    const bool exclude = q % 5 != 0;
    std::vector<Neighbor> all;
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0;
      for (std::size_t d = 0; d < dim; ++d) s += query[d] * static_cast<double>(rows[j][d]);
      if (exclude && s >= 1.0 - 1e-6) {
        ++excluded;
        continue;
      }
      all.push_back({j, s});
    }
    std::sort(all.begin(), all.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.similarity != b.similarity ? a.similarity > b.similarity : a.id < b.id;
    });
    all.resize(std::min(k, all.size()));
    for (std::size_t r = 1; r < all.size(); ++r) ties += all[r].similarity == all[r - 1].similarity;

    const auto got = store.knn(raw[q], k, exclude);
    checks.expect(got == all, "query " + std::to_string(q) + " differs from brute force");
  }
  checks.expect(ties > 0, "fixture produced no ties");
  checks.note = "ties=" + std::to_string(ties) + " excluded=" + std::to_string(excluded);
}

// 4 -----------------------------------------------------------------------

void diversity_boundary(Checks& checks) {
  const GenerationConfig config;  // threshold 0.9
  const std::size_t dim = 4;
  testing::TableEmbedder embedder(dim);
  // |(9,3,3,1)| = 10, so the cosine to e1 is exactly 9/10.
  embedder.set("uguale", {9, 3, 3, 1});
  const double a = 0.9 + 1e-6;
  embedder.set("sopra", {static_cast<float>(a), static_cast<float>(std::sqrt(1 - a * a)), 0, 0});

  auto attempt = [&](const std::string& reply, AcceptanceLog& log) {
    VectorStore store(dim);
    store.add(std::vector<float>{1, 0, 0, 0}, "e1");
    GenerationConfig once = config;
    once.max_retries_per_turn = 0;
    testing::ScriptedChat chat({reply});
    Conversation c = dialogue("c", {"Ciao"});
    return next_turn(c, once, chat, embedder, store, &log);
  };

  AcceptanceLog equal_log;
  const auto equal = attempt("uguale", equal_log);
  const auto* accepted = std::get_if<Accepted>(&equal);
  checks.expect(accepted != nullptr, "similarity 0.9 not accepted");
  if (accepted) {
    checks.expect(accepted->nearest->similarity == 0.9,
                  "similarity is " + str(accepted->nearest->similarity));
  }

  AcceptanceLog above_log;
  attempt("sopra", above_log);
  const auto events = above_log.events();
  const auto* rejected =
      events.empty() ? nullptr : std::get_if<RejectedSimilar>(&events.front().outcome);
  checks.expect(rejected != nullptr, "similarity 0.9+1e-6 not rejected");
  if (rejected) {
    checks.expect(rejected->similarity > 0.9, "rejected at " + str(rejected->similarity));
    checks.note = "above=" + str(rejected->similarity);
  }
}

// 5 -----------------------------------------------------------------------

void dedup_semantics(Checks& checks) {
  Corpus corpus = read_corpus_jsonl(kData / "dedup_fixture.jsonl");
  assign_content_hashes(corpus);
  const auto result = dedup_conversations(corpus, 0.5);
  std::vector<std::string> kept;
  for (const auto& c : result.corpus.conversations) kept.push_back(c.id);
  checks.expect(kept == std::vector<std::string>{"X2", "D1", "D2", "D3", "D4", "R"},
                "kept conversations");
  checks.expect(result.report.input_conversations == 7, "input_conversations");
  checks.expect(result.report.removed_conversations == 1, "removed_conversations");
  checks.expect(result.report.removed_messages == 4, "removed_messages");
  checks.expect(result.report.counters.at("duplicated_messages") == 10, "duplicated_messages");
}

// 6 -----------------------------------------------------------------------

void parser_suite(Checks& checks) {
  const auto doc = nlohmann::json::parse(read_file(kData / "parser_fixtures.json"));
  const auto& fixtures = doc["fixtures"];
  checks.expect(fixtures.size() >= 15, "fewer than 15 fixtures");
  bool has_spaced_human = false;
  for (const auto& fixture : fixtures) {
    const std::string transcript = fixture["transcript"];
    has_spaced_human = has_spaced_human || transcript.find("[| Human |]") != std::string::npos;
    try {
      const Conversation c = parse_raw_fauno(transcript, "c");
      std::vector<std::string> roles, texts;
      for (const auto& m : c.messages) {
        roles.emplace_back(to_string(m.role));
        texts.push_back(m.text);
      }
      checks.expect(roles == fixture["roles"].get<std::vector<std::string>>() &&
                        texts == fixture["texts"].get<std::vector<std::string>>(),
                    fixture["name"].get<std::string>());
    } catch (const Error& e) {
      checks.expect(false, fixture["name"].get<std::string>() + ": " + e.what());
    }
  }
  checks.expect(has_spaced_human, "no \"[| Human |]\" fixture");
  for (const auto& fixture : doc["unparseable"]) {
    bool raised = false;
    try {
      parse_raw_fauno(fixture["transcript"].get<std::string>(), "c");
    } catch (const UnparseableTranscript&) {
      raised = true;
    }
    checks.expect(raised, fixture["name"].get<std::string>() + " did not raise");
  }
  checks.note = std::to_string(fixtures.size()) + " fixtures";
}

// 7 -----------------------------------------------------------------------

void seed_property(Checks& checks) {
  std::mt19937_64 rng(7);
  std::size_t total_seeds = 0;
  for (int t = 0; t < 100; ++t) {
    ConversationTree tree;
    tree.tree_id = "t" + std::to_string(t);
    const std::size_t size = 1 + rng() % 50;
    for (std::size_t i = 0; i < size; ++i) {
      TreeNode node;
      node.node_id = "n" + std::to_string(rng() % 1000000) + "-" + std::to_string(i);
      node.lang = "it";
      node.text = "testo " + std::to_string(i);
      if (i > 0) {
        const auto& parent = tree.nodes[rng() % i];
        node.parent_id = parent.node_id;
        node.role = next_role(parent.role);
      }
      tree.nodes.push_back(node);
    }
    std::shuffle(tree.nodes.begin(), tree.nodes.end(), rng);

    // Oracle: leaves are nodes nobody names as parent; paths walk parent links.
    std::map<std::string, const TreeNode*> by_id;
    std::map<std::string, int> child_count;
    for (const auto& node : tree.nodes) by_id[node.node_id] = &node;
    for (const auto& node : tree.nodes) {
      if (node.parent_id) child_count[*node.parent_id]++;
    }
    std::size_t leaves = 0;
    for (const auto& node : tree.nodes) leaves += child_count.count(node.node_id) == 0;

    const auto seeds = extract_seeds({tree});
    total_seeds += seeds.size();
    checks.expect(seeds.size() == leaves, tree.tree_id + ": seed count");
    for (const auto& seed : seeds) {
      std::optional<std::string> parent;
      for (const auto& m : seed.messages) {
        const std::string node_id = m.id.substr(m.id.rfind('/') + 1);
        const auto it = by_id.find(node_id);
        if (it == by_id.end() || it->second->parent_id != parent || it->second->text != m.text) {
          checks.expect(false, seed.id + ": broken path at " + node_id);
          break;
        }
        parent = node_id;
      }
      checks.expect(parent && child_count.count(*parent) == 0, seed.id + ": does not end at a leaf");
    }
  }
  checks.note = std::to_string(total_seeds) + " seeds";
}

// 8 -----------------------------------------------------------------------

std::vector<Conversation> campaign_seeds() {
  std::vector<Conversation> seeds;
  for (int i = 0; i < 10; ++i) {
    const std::string k = std::to_string(i);
    std::vector<std::string> texts = {"Domanda iniziale " + k + "?"};
    if (i % 3 >= 1) texts.push_back("Risposta iniziale " + k + ".");
    if (i % 3 == 2) texts.push_back("Seconda domanda " + k + "?");
    Conversation c = dialogue("seed-" + k, texts);
    c.origin = Origin::kOasst;
    seeds.push_back(c);
  }
  return seeds;
}

void campaign_end_to_end(Checks& checks) {
  const auto seeds = campaign_seeds();
  std::size_t seed_messages = 0;
  for (const auto& s : seeds) seed_messages += s.messages.size();
  const GenerationConfig config;

  auto run = [&] {
    testing::PromptHashChat chat;
    testing::HashEmbedder embedder(512);
    CampaignOptions options;
    options.dimension = 512;
    options.serial = true;
    return run_campaign(seeds, config, chat, embedder, options);
  };
  const auto first = run();
  const auto second = run();

  checks.expect(first.corpus.conversations.size() == 10, "conversation count");
  for (const auto& c : first.corpus.conversations) {
    const auto n = c.messages.size();
    checks.expect(n >= 4 && n <= 10, c.id + ": length " + std::to_string(n));
    for (std::size_t i = 1; i < n; ++i) {
      checks.expect(c.messages[i].role == next_role(c.messages[i - 1].role), c.id + ": roles");
    }
  }
  checks.expect(first.store.size() == seed_messages + first.report.accepted, "store size");

  std::size_t replayed = 0;
  double worst = -1.0;
  for (const auto& event : first.log) {
    const auto* accepted = std::get_if<Accepted>(&event.outcome);
    if (!accepted) continue;
    const auto best = first.store.max_similarity(first.store.vector(accepted->store_id),
                                                 event.store_prefix);
    if (best) worst = std::max(worst, best->similarity);
    checks.expect(!best || best->similarity <= config.similarity_threshold,
                  event.conversation_id + ": accepted above threshold");
    ++replayed;
  }
  checks.expect(replayed == first.report.accepted, "log replay count");

  checks.expect(to_jsonl(first.corpus) == to_jsonl(second.corpus), "rerun differs");
  bool same_store = first.store.size() == second.store.size();
  for (std::size_t i = 0; same_store && i < first.store.size(); ++i) {
    same_store = first.store.vector(i) == second.store.vector(i);
  }
  checks.expect(same_store, "rerun store differs");
  checks.note = "accepted=" + std::to_string(first.report.accepted) +
                " max_replayed_similarity=" + str(worst);
}

// 9 -----------------------------------------------------------------------

void pipeline_determinism(Checks& checks) {
  const fs::path chain = kData / "chain";

  // run_refinement twice equals once.
  const auto records = split_records(read_file(chain / "fauno_sample.txt"), RecordReaderOptions{});
  Corpus raw;
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      raw.conversations.push_back(parse_raw_fauno(records[i].text, "r" + std::to_string(i)));
    } catch (const UnparseableTranscript&) {
    }
  }
  const StopwordLanguageDetector detector;
  const RuleSegmenter segmenter;
  testing::ScriptedChat triage({}, [](std::size_t) { return std::string("CODE"); });
  const RefineConfig refine;
  const Corpus once = run_refinement(raw, refine, detector, segmenter, &triage);
  const Corpus twice = run_refinement(once, refine, detector, segmenter, &triage);
  checks.expect(to_jsonl(once) == to_jsonl(twice), "run_refinement is not idempotent");

  // Full CLI chain against the loopback stub endpoints.
  testing::StubServer server;
  const Environment env = {{"CORPUSFORGE_GENERATOR_URL", server.url()},
                           {"CORPUSFORGE_MLM_URL", server.url()}};
  const fs::path dir = fs::temp_directory_path() / "cf_acceptance_chain";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::vector<std::pair<std::string, std::string>> steps = {
      {"parse", (chain / "fauno_sample.txt").string()},
      {"refine", (dir / "parsed.jsonl").string()},
      {"score", (dir / "refined.jsonl").string()},
      {"filter", (dir / "scored.jsonl").string()},
  };
  const std::vector<std::string> outputs = {"parsed.jsonl", "refined.jsonl", "scored.jsonl",
                                            "filtered.jsonl"};
  for (std::size_t i = 0; i < steps.size(); ++i) {
    std::ostringstream out, err;
    const int code = run_cli({"--jobs", "3", steps[i].first, "--in", steps[i].second, "--out",
                              (dir / outputs[i]).string()},
                             env, out, err);
    checks.expect(code == 0, steps[i].first + " exited " + std::to_string(code) + ": " + err.str());
    if (code != 0) break;
    checks.expect(read_file(dir / outputs[i]) == read_file(chain / outputs[i]),
                  outputs[i] + " differs from golden");
  }
  fs::remove_all(dir);
}

// 10 ----------------------------------------------------------------------

std::string env(const char* name) {
  const char* value = std::getenv(name);
  return value ? value : "";
}

void full_scale(Checks& checks) {
  auto expect_count = [&](const std::string& what, std::int64_t got, std::int64_t want) {
    checks.expect(got == want, what + " " + std::to_string(got) + " (expected " +
                                   std::to_string(want) + ")");
    checks.note += what + "=" + std::to_string(got) + " ";
  };

  const std::string fauno = env("CORPUSFORGE_FAUNO_SNAPSHOT");
  if (!fauno.empty()) {
    RecordReaderOptions reader;
    reader.layout = RecordLayout::kJsonl;
    Corpus corpus;
    const auto records = split_records(read_file(fauno), reader);
    for (std::size_t i = 0; i < records.size(); ++i) {
      try {
        corpus.conversations.push_back(parse_raw_fauno(records[i].text, "f" + std::to_string(i)));
      } catch (const UnparseableTranscript&) {
      }
    }
    std::unique_ptr<ChatClient> triage;
    if (!env("CORPUSFORGE_GENERATOR_URL").empty()) {
      triage = std::make_unique<HttpChatClient>(env("CORPUSFORGE_GENERATOR_URL"),
                                                env("CORPUSFORGE_GENERATOR_TOKEN"));
    }
    RefineConfig refine;
    refine.jobs = 8;
    const Corpus refined = run_refinement(corpus, refine, StopwordLanguageDetector{},
                                          RuleSegmenter{}, triage.get());
    std::map<std::string, const StageReport*> stages;
    for (const auto& stage : refined.manifest) stages[stage.stage_name] = &stage;
    expect_count("empty", stages["drop_empty"]->removed_conversations, 73);
    expect_count("flow", stages["validate_flow"]->removed_conversations, 225);
    expect_count("dedup", stages["dedup"]->removed_conversations, 2368);
    expect_count("english", stages["annotate_language"]->flagged_messages, 67517);
    expect_count("english_system",
                 stages["annotate_language"]->counters.at("english_system_prompts"), 50245);
    expect_count("triaged", stages["triage"]->counters.at("triaged"), 17272);
  }

  const std::string oasst = env("CORPUSFORGE_OASST_SNAPSHOT");
  if (!oasst.empty()) {
    const auto trees = load_trees(oasst, "it");
    std::size_t messages = 0;
    for (const auto& tree : trees) messages += tree.nodes.size();
    expect_count("trees", static_cast<std::int64_t>(trees.size()), 111);
    expect_count("messages", static_cast<std::int64_t>(messages), 554);
    expect_count("seeds", static_cast<std::int64_t>(extract_seeds(trees).size()), 358);
  }
}

struct Criterion {
  int number;
  std::string name;
  double limit_seconds;
  std::function<void(Checks&)> run;
};

}  // namespace
}  // namespace corpusforge

int main() {
  using namespace corpusforge;
  const std::vector<Criterion> criteria = {
      {1, "nll-closed-form", 1.0, nll_closed_form},
      {2, "quality-filter-boundary", 1.0, filter_boundary},
      {3, "knn-exactness", 5.0, knn_exactness},
      {4, "diversity-boundary", 1.0, diversity_boundary},
      {5, "dedup-semantics", 1.0, dedup_semantics},
      {6, "parser-golden-suite", 1.0, parser_suite},
      {7, "seed-extraction-property", 2.0, seed_property},
      {8, "campaign-end-to-end", 5.0, campaign_end_to_end},
      {9, "pipeline-determinism", 5.0, pipeline_determinism},
  };

  int failed = 0;
  auto report = [&](const std::string& status, int number, const std::string& name,
                    const std::string& detail) {
    std::cout << status << " " << number << " " << name << " " << detail << std::endl;
  };
  for (const auto& criterion : criteria) {
    Checks checks;
    const auto start = std::chrono::steady_clock::now();
    try {
      criterion.run(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::ostringstream timing;
    timing << std::fixed << std::setprecision(3) << "(" << seconds << " s, limit "
           << criterion.limit_seconds << " s)";
    checks.expect(seconds < criterion.limit_seconds, "over time limit");
    std::string detail = timing.str();
    if (!checks.note.empty()) detail += " " + checks.note;
    if (!checks.ok()) detail += " " + checks.summary();
    report(checks.ok() ? "PASS" : "FAIL", criterion.number, criterion.name, detail);
    failed += !checks.ok();
  }

  if (env("CORPUSFORGE_FAUNO_SNAPSHOT").empty() && env("CORPUSFORGE_OASST_SNAPSHOT").empty()) {
    report("SKIP", 10, "full-scale-integration",
           "(set CORPUSFORGE_FAUNO_SNAPSHOT and/or CORPUSFORGE_OASST_SNAPSHOT)");
  } else {
    Checks checks;
    try {
      full_scale(checks);
    } catch (const std::exception& e) {
      checks.expect(false, std::string("exception: ") + e.what());
    }
    // Drift on a different snapshot is reported, never hidden.
    report(checks.ok() ? "PASS" : "FAIL", 10, "full-scale-integration",
           checks.note + (checks.ok() ? "" : " " + checks.summary()));
    failed += !checks.ok();
  }
  return failed == 0 ? 0 : 1;
}
