#include "corpusforge/selfchat.h"

#include <json.hpp>

#include <cstdio>
#include <numeric>

#include "corpusforge/parallel.h"
#include "corpusforge/text.h"

namespace corpusforge {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

const std::string& template_for(const GenerationConfig& config, Role role) {
  const auto it = config.prompt_templates.find(role);
  if (it == config.prompt_templates.end()) {
    throw ConfigError("no prompt template for role " + std::string(to_string(role)));
  }
  return it->second;
}

std::vector<float> embed_one(EmbedderClient& embedder, const std::string& text) {
  auto vectors = embedder.embed_batch({text});
  if (vectors.size() != 1) {
    throw TransportError("embedder returned " + std::to_string(vectors.size()) +
                         " vectors for one text");
  }
  return std::move(vectors.front());
}

}  // namespace

std::map<Role, std::string> GenerationConfig::default_prompt_templates() {
  return {
      {Role::kHuman,
       "Stai interpretando un utente che conversa in italiano con un assistente "
       "AI. Ecco la conversazione finora:\n\n{transcript}\n\nScrivi il prossimo "
       "messaggio dell'utente, in italiano, in modo naturale e pertinente. "
       "Rispondi solo con il testo del messaggio."},
      {Role::kAssistant,
       "Sei un assistente AI disponibile e preciso che risponde in italiano. "
       "Ecco la conversazione finora:\n\n{transcript}\n\nScrivi la prossima "
       "risposta dell'assistente, in italiano. Rispondi solo con il testo della "
       "risposta."},
  };
}

void GenerationConfig::validate() const {
  if (target_length_min < 1 || target_length_min > target_length_max) {
    throw ConfigError("generation needs 1 <= target_length_min <= target_length_max");
  }
  if (!(similarity_threshold > 0.0 && similarity_threshold <= 1.0)) {
    throw ConfigError("similarity_threshold must be in (0, 1]");
  }
  if (max_retries_per_turn < 0) throw ConfigError("max_retries_per_turn must be >= 0");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  template_for(*this, Role::kHuman);
  template_for(*this, Role::kAssistant);
}

std::string GenerationConfig::digest() const {
  nlohmann::ordered_json j;
  j["n_seeds"] = n_seeds;
  j["target_length_min"] = target_length_min;
  j["target_length_max"] = target_length_max;
  j["similarity_threshold"] = similarity_threshold;
  j["max_retries_per_turn"] = max_retries_per_turn;
  j["rng_seed"] = rng_seed;
  j["rounds"] = rounds;
  for (const auto& [role, text] : prompt_templates) {
    j["prompt_templates"][std::string(to_string(role))] = text;
  }
  j["model"] = chat.model;
  j["temperature"] = chat.temperature;
  j["max_tokens"] = chat.max_tokens;
  return hex_digest(j.dump());
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Values below 2^64 mod bound would bias the modulo.
  const std::uint64_t threshold = (0 - bound) % bound;
  while (true) {
    const std::uint64_t r = engine_();
    if (r >= threshold) return r % bound;
  }
}

std::uint64_t Rng::between(std::uint64_t lo, std::uint64_t hi) {
  return lo + below(hi - lo + 1);
}

Rng Rng::split(std::uint64_t seed, std::uint64_t stream, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed ^ splitmix64(stream)) ^ index));
}

std::vector<Conversation> sample_seeds(const std::vector<Conversation>& seeds,
                                       const GenerationConfig& config, Rng& rng) {
  if (seeds.empty()) throw EmptySeedPool();
  const std::size_t n = std::min(config.n_seeds, seeds.size());
  std::vector<std::size_t> order(seeds.size());
  std::iota(order.begin(), order.end(), 0);
  std::vector<Conversation> sampled;
  sampled.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng.below(order.size() - i));
    std::swap(order[i], order[j]);
    sampled.push_back(seeds[order[i]]);
  }
  return sampled;
}

std::size_t sample_target_length(const GenerationConfig& config, Rng& rng) {
  return static_cast<std::size_t>(
      rng.between(config.target_length_min, config.target_length_max));
}

void AcceptanceLog::record(AcceptanceEvent event) {
  std::lock_guard lock(mutex_);
  events_.push_back(std::move(event));
}

std::vector<AcceptanceEvent> AcceptanceLog::events() const {
  std::lock_guard lock(mutex_);
  return events_;
}

Role next_role(Role previous) {
  return previous == Role::kHuman ? Role::kAssistant : Role::kHuman;
}

std::string render_transcript(const Conversation& conversation) {
  std::string out;
  for (const auto& message : conversation.messages) {
    if (!out.empty()) out += "\n\n";
    switch (message.role) {
      case Role::kSystem:
        out += "Sistema: ";
        break;
      case Role::kHuman:
        out += "Utente: ";
        break;
      case Role::kAssistant:
        out += "Assistente: ";
        break;
    }
    out += message.text;
  }
  return out;
}

std::string render_prompt(const std::string& prompt_template, const Conversation& conversation) {
  static const std::string kPlaceholder = "{transcript}";
  const std::string transcript = render_transcript(conversation);
  std::string out;
  std::size_t pos = 0;
  while (true) {
    const auto hit = prompt_template.find(kPlaceholder, pos);
    if (hit == std::string::npos) break;
    out.append(prompt_template, pos, hit - pos);
    out.append(transcript);
    pos = hit + kPlaceholder.size();
  }
  out.append(prompt_template, pos, std::string::npos);
  return out;
}

TurnOutcome next_turn(Conversation& conversation, const GenerationConfig& config,
                      ChatClient& chat, EmbedderClient& embedder, VectorStore& store,
                      AcceptanceLog* log) {
  if (conversation.messages.empty()) throw DataError("cannot extend an empty conversation");
  const Role role = next_role(conversation.messages.back().role);
  const std::vector<ChatTurn> turns = {
      {Role::kHuman, render_prompt(template_for(config, role), conversation)}};
  const std::size_t turn = conversation.messages.size();

  const int attempts = 1 + config.max_retries_per_turn;
  for (int attempt = 1; attempt <= attempts; ++attempt) {
    const std::string text = canonicalize_text(chat.complete(turns, config.chat));
    if (text.empty()) throw TransportError("generator returned an empty message");
    const std::vector<float> embedding = embed_one(embedder, text);

    const std::size_t prefix = store.size();
    const auto nearest = store.max_similarity(embedding, prefix);
    if (nearest && nearest->similarity > config.similarity_threshold) {
      RejectedSimilar rejected{nearest->similarity, nearest->id};
      if (log) log->record({conversation.id, turn, attempt, prefix, rejected});
      continue;
    }

    Message message;
    message.id = conversation.id + "/" + std::to_string(turn);
    message.role = role;
    message.text = text;
    const std::size_t store_id = store.add(embedding, message.id);
    message.embedding_ref = std::to_string(store_id);
    conversation.messages.push_back(message);

    Accepted accepted{std::move(message), nearest, store_id};
    if (log) log->record({conversation.id, turn, attempt, prefix, accepted});
    return accepted;
  }
  return Exhausted{attempts};
}

Conversation generate_conversation(const Conversation& seed, const std::string& conversation_id,
                                   std::size_t target_length, const GenerationConfig& config,
                                   ChatClient& chat, EmbedderClient& embedder, VectorStore& store,
                                   AcceptanceLog* log) {
  if (seed.messages.empty()) throw DataError("seed " + seed.id + " has no messages");

  Conversation conversation;
  conversation.id = conversation_id;
  conversation.origin = Origin::kGenerated;
  for (const auto& source : seed.messages) {
    Message message;
    message.id = conversation_id + "/" + std::to_string(conversation.messages.size());
    message.role = source.role;
    message.text = source.text;
    conversation.messages.push_back(std::move(message));
  }
  auto& provenance = conversation.provenance;
  provenance["seed_id"] = seed.id;
  provenance["seed_length"] = std::to_string(seed.messages.size());
  provenance["target_length"] = std::to_string(target_length);
  provenance["rng_seed"] = std::to_string(config.rng_seed);
  provenance["config_digest"] = config.digest();

  std::size_t accepted = 0;
  std::size_t rejected = 0;
  auto finish = [&](const std::string& termination) {
    provenance["accepted_turns"] = std::to_string(accepted);
    provenance["rejected_turns"] = std::to_string(rejected);
    provenance["termination"] = termination;
  };

  if (conversation.messages.size() >= target_length) {
    finish("seed_not_shorter_than_target");
    return conversation;
  }

  AcceptanceLog local_log;
  while (conversation.messages.size() < target_length) {
    const std::size_t before = local_log.events().size();
    TurnOutcome outcome;
    try {
      outcome = next_turn(conversation, config, chat, embedder, store, &local_log);
    } catch (const TransportError& e) {
      finish("transport_error");
      provenance["error"] = e.what();
      for (const auto& event : local_log.events()) {
        if (log) log->record(event);
      }
      throw ConversationAborted(conversation.id + ": " + e.what(), conversation);
    }
    const auto events = local_log.events();
    for (std::size_t i = before; i < events.size(); ++i) {
      if (std::holds_alternative<RejectedSimilar>(events[i].outcome)) ++rejected;
      if (log) log->record(events[i]);
    }
    if (std::holds_alternative<Exhausted>(outcome)) {
      finish("diversity_exhausted");
      return conversation;
    }
    ++accepted;
  }
  finish("target_reached");
  return conversation;
}

std::string seed_pool_digest(const std::vector<Conversation>& seed_pool, std::size_t dimension) {
  std::string material = std::to_string(dimension);
  for (const auto& seed : seed_pool) {
    for (const auto& message : seed.messages) {
      material.push_back('\x1f');
      material.append(message.text);
    }
  }
  return hex_digest(material);
}

CampaignResult run_campaign(const std::vector<Conversation>& seed_pool,
                            const GenerationConfig& config, ChatClient& chat,
                            EmbedderClient& embedder, CampaignOptions options) {
  config.validate();
  if (seed_pool.empty()) throw EmptySeedPool();

  std::size_t pool_messages = 0;
  for (const auto& seed : seed_pool) pool_messages += seed.messages.size();
  const std::string pool_digest = seed_pool_digest(seed_pool, options.dimension);

  CampaignResult result{Corpus{}, VectorStore(options.dimension), CampaignReport{}, {}};
  CampaignReport& report = result.report;
  report.params_digest = config.digest();

  const auto& cached = options.cached_seed_store;
  if (cached && cached->dimension() == options.dimension && cached->size() == pool_messages &&
      cached->metadata().count("seed_pool_digest") &&
      cached->metadata().at("seed_pool_digest") == pool_digest) {
    result.store = *cached;
    report.reused_seed_store = true;
  } else {
    std::vector<const Message*> messages;
    for (const auto& seed : seed_pool) {
      for (const auto& message : seed.messages) messages.push_back(&message);
    }
    const std::size_t batch = std::max<std::size_t>(options.embed_batch_size, 1);
    for (std::size_t start = 0; start < messages.size(); start += batch) {
      const std::size_t end = std::min(messages.size(), start + batch);
      std::vector<std::string> texts;
      for (std::size_t i = start; i < end; ++i) texts.push_back(messages[i]->text);
      auto vectors = embedder.embed_batch(texts);
      if (vectors.size() != texts.size()) {
        throw TransportError("embedder returned a short batch", messages[start]->id);
      }
      for (std::size_t i = start; i < end; ++i) {
        result.store.add(vectors[i - start], messages[i]->id);
      }
    }
  }
  result.store.metadata()["seed_pool_digest"] = pool_digest;
  result.store.metadata()["prepopulated"] = std::to_string(pool_messages);
  report.prepopulated = result.store.size();

  struct Job {
    Conversation seed;
    std::string id;
    std::size_t target_length;
  };
  std::vector<Job> jobs;
  for (std::size_t round = 0; round < config.rounds; ++round) {
    Rng sampler = Rng::split(config.rng_seed, 0, round);
    for (auto& seed : sample_seeds(seed_pool, config, sampler)) {
      const std::size_t index = jobs.size();
      Rng stream = Rng::split(config.rng_seed, 1, index);
      char id[64];
      std::snprintf(id, sizeof(id), "gen-%llu-%05zu",
                    static_cast<unsigned long long>(config.rng_seed), index);
      jobs.push_back({std::move(seed), id, sample_target_length(config, stream)});
    }
  }
  report.conversations = jobs.size();

  AcceptanceLog log;
  std::vector<std::optional<Conversation>> generated(jobs.size());
  std::vector<std::string> failures(jobs.size());
  const std::size_t workers = options.serial ? 1 : std::max<std::size_t>(options.jobs, 1);
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    try {
      generated[i] = generate_conversation(jobs[i].seed, jobs[i].id, jobs[i].target_length,
                                           config, chat, embedder, result.store, &log);
    } catch (const ConversationAborted& e) {
      failures[i] = std::string(e.what()) + " (partial length " +
                    std::to_string(e.partial().messages.size()) + ")";
    } catch (const Error& e) {
      failures[i] = jobs[i].id + ": " + e.what();
    }
  });

  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (generated[i]) {
      if (generated[i]->provenance["termination"] == "diversity_exhausted") {
        ++report.diversity_exhausted;
      }
      result.corpus.conversations.push_back(std::move(*generated[i]));
    } else {
      ++report.failed_conversations;
      report.failures.push_back(failures[i]);
    }
  }
  result.log = log.events();
  for (const auto& event : result.log) {
    if (std::holds_alternative<Accepted>(event.outcome)) ++report.accepted;
    if (std::holds_alternative<RejectedSimilar>(event.outcome)) ++report.rejected_similar;
  }

  StageReport stage;
  stage.stage_name = "generate";
  stage.input_conversations = jobs.size();
  stage.removed_conversations = report.failed_conversations;
  stage.params_digest = report.params_digest;
  stage.timestamp = utc_timestamp();
  stage.counters["prepopulated"] = static_cast<std::int64_t>(report.prepopulated);
  stage.counters["accepted"] = static_cast<std::int64_t>(report.accepted);
  stage.counters["rejected_similar"] = static_cast<std::int64_t>(report.rejected_similar);
  stage.counters["diversity_exhausted"] = static_cast<std::int64_t>(report.diversity_exhausted);
  stage.counters["store_size"] = static_cast<std::int64_t>(result.store.size());
  stage.errors = report.failures;
  result.corpus.manifest.push_back(std::move(stage));

  if (!jobs.empty() && report.failed_conversations == jobs.size()) {
    throw CampaignFailed("every conversation of the campaign failed; first: " +
                         report.failures.front());
  }
  return result;
}

}  // namespace corpusforge
