#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "corpusforge/clients.h"
#include "corpusforge/corpus.h"
#include "corpusforge/errors.h"
#include "corpusforge/vector_store.h"

namespace corpusforge {

struct GenerationConfig {
  std::size_t n_seeds = 10;
  std::size_t target_length_min = 4;  // inclusive
  std::size_t target_length_max = 10;  // inclusive
  double similarity_threshold = 0.9;
  int max_retries_per_turn = 3;
  std::uint64_t rng_seed = 0;
  std::size_t rounds = 1;  // sampling rounds per campaign
  // "{transcript}" is replaced by the rendered conversation so far.
  std::map<Role, std::string> prompt_templates = default_prompt_templates();
  ChatParams chat{"", 0.7, 512};

  // Throws ConfigError when an invariant is violated.
  void validate() const;
  std::string digest() const;

  static std::map<Role, std::string> default_prompt_templates();
};

// Deterministic random stream. Bounded draws use rejection sampling on the
// raw mt19937_64 output, so results do not depend on the standard library's
// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  // Uniform in [0, bound). bound must be positive.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [lo, hi].
  std::uint64_t between(std::uint64_t lo, std::uint64_t hi);

  // Independent stream for item `index` of a stream family.
  static Rng split(std::uint64_t seed, std::uint64_t stream, std::uint64_t index);

 private:
  std::mt19937_64 engine_;
};

// Draws min(n_seeds, |seeds|) seeds uniformly without replacement.
// Throws EmptySeedPool.
std::vector<Conversation> sample_seeds(const std::vector<Conversation>& seeds,
                                       const GenerationConfig& config, Rng& rng);

std::size_t sample_target_length(const GenerationConfig& config, Rng& rng);

struct Accepted {
  Message message;
  std::optional<Neighbor> nearest;  // nullopt when the store was empty
  std::size_t store_id = 0;
};

struct RejectedSimilar {
  double similarity = 0.0;
  std::size_t nearest_id = 0;
};

struct Exhausted {
  int attempts = 0;
};

using TurnOutcome = std::variant<Accepted, RejectedSimilar, Exhausted>;

// One generation attempt: the candidate's fate and the store size it was
// checked against.
struct AcceptanceEvent {
  std::string conversation_id;
  std::size_t turn = 0;  // message index the candidate would occupy
  int attempt = 0;
  std::size_t store_prefix = 0;
  TurnOutcome outcome;
};

class AcceptanceLog {
 public:
  void record(AcceptanceEvent event);
  std::vector<AcceptanceEvent> events() const;

 private:
  mutable std::mutex mutex_;
  std::vector<AcceptanceEvent> events_;
};

// Role that speaks after `previous`: Human <-> Assistant, System -> Human.
Role next_role(Role previous);

// "Utente: ..." / "Assistente: ..." blocks separated by blank lines.
std::string render_transcript(const Conversation& conversation);

std::string render_prompt(const std::string& prompt_template, const Conversation& conversation);

// Generates, embeds and diversity-checks the next message of `conversation`.
// A candidate whose max similarity to the store is strictly above the
// threshold is discarded and regenerated, up to max_retries_per_turn times.
// On acceptance the message is appended to the conversation and its
// embedding to the store, and Accepted is returned; otherwise Exhausted.
// Transport errors propagate.
TurnOutcome next_turn(Conversation& conversation, const GenerationConfig& config,
                      ChatClient& chat, EmbedderClient& embedder, VectorStore& store,
                      AcceptanceLog* log = nullptr);

// Thrown by generate_conversation when a transport error interrupts it; it
// carries the partial conversation.
class ConversationAborted : public TransportError {
 public:
  ConversationAborted(const std::string& what, Conversation partial)
      : TransportError(what), partial_(std::move(partial)) {}
  const Conversation& partial() const { return partial_; }

 private:
  Conversation partial_;
};

// Extends a copy of `seed` with next_turn until it holds `target_length`
// messages or a turn is exhausted. Provenance records seed id, target
// length, rng seed, accepted/rejected counts and the termination reason
// ("target_reached", "seed_not_shorter_than_target", "diversity_exhausted").
Conversation generate_conversation(const Conversation& seed, const std::string& conversation_id,
                                   std::size_t target_length, const GenerationConfig& config,
                                   ChatClient& chat, EmbedderClient& embedder, VectorStore& store,
                                   AcceptanceLog* log = nullptr);

struct CampaignOptions {
  std::size_t dimension = 512;
  std::size_t embed_batch_size = 64;
  bool serial = true;
  std::size_t jobs = 1;
  // Store holding the embeddings of the seed pool from an earlier run. Used
  // only when its "seed_pool_digest" metadata matches the current pool.
  std::optional<VectorStore> cached_seed_store;
};

struct CampaignReport {
  std::size_t prepopulated = 0;
  bool reused_seed_store = false;
  std::size_t conversations = 0;
  std::size_t failed_conversations = 0;
  std::size_t accepted = 0;
  std::size_t rejected_similar = 0;
  std::size_t diversity_exhausted = 0;
  std::vector<std::string> failures;
  std::string params_digest;
};

struct CampaignResult {
  Corpus corpus;
  VectorStore store;
  CampaignReport report;
  std::vector<AcceptanceEvent> log;
};

// Digest identifying a seed pool's texts and the embedding dimension.
std::string seed_pool_digest(const std::vector<Conversation>& seed_pool, std::size_t dimension);

// Populates the store with every seed-pool message, samples seeds for each
// round and generates one conversation per sampled seed. Conversation i uses
// the random stream Rng::split(rng_seed, 1, i). Individual failures are
// reported; CampaignFailed is thrown only when every conversation fails.
CampaignResult run_campaign(const std::vector<Conversation>& seed_pool,
                            const GenerationConfig& config, ChatClient& chat,
                            EmbedderClient& embedder, CampaignOptions options);

}  // namespace corpusforge
