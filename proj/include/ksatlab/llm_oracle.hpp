#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "ksatlab/cnf.hpp"

namespace ksat::llm {

/// Opening message of every chat session, sent verbatim.
inline constexpr std::string_view kPrimingMessage =
    "I will provide you with a CNF formula of a satisfiability problem. Can "
    "you give me an assignment that satisfies the formula as a string of "
    "binary variables? Also, can you handle a list of formulas and provide "
    "the assignments that satisfy them?";

std::string build_priming_message();

/// Renders "<ordinal>) <DIMACS>" blocks separated by blank lines. Throws
/// Error(InvalidArgument) for an empty batch or one larger than `max_batch`.
std::string build_batch_prompt(std::span<const CnfInstance> instances,
                               std::size_t max_batch = SIZE_MAX);

enum class OutcomeKind { Assignment, Refusal, Unparseable };

std::string_view to_string(OutcomeKind kind);

struct InstanceOutcome {
  OutcomeKind kind = OutcomeKind::Unparseable;
  std::optional<Assignment> assignment;
  std::string text;
};

struct OracleResponse {
  std::vector<InstanceOutcome> outcomes;
  std::string raw_reply;
  std::vector<std::string> solver_call_matches;
  std::vector<std::string> warnings;
};

/// A reply is a refusal when it contains `anchor` and at least one of
/// `any_of` (case-insensitive; typographic apostrophes are normalised).
struct RefusalRule {
  std::string anchor;
  std::vector<std::string> any_of;
};

std::vector<RefusalRule> default_refusal_rules();

bool is_refusal(std::string_view reply, std::span<const RefusalRule> rules);

/// Total: always returns exactly `expected` outcomes, in instance order.
OracleResponse parse_response(std::string_view reply, std::int32_t n_vars,
                              std::size_t expected,
                              std::span<const RefusalRule> rules = {});

/// Keywords searched by detect_solver_call, lower case.
std::span<const std::string_view> solver_keywords();

/// Distinct solver keywords found in `log_text`, in first-occurrence order.
std::vector<std::string> detect_solver_call(std::string_view log_text);

struct Message {
  std::string role;
  std::string content;
  friend bool operator==(const Message &, const Message &) = default;
};

struct Transcript {
  std::vector<Message> messages;
  std::optional<std::string> reasoning_log;
  std::string model;
  std::string timestamp;
  /// Set when the exchange failed part-way.
  std::optional<std::string> error;

  /// Content of the last assistant message, empty when there is none.
  std::string reply_text() const;

  friend bool operator==(const Transcript &, const Transcript &) = default;
};

std::string transcript_to_json(const Transcript &transcript);
/// Throws Error(Schema) when `text` does not match the transcript schema.
Transcript transcript_from_json(std::string_view text);
void save_transcript(const Transcript &transcript,
                     const std::filesystem::path &path);
Transcript replay_transcript(const std::filesystem::path &path);

struct ModelConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "o1-preview";
  std::string api_key_env = "OPENAI_API_KEY";
  std::chrono::milliseconds timeout{120'000};
  int max_retries = 3;
  std::map<std::int32_t, std::size_t> batch_size_per_k{{2, 10}, {3, 5}, {4, 2}};
  /// Dot-separated path to the reply text; numeric parts index arrays.
  std::string reply_path = "choices.0.message.content";
  /// Optional path to surfaced reasoning text.
  std::string reasoning_path = "choices.0.message.reasoning_content";
  std::chrono::milliseconds min_request_interval{0};
  std::chrono::milliseconds initial_backoff{1000};
  bool fresh_session_per_batch = true;
  std::vector<RefusalRule> refusal_rules = default_refusal_rules();

  /// Batch size for clause width K; 1 when K is not configured.
  std::size_t batch_size(std::int32_t k) const;
};

/// Reads a JSON config document; absent keys keep their defaults.
ModelConfig model_config_from_json(std::string_view text);
ModelConfig load_model_config(const std::filesystem::path &path);

/// Failure of a live exchange. Carries everything captured before the
/// failure, with `partial.error` set.
class QueryError : public Error {
public:
  QueryError(ErrorCode code, const std::string &what, Transcript partial)
      : Error(code, what), partial_(std::move(partial)) {}
  const Transcript &partial() const { return partial_; }

private:
  Transcript partial_;
};

/// One chat conversation with a chat-completions style endpoint. Requests
/// are strictly sequential; a session never has two requests in flight.
class ModelSession {
public:
  explicit ModelSession(ModelConfig config);
  ~ModelSession();
  ModelSession(const ModelSession &) = delete;
  ModelSession &operator=(const ModelSession &) = delete;

  /// Appends a user message, posts the whole conversation and appends the
  /// reply. Throws QueryError on authentication failure, retries exhausted
  /// or a malformed reply.
  std::string send(const std::string &user_text);

  bool primed() const;
  const Transcript &transcript() const;

private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Priming message followed by the batch prompt in a fresh session.
Transcript query_model(std::span<const CnfInstance> batch,
                       const ModelConfig &config);

} // namespace ksat::llm
