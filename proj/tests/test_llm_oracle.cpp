#include <gtest/gtest.h>

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <random>
#include <sstream>
#include <thread>

#include "ksatlab/experiment.hpp"
#include "ksatlab/generator.hpp"
#include "ksatlab/llm_oracle.hpp"

using namespace ksat;
using namespace ksat::llm;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kFixtures = KSATLAB_FIXTURES_DIR;

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char *const kRecordedOutputs[] = {"0000100000", "0000000000", "0000000000",
                                        "0000000000", "0000000010", "0000000000",
                                        "0000000001", "0000000000", "0000000000",
                                        "0000000000"};

std::string recorded_reply() {
  std::string out;
  for (auto *s : kRecordedOutputs)
    out += std::string(out.empty() ? "" : "\n") + s;
  return out;
}

std::vector<CnfInstance> recorded_instances() {
  std::vector<CnfInstance> out;
  for (int i = 0; i < 10; ++i)
    out.push_back(load_dimacs(
        (kFixtures / "recorded_exchange/suite/k2_n10/alpha0.1" / ("sample" + std::to_string(i) + ".cnf"))
            .string()));
  return out;
}

constexpr const char *kRefusal =
    "I'm sorry, solving this many clauses by hand is impractical here. "
    "For reliable answers I recommend using a SAT solver on these instances.";

// Chat-completions stand-in on a loopback port. `reply` decides the HTTP
// status and body for the n-th request (0-based).
class MockEndpoint {
public:
  using Handler = std::function<std::pair<int, std::string>(std::size_t, const json &)>;

  explicit MockEndpoint(Handler handler) : handler_(std::move(handler)) {
    server_.Post("/v1/chat/completions",
                 [this](const httplib::Request &req, httplib::Response &res) {
                   std::size_t n;
                   {
                     std::lock_guard lock(mu_);
                     n = arrivals_.size();
                     arrivals_.push_back(std::chrono::steady_clock::now());
                     auth_.push_back(req.get_header_value("Authorization"));
                     bodies_.push_back(json::parse(req.body));
                   }
                   auto [status, body] = handler_(n, bodies_.back());
                   res.status = status;
                   res.set_content(body, "application/json");
                 });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~MockEndpoint() {
    server_.stop();
    thread_.join();
  }

  std::string url() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }
  std::size_t requests() {
    std::lock_guard lock(mu_);
    return arrivals_.size();
  }
  std::vector<std::chrono::steady_clock::time_point> arrivals() {
    std::lock_guard lock(mu_);
    return arrivals_;
  }
  std::vector<std::string> auth() {
    std::lock_guard lock(mu_);
    return auth_;
  }
  std::vector<json> bodies() {
    std::lock_guard lock(mu_);
    return bodies_;
  }

private:
  Handler handler_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
  std::mutex mu_;
  std::vector<std::chrono::steady_clock::time_point> arrivals_;
  std::vector<std::string> auth_;
  std::vector<json> bodies_;
};

std::string chat_reply(const std::string &content,
                       const std::optional<std::string> &reasoning = std::nullopt) {
  json msg = {{"role", "assistant"}, {"content", content}};
  if (reasoning)
    msg["reasoning_content"] = *reasoning;
  return json{{"choices", json::array({json{{"message", msg}}})}}.dump();
}

constexpr const char *kKeyEnv = "KSATLAB_TEST_API_KEY";
constexpr const char *kKey = "sk-test-0123456789";

ModelConfig mock_config(const MockEndpoint &mock) {
  ::setenv(kKeyEnv, kKey, 1);
  ModelConfig c;
  c.endpoint = mock.url();
  c.model = "mock-model";
  c.api_key_env = kKeyEnv;
  c.timeout = std::chrono::milliseconds(5000);
  c.initial_backoff = std::chrono::milliseconds(5);
  return c;
}

// Recorded behaviour: acknowledge the priming text, then answer the batch.
std::pair<int, std::string> recorded_handler(std::size_t, const json &body) {
  const auto &messages = body.at("messages");
  if (messages.size() == 1)
    return {200, chat_reply("Sure, send the formulas over.")};
  return {200, chat_reply(recorded_reply())};
}

} // namespace

TEST(Priming, MatchesGoldenFixture) {
  const auto golden = slurp(kFixtures / "priming.txt");
  EXPECT_EQ(build_priming_message(), golden);
  EXPECT_EQ(build_priming_message().size(), golden.size());
  EXPECT_TRUE(build_priming_message().starts_with("I will provide you with a CNF formula"));
  EXPECT_EQ(build_priming_message(), build_priming_message());
}

TEST(BatchPrompt, RecordedLayout) {
  auto instances = recorded_instances();
  auto prompt = build_batch_prompt(instances, 10);
  EXPECT_TRUE(prompt.starts_with("1) c seed=67612117\np cnf 10 1\n5 -6 0\n\n2) c seed=910839500"));
  EXPECT_TRUE(prompt.ends_with("10) c seed=2807763567\np cnf 10 1\n-3 -4 0"));
}

TEST(BatchPrompt, SingleInstanceWithoutComments) {
  auto cnf = parse_dimacs("p cnf 10 1\n5 -6 0\n");
  EXPECT_EQ(build_batch_prompt(std::span(&cnf, 1)), "1) p cnf 10 1\n5 -6 0");
}

TEST(BatchPrompt, BlockCountEqualsInstanceCount) {
  for (std::size_t count = 1; count <= 6; ++count) {
    auto suite = gen::generate_sweep_suite(3, 10, {4.0}, count, count);
    std::vector<CnfInstance> batch;
    for (const auto &[key, cnf] : suite.instances)
      batch.push_back(cnf);
    auto prompt = build_batch_prompt(batch, 6);
    std::size_t blocks = 0;
    for (std::size_t pos = 0; (pos = prompt.find(") c seed=", pos)) != std::string::npos; ++pos)
      ++blocks;
    EXPECT_EQ(blocks, count);
  }
}

TEST(BatchPrompt, TooLargeOrEmpty) {
  auto instances = recorded_instances();
  EXPECT_THROW(build_batch_prompt(instances, 5), Error);
  EXPECT_THROW(build_batch_prompt(std::span<const CnfInstance>{}), Error);
}

TEST(ParseResponse, RecordedOutputs) {
  auto r = parse_response(recorded_reply(), 10, 10);
  ASSERT_EQ(r.outcomes.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(r.outcomes[i].kind, OutcomeKind::Assignment);
    EXPECT_EQ(r.outcomes[i].assignment->to_string(), kRecordedOutputs[i]);
  }
  EXPECT_TRUE(r.warnings.empty());
}

TEST(ParseResponse, Refusal) {
  auto r = parse_response("I'm sorry, but due to the complexity …",
                          10, 2);
  ASSERT_EQ(r.outcomes.size(), 2u);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Refusal);
  EXPECT_EQ(r.outcomes[1].kind, OutcomeKind::Refusal);

  r = parse_response(kRefusal, 10, 2);
  EXPECT_EQ(r.outcomes[1].kind, OutcomeKind::Refusal);
  // Typographic apostrophe.
  r = parse_response("I\xE2\x80\x99m sorry, this is impractical.", 10, 1);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Refusal);
  // The anchor alone is not enough.
  r = parse_response("I'm sorry for the delay, here you go.", 10, 1);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Unparseable);
}

TEST(ParseResponse, PartialAnswerThenRefusal) {
  auto r = parse_response(std::string("0000100000\n") + kRefusal, 10, 3);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Assignment);
  EXPECT_EQ(r.outcomes[1].kind, OutcomeKind::Refusal);
  EXPECT_EQ(r.outcomes[2].kind, OutcomeKind::Refusal);
}

TEST(ParseResponse, Unparseable) {
  auto r = parse_response("hello world", 10, 1);
  ASSERT_EQ(r.outcomes.size(), 1u);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Unparseable);
}

TEST(ParseResponse, CustomRefusalRules) {
  std::vector<RefusalRule> rules{{"cannot comply", {"too hard"}}};
  auto r = parse_response("I cannot comply, too hard", 10, 1, rules);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Refusal);
  r = parse_response(kRefusal, 10, 1, rules);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Unparseable);
}

TEST(ParseResponse, MarkupAndOrdinals) {
  const std::string reply = "Here are the assignments:\n```text\n1) 0100110010\n"
                            "2. `1111100000`\n- **0000011111**\nFormula 4: 1010101010\n"
                            "```\nLet me know if you need more.";
  auto r = parse_response(reply, 10, 4);
  ASSERT_EQ(r.outcomes.size(), 4u);
  EXPECT_EQ(r.outcomes[0].assignment->to_string(), "0100110010");
  EXPECT_EQ(r.outcomes[1].assignment->to_string(), "1111100000");
  EXPECT_EQ(r.outcomes[2].assignment->to_string(), "0000011111");
  EXPECT_EQ(r.outcomes[3].assignment->to_string(), "1010101010");
}

TEST(ParseResponse, WrongLengthIsIgnored) {
  auto r = parse_response("010\n0000100000", 10, 2);
  EXPECT_EQ(r.outcomes[0].assignment->to_string(), "0000100000");
  EXPECT_EQ(r.outcomes[1].kind, OutcomeKind::Unparseable);
}

TEST(ParseResponse, ExtraAssignmentsWarn) {
  auto r = parse_response("0000100000\n0000000001\n1111111111", 10, 2);
  ASSERT_EQ(r.outcomes.size(), 2u);
  EXPECT_EQ(r.outcomes[1].assignment->to_string(), "0000000001");
  EXPECT_EQ(r.warnings.size(), 1u);
}

TEST(ParseResponse, SignedWitness) {
  auto r = parse_response("\xE2\x88\x92" "1 2 3 -4 0", 4, 1);
  ASSERT_EQ(r.outcomes[0].kind, OutcomeKind::Assignment);
  EXPECT_EQ(r.outcomes[0].assignment->to_string(), "0110");
  // A repeated variable is not a witness.
  r = parse_response("-1 1 3 4", 4, 1);
  EXPECT_EQ(r.outcomes[0].kind, OutcomeKind::Unparseable);
}

TEST(ParseResponse, SpaceSeparatedBits) {
  auto r = parse_response("0 0 0 0 1 0 0 0 0 0", 10, 1);
  EXPECT_EQ(r.outcomes[0].assignment->to_string(), "0000100000");
}

TEST(ParseResponse, TotalOnFuzzedText) {
  std::mt19937_64 rng(314159);
  const std::string alphabet = "01 -\n\t)(.:`*#abcxyzI'm sorry\xE2\x88\x92\xFF\x00";
  for (int trial = 0; trial < 3000; ++trial) {
    std::string text(rng() % 300, ' ');
    for (auto &c : text)
      c = alphabet[rng() % alphabet.size()];
    const std::int32_t n = 1 + static_cast<std::int32_t>(rng() % 12);
    const std::size_t expected = 1 + rng() % 6;
    OracleResponse r;
    ASSERT_NO_THROW(r = parse_response(text, n, expected));
    ASSERT_EQ(r.outcomes.size(), expected);
    for (const auto &o : r.outcomes)
      if (o.kind == OutcomeKind::Assignment)
        ASSERT_EQ(o.assignment->size(), static_cast<std::size_t>(n));
  }
}

TEST(DetectSolverCall, Examples) {
  const auto log = replay_transcript(kFixtures /
                                     "reasoning_log/transcripts/k4_n10/alpha8.0/batch0.json")
                       .reasoning_log.value();
  EXPECT_EQ(detect_solver_call(log), (std::vector<std::string>{"sat solver", "dpll solver"}));
  EXPECT_EQ(detect_solver_call("I will use Pycosat and MiniSAT"),
            (std::vector<std::string>{"pycosat", "minisat"}));
  EXPECT_TRUE(detect_solver_call("I will reason step by step").empty());
}

TEST(DetectSolverCall, NoDuplicatesAndIdempotent) {
  const std::string text = "sat solver, SAT Solver, minisat then MiniSat again";
  auto once = detect_solver_call(text);
  EXPECT_EQ(once, (std::vector<std::string>{"sat solver", "minisat"}));
  EXPECT_EQ(detect_solver_call(text), once);
}

TEST(Transcript, JsonRoundTrip) {
  Transcript t;
  t.messages = {{"user", build_priming_message()}, {"assistant", "ok \"quoted\"\n"}};
  t.reasoning_log = "thinking\xE2\x80\xA6";
  t.model = "m";
  t.timestamp = "2024-09-01T00:00:00Z";
  t.error = "boom";
  EXPECT_EQ(transcript_from_json(transcript_to_json(t)), t);
  t.reasoning_log.reset();
  t.error.reset();
  const auto text = transcript_to_json(t);
  EXPECT_NE(text.find("\"reasoning_log\": null"), std::string::npos);
  EXPECT_EQ(transcript_from_json(text), t);
}

TEST(Transcript, SchemaErrors) {
  auto expect_schema = [](const std::string &text) {
    try {
      transcript_from_json(text);
      ADD_FAILURE() << "accepted: " << text;
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::Schema);
    }
  };
  expect_schema("");
  expect_schema("[]");
  expect_schema(R"({"messages": [], "meta": {"model": "m", "timestamp": "t"}})");
  expect_schema(R"({"messages": [{"role": "user"}], "meta": {"model": "m", "timestamp": "t"}})");
  expect_schema(R"({"messages": [{"role": "user", "content": "x"}]})");
  expect_schema(R"({"messages": [{"role": "user", "content": "x"}], "reasoning_log": 3,
                    "meta": {"model": "m", "timestamp": "t"}})");

  const auto empty = fs::temp_directory_path() / "ksatlab_empty_transcript.json";
  std::ofstream(empty).close();
  try {
    replay_transcript(empty);
    ADD_FAILURE() << "empty file accepted";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::Schema);
  }
  fs::remove(empty);
}

TEST(Replay, RecordedExchangeFixture) {
  auto t = replay_transcript(kFixtures / "recorded_exchange/transcripts/k2_n10/alpha0.1/batch0.json");
  ASSERT_EQ(t.messages.size(), 4u);
  EXPECT_EQ(t.messages[0].content, build_priming_message());
  EXPECT_EQ(t.messages[2].content, build_batch_prompt(recorded_instances(), 10));
  auto r = parse_response(t.reply_text(), 10, 10);
  ASSERT_EQ(r.outcomes.size(), 10u);
  for (const auto &o : r.outcomes)
    EXPECT_EQ(o.kind, OutcomeKind::Assignment);
  EXPECT_EQ(r.outcomes[0].assignment->to_string(), "0000100000");
}

TEST(Replay, ReasoningLogFixture) {
  auto t = replay_transcript(kFixtures / "reasoning_log/transcripts/k4_n10/alpha8.0/batch0.json");
  ASSERT_TRUE(t.reasoning_log.has_value());
  EXPECT_FALSE(detect_solver_call(*t.reasoning_log).empty());
}

TEST(ModelConfigJson, DefaultsAndOverrides) {
  ModelConfig d;
  EXPECT_EQ(d.batch_size(2), 10u);
  EXPECT_EQ(d.batch_size(3), 5u);
  EXPECT_EQ(d.batch_size(4), 2u);
  EXPECT_EQ(d.batch_size(7), 1u);

  auto c = model_config_from_json(R"({"model": "x", "max_retries": 2,
      "batch_size_per_k": {"3": 4}, "min_request_interval_ms": 250,
      "refusal_rules": [{"anchor": "nope", "any_of": ["never"]}]})");
  EXPECT_EQ(c.model, "x");
  EXPECT_EQ(c.max_retries, 2);
  EXPECT_EQ(c.batch_size(3), 4u);
  EXPECT_EQ(c.batch_size(2), 1u);
  EXPECT_EQ(c.min_request_interval, std::chrono::milliseconds(250));
  ASSERT_EQ(c.refusal_rules.size(), 1u);

  for (const char *bad : {R"({"api_key": "sk-123"})", R"({"batch_size_per_k": {"x": 2}})",
                          R"({"batch_size_per_k": {"3": 0}})", R"({"max_retries": -1})",
                          R"({"timeout_ms": "soon"})", "not json"}) {
    try {
      model_config_from_json(bad);
      ADD_FAILURE() << "accepted: " << bad;
    } catch (const Error &e) {
      EXPECT_EQ(e.code(), ErrorCode::Schema) << bad;
    }
  }
}

TEST(LiveClient, RecordedExchangeThroughMock) {
  MockEndpoint mock(recorded_handler);
  auto config = mock_config(mock);
  auto t = query_model(recorded_instances(), config);
  ASSERT_EQ(t.messages.size(), 4u);
  EXPECT_EQ(t.messages[0].content, build_priming_message());
  EXPECT_EQ(t.model, "mock-model");
  EXPECT_FALSE(t.error.has_value());
  auto r = parse_response(t.reply_text(), 10, 10);
  for (std::size_t i = 0; i < 10; ++i)
    EXPECT_EQ(r.outcomes[i].assignment->to_string(), kRecordedOutputs[i]);

  ASSERT_EQ(mock.requests(), 2u);
  for (const auto &a : mock.auth())
    EXPECT_EQ(a, std::string("Bearer ") + kKey);
  const auto bodies = mock.bodies();
  EXPECT_EQ(bodies[1]["model"], "mock-model");
  EXPECT_EQ(bodies[1]["messages"].size(), 3u);
  EXPECT_EQ(bodies[1]["messages"][0]["content"], build_priming_message());
  // The key stays out of everything persisted.
  EXPECT_EQ(transcript_to_json(t).find(kKey), std::string::npos);
}

TEST(LiveClient, ServerErrorsExhaustRetries) {
  MockEndpoint mock([](std::size_t, const json &) {
    return std::pair{500, std::string(R"({"error": "overloaded"})")};
  });
  auto config = mock_config(mock);
  config.max_retries = 2;
  try {
    query_model(recorded_instances(), config);
    FAIL() << "expected a transport error";
  } catch (const QueryError &e) {
    EXPECT_EQ(e.code(), ErrorCode::Transport);
    ASSERT_TRUE(e.partial().error.has_value());
    ASSERT_EQ(e.partial().messages.size(), 1u);
    EXPECT_EQ(e.partial().messages[0].content, build_priming_message());
    EXPECT_EQ(std::string(e.what()).find(kKey), std::string::npos);
  }
  EXPECT_EQ(mock.requests(), 3u);
}

TEST(LiveClient, TransientFailuresAreRetried) {
  MockEndpoint mock([](std::size_t n, const json &body) {
    if (n % 2 == 0)
      return std::pair{429, std::string("{}")};
    return recorded_handler(n, body);
  });
  auto config = mock_config(mock);
  config.max_retries = 1;
  auto t = query_model(recorded_instances(), config);
  EXPECT_EQ(parse_response(t.reply_text(), 10, 10).outcomes[6].assignment->to_string(),
            "0000000001");
  EXPECT_EQ(mock.requests(), 4u);
}

TEST(LiveClient, AuthenticationFailureIsNotRetried) {
  MockEndpoint mock([](std::size_t, const json &) {
    return std::pair{401, std::string(R"({"error": "bad key"})")};
  });
  auto config = mock_config(mock);
  try {
    query_model(recorded_instances(), config);
    FAIL() << "expected an authentication error";
  } catch (const QueryError &e) {
    EXPECT_EQ(e.code(), ErrorCode::Authentication);
  }
  EXPECT_EQ(mock.requests(), 1u);
}

TEST(LiveClient, MissingKeyFailsBeforeAnyRequest) {
  MockEndpoint mock(recorded_handler);
  auto config = mock_config(mock);
  config.api_key_env = "KSATLAB_TEST_UNSET_KEY";
  ::unsetenv("KSATLAB_TEST_UNSET_KEY");
  try {
    query_model(recorded_instances(), config);
    FAIL() << "expected an authentication error";
  } catch (const Error &e) {
    EXPECT_EQ(e.code(), ErrorCode::Authentication);
    EXPECT_NE(std::string(e.what()).find("KSATLAB_TEST_UNSET_KEY"), std::string::npos);
  }
  EXPECT_EQ(mock.requests(), 0u);
}

TEST(LiveClient, MalformedReply) {
  MockEndpoint mock([](std::size_t, const json &) {
    return std::pair{200, std::string(R"({"choices": []})")};
  });
  try {
    query_model(recorded_instances(), mock_config(mock));
    FAIL() << "expected a schema error";
  } catch (const QueryError &e) {
    EXPECT_EQ(e.code(), ErrorCode::Schema);
    EXPECT_TRUE(e.partial().error.has_value());
  }
}

TEST(LiveClient, RateLimitSpacing) {
  MockEndpoint mock(recorded_handler);
  auto config = mock_config(mock);
  config.min_request_interval = std::chrono::milliseconds(200);
  ModelSession session(config);
  session.send(build_priming_message());
  session.send("1) p cnf 10 1\n5 -6 0");
  session.send("2) p cnf 10 1\n-1 6 0");
  const auto at = mock.arrivals();
  ASSERT_EQ(at.size(), 3u);
  for (std::size_t i = 1; i < at.size(); ++i)
    EXPECT_GE(at[i] - at[i - 1], std::chrono::milliseconds(195));
}

TEST(LiveClient, ReasoningTextIsCaptured) {
  MockEndpoint mock([](std::size_t n, const json &) {
    return std::pair{200, chat_reply(n == 0 ? "Yes" : "0000100000",
                                     n == 0 ? std::nullopt
                                            : std::optional<std::string>(
                                                  "Crafting the response: I'm using SAT solver"))};
  });
  auto cnf = parse_dimacs("p cnf 10 1\n5 -6 0\n");
  auto t = query_model(std::span(&cnf, 1), mock_config(mock));
  ASSERT_TRUE(t.reasoning_log.has_value());
  EXPECT_EQ(detect_solver_call(*t.reasoning_log), std::vector<std::string>{"sat solver"});
}

TEST(LiveClient, SweepPersistsPartialTranscriptOnFailure) {
  MockEndpoint mock([](std::size_t n, const json &body) {
    if (n >= 2)
      return std::pair{503, std::string("{}")};
    return recorded_handler(n, body);
  });
  const auto out = fs::temp_directory_path() / "ksatlab_partial_sweep";
  fs::remove_all(out);
  auto suite = gen::generate_sweep_suite(4, 10, {8.0, 8.2}, 2, 3);
  experiment::SweepConfig config;
  config.oracle = experiment::OracleKind::Model;
  config.model = mock_config(mock);
  config.model.max_retries = 1;
  config.transcript_dir = out;
  config.baseline = false;
  auto result = experiment::run_sweep(suite, config);
  ASSERT_TRUE(result.error.has_value());
  EXPECT_EQ(result.error_code, ErrorCode::Transport);
  EXPECT_EQ(result.points.size(), 1u);
  const auto ok = out / "k4_n10/alpha8.0/batch0.json";
  const auto failed = out / "k4_n10/alpha8.2/batch0.json";
  ASSERT_TRUE(fs::exists(ok));
  ASSERT_TRUE(fs::exists(failed));
  EXPECT_FALSE(replay_transcript(ok).error.has_value());
  EXPECT_TRUE(replay_transcript(failed).error.has_value());
  fs::remove_all(out);
}
