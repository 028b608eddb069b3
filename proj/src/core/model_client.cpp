#define CPPHTTPLIB_OPENSSL_SUPPORT
#include "httplib.h"
#include "json.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <mutex>
#include <regex>
#include <sstream>
#include <thread>

#include "ksatlab/llm_oracle.hpp"

namespace ksat::llm {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

std::string utc_timestamp() {
  std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Resolves "a.0.b" against objects and arrays; nullptr when absent.
const json *resolve_path(const json &root, std::string_view path) {
  const json *node = &root;
  while (!path.empty()) {
    auto dot = path.find('.');
    auto part = std::string(path.substr(0, dot));
    path = dot == std::string_view::npos ? std::string_view{} : path.substr(dot + 1);
    if (node->is_array()) {
      char *end = nullptr;
      auto idx = std::strtoul(part.c_str(), &end, 10);
      if (part.empty() || *end != '\0' || idx >= node->size())
        return nullptr;
      node = &(*node)[idx];
    } else if (node->is_object()) {
      auto it = node->find(part);
      if (it == node->end())
        return nullptr;
      node = &*it;
    } else {
      return nullptr;
    }
  }
  return node;
}

[[noreturn]] void schema_error(const std::string &what) {
  throw Error(ErrorCode::Schema, "transcript schema: " + what);
}

} // namespace

std::string Transcript::reply_text() const {
  for (auto it = messages.rbegin(); it != messages.rend(); ++it)
    if (it->role == "assistant")
      return it->content;
  return {};
}

std::string transcript_to_json(const Transcript &t) {
  json doc;
  doc["messages"] = json::array();
  for (const auto &m : t.messages)
    doc["messages"].push_back({{"role", m.role}, {"content", m.content}});
  doc["reasoning_log"] = t.reasoning_log ? json(*t.reasoning_log) : json(nullptr);
  doc["meta"] = {{"model", t.model}, {"timestamp", t.timestamp}};
  if (t.error)
    doc["meta"]["error"] = *t.error;
  return doc.dump(2) + "\n";
}

Transcript transcript_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    schema_error(std::string("not a JSON document (") + e.what() + ")");
  }
  if (!doc.is_object())
    schema_error("top level must be an object");

  Transcript t;
  auto msgs = doc.find("messages");
  if (msgs == doc.end() || !msgs->is_array() || msgs->empty())
    schema_error("'messages' must be a non-empty array");
  for (const auto &m : *msgs) {
    if (!m.is_object() || !m.contains("role") || !m.contains("content") ||
        !m["role"].is_string() || !m["content"].is_string())
      schema_error("every message needs string 'role' and 'content'");
    t.messages.push_back({m["role"].get<std::string>(), m["content"].get<std::string>()});
  }

  if (auto r = doc.find("reasoning_log"); r != doc.end()) {
    if (r->is_string())
      t.reasoning_log = r->get<std::string>();
    else if (!r->is_null())
      schema_error("'reasoning_log' must be a string or null");
  }

  auto meta = doc.find("meta");
  if (meta == doc.end() || !meta->is_object())
    schema_error("'meta' object is required");
  if (!meta->contains("model") || !(*meta)["model"].is_string() ||
      !meta->contains("timestamp") || !(*meta)["timestamp"].is_string())
    schema_error("'meta' needs string 'model' and 'timestamp'");
  t.model = (*meta)["model"].get<std::string>();
  t.timestamp = (*meta)["timestamp"].get<std::string>();
  if (auto e = meta->find("error"); e != meta->end()) {
    if (!e->is_string())
      schema_error("'meta.error' must be a string");
    t.error = e->get<std::string>();
  }
  return t;
}

void save_transcript(const Transcript &transcript,
                     const std::filesystem::path &path) {
  std::error_code ec;
  if (path.has_parent_path())
    std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << transcript_to_json(transcript);
  if (!out)
    throw Error(ErrorCode::Io, "cannot write transcript " + path.string());
}

Transcript replay_transcript(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open transcript " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  try {
    return transcript_from_json(ss.str());
  } catch (const Error &e) {
    throw Error(ErrorCode::Schema, path.string() + ": " + e.what());
  }
}

std::size_t ModelConfig::batch_size(std::int32_t k) const {
  auto it = batch_size_per_k.find(k);
  return it == batch_size_per_k.end() ? 1 : it->second;
}

ModelConfig model_config_from_json(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error &e) {
    throw Error(ErrorCode::Schema, std::string("model config: ") + e.what());
  }
  if (!doc.is_object())
    throw Error(ErrorCode::Schema, "model config must be a JSON object");

  ModelConfig c;
  try {
    for (const auto &[key, value] : doc.items()) {
      if (key == "endpoint")
        c.endpoint = value.get<std::string>();
      else if (key == "model")
        c.model = value.get<std::string>();
      else if (key == "api_key_env")
        c.api_key_env = value.get<std::string>();
      else if (key == "timeout_ms")
        c.timeout = std::chrono::milliseconds(value.get<std::int64_t>());
      else if (key == "max_retries")
        c.max_retries = value.get<int>();
      else if (key == "min_request_interval_ms")
        c.min_request_interval = std::chrono::milliseconds(value.get<std::int64_t>());
      else if (key == "initial_backoff_ms")
        c.initial_backoff = std::chrono::milliseconds(value.get<std::int64_t>());
      else if (key == "reply_path")
        c.reply_path = value.get<std::string>();
      else if (key == "reasoning_path")
        c.reasoning_path = value.get<std::string>();
      else if (key == "fresh_session_per_batch")
        c.fresh_session_per_batch = value.get<bool>();
      else if (key == "batch_size_per_k") {
        c.batch_size_per_k.clear();
        for (const auto &[k, size] : value.items()) {
          auto n = size.get<std::int64_t>();
          if (n < 1)
            throw Error(ErrorCode::Schema, "batch sizes must be >= 1");
          std::int32_t width = 0;
          auto [ptr, ec] = std::from_chars(k.data(), k.data() + k.size(), width);
          if (ec != std::errc{} || ptr != k.data() + k.size() || width < 1)
            throw Error(ErrorCode::Schema, "batch size key '" + k + "' is not a K");
          c.batch_size_per_k[width] = static_cast<std::size_t>(n);
        }
      } else if (key == "refusal_rules") {
        c.refusal_rules.clear();
        for (const auto &rule : value)
          c.refusal_rules.push_back(
              {rule.at("anchor").get<std::string>(),
               rule.at("any_of").get<std::vector<std::string>>()});
      } else {
        throw Error(ErrorCode::Schema, "model config: unknown key '" + key + "'");
      }
    }
  } catch (const json::exception &e) {
    throw Error(ErrorCode::Schema, std::string("model config: ") + e.what());
  }
  if (c.max_retries < 0)
    throw Error(ErrorCode::Schema, "model config: max_retries must be >= 0");
  return c;
}

ModelConfig load_model_config(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error(ErrorCode::Io, "cannot open model config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return model_config_from_json(ss.str());
}

struct ModelSession::Impl {
  ModelConfig config;
  Transcript transcript;
  std::string api_key;
  std::string base_url;
  std::string path;
  std::optional<Clock::time_point> last_request;
  std::mutex in_flight;

  [[noreturn]] void fail(ErrorCode code, const std::string &what) {
    transcript.error = what;
    throw QueryError(code, what, transcript);
  }

  void wait_for_slot() {
    if (!last_request)
      return;
    auto ready = *last_request + config.min_request_interval;
    auto now = Clock::now();
    if (now < ready)
      std::this_thread::sleep_for(ready - now);
  }

  std::string post(const std::string &body) {
    httplib::Client client(base_url);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(
        config.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());
    httplib::Headers headers{{"Authorization", "Bearer " + api_key}};

    std::string last_problem;
    for (int attempt = 0; attempt <= config.max_retries; ++attempt) {
      if (attempt > 0)
        std::this_thread::sleep_for(config.initial_backoff * (1 << (attempt - 1)));
      wait_for_slot();
      last_request = Clock::now();
      auto res = client.Post(path, headers, body, "application/json");
      if (!res) {
        last_problem = "transport failure: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403)
        fail(ErrorCode::Authentication,
             "endpoint rejected the credentials (HTTP " +
                 std::to_string(res->status) + ")");
      if (res->status == 429 || res->status >= 500) {
        last_problem = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status < 200 || res->status >= 300)
        fail(ErrorCode::Transport,
             "endpoint returned HTTP " + std::to_string(res->status));
      return res->body;
    }
    fail(ErrorCode::Transport,
         "giving up after " + std::to_string(config.max_retries + 1) +
             " attempts: " + last_problem);
  }
};

ModelSession::ModelSession(ModelConfig config) : impl_(std::make_unique<Impl>()) {
  impl_->config = std::move(config);
  impl_->transcript.model = impl_->config.model;
  impl_->transcript.timestamp = utc_timestamp();

  static const std::regex kUrl(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(impl_->config.endpoint, m, kUrl))
    throw Error(ErrorCode::InvalidArgument,
                "endpoint must be an http(s) URL: " + impl_->config.endpoint);
  impl_->base_url = m[1].str();
  impl_->path = m[2].matched ? m[2].str() : "/";

  const char *key = std::getenv(impl_->config.api_key_env.c_str());
  if (!key || !*key)
    impl_->fail(ErrorCode::Authentication,
                "environment variable " + impl_->config.api_key_env +
                    " holding the API key is not set");
  impl_->api_key = key;
}

ModelSession::~ModelSession() = default;

bool ModelSession::primed() const { return !impl_->transcript.messages.empty(); }

const Transcript &ModelSession::transcript() const { return impl_->transcript; }

std::string ModelSession::send(const std::string &user_text) {
  std::lock_guard lock(impl_->in_flight);
  auto &t = impl_->transcript;
  t.messages.push_back({"user", user_text});

  json body;
  body["model"] = impl_->config.model;
  body["messages"] = json::array();
  for (const auto &m : t.messages)
    body["messages"].push_back({{"role", m.role}, {"content", m.content}});

  auto raw = impl_->post(body.dump());
  json reply;
  try {
    reply = json::parse(raw);
  } catch (const json::parse_error &) {
    impl_->fail(ErrorCode::Schema, "endpoint reply is not JSON");
  }
  const json *content = resolve_path(reply, impl_->config.reply_path);
  if (!content || !content->is_string())
    impl_->fail(ErrorCode::Schema, "endpoint reply has no string at '" +
                                       impl_->config.reply_path + "'");
  auto text = content->get<std::string>();
  t.messages.push_back({"assistant", text});

  if (!impl_->config.reasoning_path.empty()) {
    if (const json *r = resolve_path(reply, impl_->config.reasoning_path);
        r && r->is_string()) {
      if (t.reasoning_log)
        *t.reasoning_log += "\n" + r->get<std::string>();
      else
        t.reasoning_log = r->get<std::string>();
    }
  }
  return text;
}

Transcript query_model(std::span<const CnfInstance> batch,
                       const ModelConfig &config) {
  if (batch.empty())
    throw Error(ErrorCode::InvalidArgument, "empty batch");
  const auto k = batch.front().k();
  auto prompt = build_batch_prompt(batch, config.batch_size(k));
  ModelSession session(config);
  session.send(build_priming_message());
  session.send(prompt);
  return session.transcript();
}

} // namespace ksat::llm
