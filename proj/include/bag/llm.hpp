#pragma once

// Chat-completion clients.
//
// HttpChatClient speaks the OpenAI-compatible /chat/completions shape that
// all supported providers expose. RecordingClient appends every exchange to
// a JSON Lines session file; ReplayClient serves a recorded session back in
// order, optionally verifying request digests.

#include <openssl/evp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "bag/error.hpp"

namespace bag::llm {

struct Message {
  std::string role;
  std::string content;

  friend bool operator==(const Message&, const Message&) = default;
};

struct ChatRequest {
  std::string model;
  std::vector<Message> messages;
  /// Extra body fields (temperature, ...). Empty means provider defaults.
  nlohmann::json decoding = nlohmann::json::object();
};

struct Usage {
  std::int64_t prompt_tokens = 0;
  std::int64_t completion_tokens = 0;

  friend bool operator==(const Usage&, const Usage&) = default;
};

struct ChatResponse {
  std::string text;
  std::optional<Usage> usage;
  nlohmann::json provider_meta = nlohmann::json::object();
};

inline void validate(const ChatRequest& req) {
  if (req.messages.empty()) fail(errc::invalid_argument, "chat request has no messages");
  for (const auto& m : req.messages)
    if (m.role != "system" && m.role != "user" && m.role != "assistant")
      fail(errc::invalid_argument, "invalid message role '" + m.role + "'");
  if (!req.decoding.is_object()) fail(errc::invalid_argument, "decoding parameters must be an object");
}

inline nlohmann::json request_body(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", m.role}, {"content", m.content}});
  nlohmann::json body = req.decoding;
  body["model"] = req.model;
  body["messages"] = std::move(msgs);
  return body;
}

inline std::string sha256_hex(std::string_view data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1)
    fail(errc::io_error, "sha256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

/// Digest of the canonical request body (keys sorted).
inline std::string request_digest(const ChatRequest& req) { return sha256_hex(request_body(req).dump()); }

inline nlohmann::json usage_json(const std::optional<Usage>& u) {
  if (!u) return nullptr;
  return {{"prompt_tokens", u->prompt_tokens}, {"completion_tokens", u->completion_tokens}};
}

inline std::optional<Usage> usage_from_json(const nlohmann::json& j) {
  if (!j.is_object()) return std::nullopt;
  return Usage{j.value("prompt_tokens", std::int64_t{0}), j.value("completion_tokens", std::int64_t{0})};
}

class ChatClient {
 public:
  virtual ~ChatClient() = default;
  virtual ChatResponse chat(const ChatRequest& req) = 0;
  virtual std::string identity() const = 0;
};

struct ProviderConfig {
  std::string name;
  std::string endpoint_url;  // full URL of the chat-completions endpoint
  std::string model;
  std::string api_key_env;
  double timeout_s = 120.0;
  int max_retries = 3;
  double backoff_initial_s = 1.0;
  double backoff_max_s = 30.0;
};

inline void to_json(nlohmann::json& j, const ProviderConfig& c) {
  j = {{"name", c.name},           {"endpoint_url", c.endpoint_url}, {"model", c.model},
       {"api_key_env", c.api_key_env}, {"timeout_s", c.timeout_s},      {"max_retries", c.max_retries}};
}

inline void from_json(const nlohmann::json& j, ProviderConfig& c) {
  for (const char* forbidden : {"api_key", "key", "token"})
    if (j.contains(forbidden))
      fail(errc::invalid_argument, std::string("provider config must name an environment variable, not carry '") +
                                       forbidden + "'");
  c.name = j.value("name", std::string{});
  c.endpoint_url = j.at("endpoint_url").get<std::string>();
  c.model = j.at("model").get<std::string>();
  c.api_key_env = j.at("api_key_env").get<std::string>();
  c.timeout_s = j.value("timeout_s", 120.0);
  c.max_retries = j.value("max_retries", 3);
  if (c.timeout_s <= 0 || c.max_retries < 0) fail(errc::invalid_argument, "invalid timeout_s or max_retries");
}

namespace detail {

struct Url {
  std::string scheme_host_port;
  std::string path;
};

inline Url split_url(const std::string& url) {
  const auto sep = url.find("://");
  if (sep == std::string::npos) fail(errc::invalid_argument, "endpoint_url needs a scheme: " + url);
  const auto slash = url.find('/', sep + 3);
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

}  // namespace detail

class HttpChatClient : public ChatClient {
 public:
  using Sleeper = std::function<void(double seconds)>;
  using Logger = std::function<void(const std::string&)>;

  explicit HttpChatClient(ProviderConfig cfg, Sleeper sleeper = {}, Logger log = {})
      : cfg_(std::move(cfg)), sleep_(std::move(sleeper)), log_(std::move(log)) {
    if (!sleep_)
      sleep_ = [](double s) { std::this_thread::sleep_for(std::chrono::duration<double>(s)); };
    if (!log_) log_ = [](const std::string& m) { std::cerr << m << '\n'; };
    url_ = detail::split_url(cfg_.endpoint_url);
  }

  std::string identity() const override { return cfg_.name + ":" + cfg_.model; }

  /// Retries spent by the most recent call on this thread.
  static int& last_retries() {
    thread_local int n = 0;
    return n;
  }

  ChatResponse chat(const ChatRequest& req) override {
    validate(req);
    const char* key = cfg_.api_key_env.empty() ? nullptr : std::getenv(cfg_.api_key_env.c_str());
    if (!key || !*key) fail(errc::auth_error, "environment variable '" + cfg_.api_key_env + "' is not set");

    ChatRequest effective = req;
    if (effective.model.empty()) effective.model = cfg_.model;
    const std::string body = request_body(effective).dump();

    using Clock = std::chrono::steady_clock;
    const auto deadline =
        Clock::now() + std::chrono::duration_cast<Clock::duration>(
                           std::chrono::duration<double>(cfg_.timeout_s * (cfg_.max_retries + 1)));
    auto remaining = [&] { return std::chrono::duration<double>(deadline - Clock::now()).count(); };

    last_retries() = 0;
    errc last_code = errc::transport_error;
    std::string last_msg;
    for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
      if (attempt > 0) {
        const double wait = std::min({cfg_.backoff_initial_s * std::pow(2.0, attempt - 1), cfg_.backoff_max_s,
                                      std::max(0.0, remaining())});
        log_(identity() + ": retry " + std::to_string(attempt) + "/" + std::to_string(cfg_.max_retries) + " after " +
             last_msg);
        sleep_(wait);
        last_retries() = attempt;
      }
      const double budget = std::min(cfg_.timeout_s, remaining());
      if (budget <= 0) break;

      httplib::Client cli(url_.scheme_host_port);
      const auto secs = static_cast<time_t>(budget);
      const auto usecs = static_cast<time_t>((budget - static_cast<double>(secs)) * 1e6);
      cli.set_connection_timeout(secs, usecs);
      cli.set_read_timeout(secs, usecs);
      cli.set_write_timeout(secs, usecs);
      httplib::Headers headers{{"Authorization", std::string("Bearer ") + key}};
      auto res = cli.Post(url_.path, headers, body, "application/json");

      if (!res) {
        last_code = errc::transport_error;
        last_msg = "transport error: " + httplib::to_string(res.error());
        continue;
      }
      if (res->status == 401 || res->status == 403)
        fail(errc::auth_error, identity() + ": HTTP " + std::to_string(res->status));
      if (res->status == 429) {
        last_code = errc::rate_limited;
        last_msg = "HTTP 429";
        continue;
      }
      if (res->status >= 500) {
        last_code = errc::transport_error;
        last_msg = "HTTP " + std::to_string(res->status);
        continue;
      }
      if (res->status != 200)
        fail(errc::transport_error, identity() + ": HTTP " + std::to_string(res->status) + ": " + res->body);
      return parse_completion(res->body);
    }
    fail(last_code, identity() + ": giving up after " + std::to_string(last_retries()) + " retries (" + last_msg + ")");
  }

  static ChatResponse parse_completion(const std::string& body) {
    auto j = nlohmann::json::parse(body, nullptr, false);
    if (j.is_discarded()) fail(errc::transport_error, "provider returned invalid JSON");
    if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty())
      fail(errc::provider_refusal, "provider returned no choices");
    const auto& choice = j["choices"][0];
    const auto finish = choice.value("finish_reason", std::string{});
    const auto* content = choice.contains("message") ? &choice["message"] : nullptr;
    std::string text;
    if (content && content->contains("content") && (*content)["content"].is_string())
      text = (*content)["content"].get<std::string>();
    if (text.empty() || finish == "content_filter")
      fail(errc::provider_refusal, "provider returned empty or filtered content");
    ChatResponse out;
    out.text = std::move(text);
    if (j.contains("usage")) out.usage = usage_from_json(j["usage"]);
    out.provider_meta = {{"finish_reason", finish}};
    if (j.contains("id") && j["id"].is_string()) out.provider_meta["id"] = j["id"];
    return out;
  }

 private:
  ProviderConfig cfg_;
  Sleeper sleep_;
  Logger log_;
  detail::Url url_;
};

struct SessionRecord {
  std::string request_digest;  // empty: not checked on replay
  std::string response_text;
  std::optional<Usage> usage;
};

inline std::string to_jsonl(const SessionRecord& r) {
  return nlohmann::json{{"request_digest", r.request_digest},
                        {"response_text", r.response_text},
                        {"usage", usage_json(r.usage)}}
      .dump();
}

/// Single consumer.
class ReplaySession {
 public:
  ReplaySession() = default;
  explicit ReplaySession(std::vector<SessionRecord> records, bool strict = true)
      : records_(std::move(records)), strict_(strict) {}

  static ReplaySession load(const std::filesystem::path& path, bool strict = true) {
    std::ifstream in(path);
    if (!in) fail(errc::io_error, "cannot open session " + path.string());
    std::vector<SessionRecord> recs;
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      const auto j = nlohmann::json::parse(line);
      recs.push_back({j.value("request_digest", std::string{}), j.at("response_text").get<std::string>(),
                      usage_from_json(j.value("usage", nlohmann::json{}))});
    }
    return ReplaySession(std::move(recs), strict);
  }

  ChatResponse next(const ChatRequest& req) {
    validate(req);
    if (cursor_ >= records_.size())
      fail(errc::session_exhausted, "replay session exhausted after " + std::to_string(records_.size()) + " responses");
    const auto& rec = records_[cursor_];
    if (strict_ && !rec.request_digest.empty()) {
      const auto got = request_digest(req);
      if (got != rec.request_digest)
        fail(errc::digest_mismatch, "request " + std::to_string(cursor_) + " digest " + got + " != recorded " +
                                        rec.request_digest);
    }
    ChatResponse out{rec.response_text, rec.usage, {{"replay_index", cursor_}}};
    ++cursor_;
    return out;
  }

  std::size_t cursor() const { return cursor_; }
  std::size_t size() const { return records_.size(); }
  bool strict() const { return strict_; }

 private:
  std::vector<SessionRecord> records_;
  std::size_t cursor_ = 0;
  bool strict_ = true;
};

class ReplayClient : public ChatClient {
 public:
  explicit ReplayClient(ReplaySession session, std::string name = "replay")
      : session_(std::move(session)), name_(std::move(name)) {}
  ChatResponse chat(const ChatRequest& req) override { return session_.next(req); }
  std::string identity() const override { return name_; }
  const ReplaySession& session() const { return session_; }

 private:
  ReplaySession session_;
  std::string name_;
};

/// Appends {request_digest, response_text, usage} per successful exchange.
class RecordingClient : public ChatClient {
 public:
  RecordingClient(std::shared_ptr<ChatClient> inner, const std::filesystem::path& path)
      : inner_(std::move(inner)), out_(path, std::ios::app) {
    if (!out_) fail(errc::io_error, "cannot open session record " + path.string());
  }

  ChatResponse chat(const ChatRequest& req) override {
    auto resp = inner_->chat(req);
    const SessionRecord rec{request_digest(req), resp.text, resp.usage};
    std::lock_guard lock(mu_);
    out_ << to_jsonl(rec) << '\n' << std::flush;
    return resp;
  }

  std::string identity() const override { return inner_->identity(); }

 private:
  std::shared_ptr<ChatClient> inner_;
  std::mutex mu_;
  std::ofstream out_;
};

}  // namespace bag::llm
