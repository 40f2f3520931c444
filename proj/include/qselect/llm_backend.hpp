// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "qselect/errors.hpp"

namespace qselect {

inline constexpr std::string_view kDefaultModelId = "text-davinci-002";

/// One completion call. `suffix` selects insert-mode generation.
struct CompletionRequest {
  std::string prefix;
  std::optional<std::string> suffix;
  double temperature = 0.0;
  int max_tokens = 64;
  std::vector<std::string> stop_sequences;
  std::string logical_model_id{kDefaultModelId};

  /// Throws InvalidArgument on an empty prefix, temperature outside [0, 2],
  /// non-positive max_tokens, or more than four stop sequences.
  void validate() const;
};

/// Canonical form of a request: sorted keys, "\n" line endings.
nlohmann::json canonical_json(const CompletionRequest& request);

/// SHA-256 (hex, 64 chars) of the canonical request plus the sample index.
std::string fingerprint(const CompletionRequest& request, std::size_t sample_index);

enum class BackendKind { live, replay, scripted };

std::string_view to_string(BackendKind kind);
BackendKind parse_backend_kind(std::string_view text);

struct CompletionRecord {
  std::string fingerprint;
  nlohmann::json request;
  std::size_t sample_index = 0;
  std::string response_text;
  std::string created_at;
  BackendKind backend = BackendKind::live;
};

nlohmann::json to_json(const CompletionRecord& record);
CompletionRecord record_from_json(const nlohmann::json& j);

enum class BackendErrorKind { network, rate_limited, auth, malformed_response, cache_miss_in_replay_only_mode };

std::string_view to_string(BackendErrorKind kind);

class BackendError : public Error {
 public:
  BackendError(BackendErrorKind kind, std::string detail, bool retryable = false);

  BackendErrorKind kind() const { return kind_; }
  bool retryable() const { return retryable_; }
  const std::string& detail() const { return detail_; }

 private:
  BackendErrorKind kind_;
  bool retryable_;
  std::string detail_;
};

/// The replay store already holds different text for a fingerprint.
class CacheConflict : public Error {
 public:
  using Error::Error;
};

/// Uniform completion interface. Implementations are safe for concurrent use.
class CompletionBackend {
 public:
  virtual ~CompletionBackend() = default;
  virtual std::string complete(const CompletionRequest& request, std::size_t sample_index) = 0;
  virtual BackendKind kind() const = 0;
};

/// Deterministic backend for tests and fixtures. Lookup order: exact
/// fingerprint entries, then responders in insertion order, then substring
/// rules on the prefix. A request nothing answers is a cache miss.
class ScriptedBackend final : public CompletionBackend {
 public:
  using Responder = std::function<std::optional<std::string>(const CompletionRequest&, std::size_t)>;

  void set_response(std::string fingerprint, std::string text);
  void set_response(const CompletionRequest& request, std::size_t sample_index, std::string text);
  void add_responder(Responder responder);
  void add_rule(std::string prefix_substring, std::string response);

  /// Loads {"responses": {fingerprint: text}, "rules": [{"contains", "response"}]}.
  static std::shared_ptr<ScriptedBackend> from_file(const std::filesystem::path& path);

  std::string complete(const CompletionRequest& request, std::size_t sample_index) override;
  BackendKind kind() const override { return BackendKind::scripted; }

  std::size_t call_count() const { return calls_.load(); }

 private:
  mutable std::mutex mu_;
  std::map<std::string, std::string> responses_;
  std::vector<Responder> responders_;
  std::vector<std::pair<std::string, std::string>> rules_;
  std::atomic<std::size_t> calls_{0};
};

/// Append-only directory of completion records, one "<fingerprint>.json"
/// file per record. Writes are serialized; a record is never overwritten
/// with different text.
class ReplayStore {
 public:
  /// With `create`, the directory is created when missing; otherwise a
  /// missing directory is a ConfigError.
  ReplayStore(std::filesystem::path dir, bool create);

  std::optional<CompletionRecord> lookup(const std::string& fingerprint) const;
  /// Throws CacheConflict when a different response is already stored.
  void put(const CompletionRecord& record);

  struct Stats {
    std::size_t records = 0;
    std::size_t bytes = 0;
    std::map<std::string, std::size_t> by_backend;
  };
  Stats stats() const;

  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path path_for(const std::string& fingerprint) const;
  std::optional<CompletionRecord> lookup_locked(const std::string& fingerprint) const;

  std::filesystem::path dir_;
  mutable std::mutex mu_;
  mutable std::map<std::string, CompletionRecord> memo_;
};

enum class CacheMode { record, replay };

/// Record mode answers from the store when possible and otherwise asks the
/// inner backend and persists the result. Replay mode never touches an inner
/// backend; a miss is BackendErrorKind::cache_miss_in_replay_only_mode.
class CachingBackend final : public CompletionBackend {
 public:
  using Clock = std::function<std::string()>;

  CachingBackend(std::shared_ptr<ReplayStore> store, CacheMode mode,
                 std::shared_ptr<CompletionBackend> inner = nullptr, Clock clock = {});

  std::string complete(const CompletionRequest& request, std::size_t sample_index) override;
  BackendKind kind() const override { return BackendKind::replay; }

  std::size_t hits() const { return hits_.load(); }
  std::size_t misses() const { return misses_.load(); }

 private:
  std::shared_ptr<ReplayStore> store_;
  CacheMode mode_;
  std::shared_ptr<CompletionBackend> inner_;
  Clock clock_;
  std::atomic<std::size_t> hits_{0};
  std::atomic<std::size_t> misses_{0};
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{30000};

  std::chrono::milliseconds backoff_for(int attempt) const;
};

using Sleeper = std::function<void(std::chrono::milliseconds)>;

/// Retries retryable BackendErrors with exponential backoff; anything else
/// surfaces on the first failure.
class RetryingBackend final : public CompletionBackend {
 public:
  RetryingBackend(std::shared_ptr<CompletionBackend> inner, RetryPolicy policy, Sleeper sleeper = {});

  std::string complete(const CompletionRequest& request, std::size_t sample_index) override;
  BackendKind kind() const override { return inner_->kind(); }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  RetryPolicy policy_;
  Sleeper sleeper_;
};

/// Token bucket refilled continuously at `per_minute` tokens per minute.
class TokenBucket {
 public:
  using Clock = std::function<std::chrono::steady_clock::time_point()>;

  explicit TokenBucket(double per_minute, double burst = 1.0, Clock clock = {}, Sleeper sleeper = {});

  /// Blocks until a token is available, then takes it.
  void acquire();
  /// Takes a token if one is available right now.
  bool try_acquire();

 private:
  void refill_locked();

  double per_second_;
  double burst_;
  double tokens_;
  Clock clock_;
  Sleeper sleeper_;
  std::chrono::steady_clock::time_point last_;
  std::mutex mu_;
};

class RateLimitedBackend final : public CompletionBackend {
 public:
  RateLimitedBackend(std::shared_ptr<CompletionBackend> inner, std::shared_ptr<TokenBucket> bucket);

  std::string complete(const CompletionRequest& request, std::size_t sample_index) override;
  BackendKind kind() const override { return inner_->kind(); }

 private:
  std::shared_ptr<CompletionBackend> inner_;
  std::shared_ptr<TokenBucket> bucket_;
};

inline constexpr std::string_view kApiKeyEnv = "QSELECT_API_KEY";
inline constexpr std::string_view kApiBaseEnv = "QSELECT_API_BASE";
inline constexpr std::string_view kDefaultApiBase = "https://api.openai.com/v1";

struct LiveConfig {
  std::string base_url{kDefaultApiBase};
  std::string api_key;
  std::chrono::seconds timeout{60};
};

/// Reads QSELECT_API_KEY (required) and QSELECT_API_BASE (optional).
LiveConfig live_config_from_env();

/// Completions-style JSON body {model, prompt, suffix?, temperature, max_tokens, stop}.
nlohmann::json completions_body(const CompletionRequest& request);
/// Extracts choices[0].text; throws BackendError(malformed_response).
std::string parse_completions_response(std::string_view body);
/// Maps a non-2xx HTTP status to an error kind.
BackendErrorKind classify_http_status(int status);
/// Cuts `text` at the earliest occurrence of any stop sequence.
std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops);

/// HTTP client for an OpenAI-compatible completions endpoint.
class LiveBackend final : public CompletionBackend {
 public:
  explicit LiveBackend(LiveConfig config);

  std::string complete(const CompletionRequest& request, std::size_t sample_index) override;
  BackendKind kind() const override { return BackendKind::live; }

 private:
  LiveConfig config_;
  std::string scheme_host_port_;
  std::string path_prefix_;
};

std::string utc_timestamp_now();

}  // namespace qselect
