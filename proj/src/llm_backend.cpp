// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include "qselect/llm_backend.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <sstream>
#include <thread>

namespace qselect {

namespace {

std::string normalize_newlines(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\r') {
      out += '\n';
      if (i + 1 < text.size() && text[i + 1] == '\n') ++i;
    } else {
      out += text[i];
    }
  }
  return out;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw InvariantBreach("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

void default_sleep(std::chrono::milliseconds d) { std::this_thread::sleep_for(d); }

bool is_hex_fingerprint(std::string_view s) {
  return s.size() == 64 && std::all_of(s.begin(), s.end(), [](char c) {
           return (c >= '0' && c <= '9') || (c >= 'a' && c <= 'f');
         });
}

}  // namespace

void CompletionRequest::validate() const {
  if (prefix.empty()) throw InvalidArgument("completion prefix must be non-empty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    throw InvalidArgument("temperature must lie in [0, 2]");
  }
  if (max_tokens <= 0) throw InvalidArgument("max_tokens must be positive");
  if (stop_sequences.size() > 4) throw InvalidArgument("at most 4 stop sequences are allowed");
}

nlohmann::json canonical_json(const CompletionRequest& request) {
  nlohmann::json stops = nlohmann::json::array();
  for (const auto& s : request.stop_sequences) stops.push_back(normalize_newlines(s));
  // nlohmann::json objects keep keys sorted, which fixes the field order.
  return {{"prefix", normalize_newlines(request.prefix)},
          {"suffix", request.suffix ? nlohmann::json(normalize_newlines(*request.suffix)) : nlohmann::json()},
          {"temperature", request.temperature},
          {"max_tokens", request.max_tokens},
          {"stop_sequences", stops},
          {"logical_model_id", request.logical_model_id}};
}

std::string fingerprint(const CompletionRequest& request, std::size_t sample_index) {
  const nlohmann::json keyed = {{"request", canonical_json(request)}, {"sample_index", sample_index}};
  return sha256_hex(keyed.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace));
}

std::string_view to_string(BackendKind kind) {
  switch (kind) {
    case BackendKind::live:
      return "live";
    case BackendKind::replay:
      return "replay";
    case BackendKind::scripted:
      return "scripted";
  }
  return "live";
}

BackendKind parse_backend_kind(std::string_view text) {
  if (text == "live") return BackendKind::live;
  if (text == "replay") return BackendKind::replay;
  if (text == "scripted") return BackendKind::scripted;
  throw FormatError("unknown backend kind '" + std::string(text) + "'");
}

nlohmann::json to_json(const CompletionRecord& r) {
  return {{"fingerprint", r.fingerprint},     {"request", r.request},       {"sample_index", r.sample_index},
          {"response_text", r.response_text}, {"created_at", r.created_at}, {"backend", std::string(to_string(r.backend))}};
}

CompletionRecord record_from_json(const nlohmann::json& j) {
  try {
    CompletionRecord r;
    r.fingerprint = j.at("fingerprint").get<std::string>();
    r.request = j.at("request");
    r.sample_index = j.at("sample_index").get<std::size_t>();
    r.response_text = j.at("response_text").get<std::string>();
    r.created_at = j.value("created_at", "");
    r.backend = parse_backend_kind(j.value("backend", "live"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed completion record: ") + e.what());
  }
}

std::string_view to_string(BackendErrorKind kind) {
  switch (kind) {
    case BackendErrorKind::network:
      return "network";
    case BackendErrorKind::rate_limited:
      return "rate_limited";
    case BackendErrorKind::auth:
      return "auth";
    case BackendErrorKind::malformed_response:
      return "malformed_response";
    case BackendErrorKind::cache_miss_in_replay_only_mode:
      return "cache_miss_in_replay_only_mode";
  }
  return "unknown";
}

BackendError::BackendError(BackendErrorKind kind, std::string detail, bool retryable)
    : Error(std::string(to_string(kind)) + ": " + detail),
      kind_(kind),
      retryable_(retryable || kind == BackendErrorKind::network || kind == BackendErrorKind::rate_limited),
      detail_(std::move(detail)) {}

// ScriptedBackend

void ScriptedBackend::set_response(std::string fp, std::string text) {
  std::lock_guard lock(mu_);
  responses_[std::move(fp)] = std::move(text);
}

void ScriptedBackend::set_response(const CompletionRequest& request, std::size_t sample_index, std::string text) {
  set_response(fingerprint(request, sample_index), std::move(text));
}

void ScriptedBackend::add_responder(Responder responder) {
  std::lock_guard lock(mu_);
  responders_.push_back(std::move(responder));
}

void ScriptedBackend::add_rule(std::string prefix_substring, std::string response) {
  std::lock_guard lock(mu_);
  rules_.emplace_back(std::move(prefix_substring), std::move(response));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scripted response file " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  auto backend = std::make_shared<ScriptedBackend>();
  try {
    if (j.contains("responses")) {
      for (const auto& [fp, text] : j.at("responses").items()) backend->set_response(fp, text.get<std::string>());
    }
    if (j.contains("rules")) {
      for (const auto& rule : j.at("rules")) {
        backend->add_rule(rule.at("contains").get<std::string>(), rule.at("response").get<std::string>());
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return backend;
}

std::string ScriptedBackend::complete(const CompletionRequest& request, std::size_t sample_index) {
  request.validate();
  ++calls_;
  const std::string fp = fingerprint(request, sample_index);
  std::vector<Responder> responders;
  {
    std::lock_guard lock(mu_);
    if (auto it = responses_.find(fp); it != responses_.end()) return it->second;
    responders = responders_;
  }
  for (const auto& r : responders) {
    if (auto text = r(request, sample_index)) return *text;
  }
  {
    std::lock_guard lock(mu_);
    for (const auto& [needle, response] : rules_) {
      if (request.prefix.find(needle) != std::string::npos) return response;
    }
  }
  throw BackendError(BackendErrorKind::cache_miss_in_replay_only_mode, "no scripted response for " + fp);
}

// ReplayStore

ReplayStore::ReplayStore(std::filesystem::path dir, bool create) : dir_(std::move(dir)) {
  std::error_code ec;
  if (std::filesystem::is_directory(dir_, ec)) return;
  if (!create) throw ConfigError("cache directory " + dir_.string() + " does not exist");
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw ConfigError("cannot create cache directory " + dir_.string() + ": " + ec.message());
}

std::filesystem::path ReplayStore::path_for(const std::string& fp) const {
  if (!is_hex_fingerprint(fp)) throw InvalidArgument("malformed fingerprint '" + fp + "'");
  return dir_ / (fp + ".json");
}

std::optional<CompletionRecord> ReplayStore::lookup(const std::string& fp) const {
  std::lock_guard lock(mu_);
  return lookup_locked(fp);
}

std::optional<CompletionRecord> ReplayStore::lookup_locked(const std::string& fp) const {
  if (auto it = memo_.find(fp); it != memo_.end()) return it->second;
  const auto path = path_for(fp);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  CompletionRecord record = record_from_json(j);
  if (record.fingerprint != fp) throw FormatError(path.string() + ": fingerprint does not match file name");
  memo_.emplace(fp, record);
  return record;
}

void ReplayStore::put(const CompletionRecord& record) {
  const auto path = path_for(record.fingerprint);
  std::lock_guard lock(mu_);
  if (auto existing = lookup_locked(record.fingerprint)) {
    if (existing->response_text != record.response_text) {
      throw CacheConflict("cache record " + record.fingerprint + " already holds a different response");
    }
    return;
  }
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write cache record " + tmp);
    out << to_json(record).dump(2, ' ', false, nlohmann::json::error_handler_t::replace) << '\n';
    if (!out) throw ConfigError("failed writing cache record " + tmp);
  }
  std::filesystem::rename(tmp, path);
  memo_.emplace(record.fingerprint, record);
}

ReplayStore::Stats ReplayStore::stats() const {
  Stats s;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".json") continue;
    const std::string stem = entry.path().stem().string();
    if (!is_hex_fingerprint(stem)) continue;
    const auto record = lookup(stem);
    if (!record) continue;
    ++s.records;
    s.bytes += static_cast<std::size_t>(entry.file_size());
    ++s.by_backend[std::string(to_string(record->backend))];
  }
  return s;
}

// CachingBackend

CachingBackend::CachingBackend(std::shared_ptr<ReplayStore> store, CacheMode mode,
                               std::shared_ptr<CompletionBackend> inner, Clock clock)
    : store_(std::move(store)), mode_(mode), inner_(std::move(inner)), clock_(std::move(clock)) {
  if (!store_) throw InvalidArgument("caching backend needs a store");
  if (mode_ == CacheMode::record && !inner_) throw InvalidArgument("record mode needs an inner backend");
  if (mode_ == CacheMode::replay) inner_.reset();
  if (!clock_) clock_ = utc_timestamp_now;
}

std::string CachingBackend::complete(const CompletionRequest& request, std::size_t sample_index) {
  request.validate();
  const std::string fp = fingerprint(request, sample_index);
  if (auto record = store_->lookup(fp)) {
    ++hits_;
    return record->response_text;
  }
  ++misses_;
  if (mode_ == CacheMode::replay) {
    throw BackendError(BackendErrorKind::cache_miss_in_replay_only_mode,
                       "no cached record for " + fp + " in " + store_->dir().string());
  }
  std::string text = inner_->complete(request, sample_index);
  CompletionRecord record;
  record.fingerprint = fp;
  record.request = canonical_json(request);
  record.sample_index = sample_index;
  record.response_text = text;
  record.created_at = clock_();
  record.backend = inner_->kind();
  store_->put(record);
  return text;
}

// RetryingBackend

std::chrono::milliseconds RetryPolicy::backoff_for(int attempt) const {
  const double scaled = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt);
  const double capped = std::min(scaled, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(capped));
}

RetryingBackend::RetryingBackend(std::shared_ptr<CompletionBackend> inner, RetryPolicy policy, Sleeper sleeper)
    : inner_(std::move(inner)), policy_(policy), sleeper_(std::move(sleeper)) {
  if (!inner_) throw InvalidArgument("retrying backend needs an inner backend");
  if (policy_.max_attempts < 1) throw InvalidArgument("retry policy needs at least one attempt");
  if (!sleeper_) sleeper_ = default_sleep;
}

std::string RetryingBackend::complete(const CompletionRequest& request, std::size_t sample_index) {
  for (int attempt = 0;; ++attempt) {
    try {
      return inner_->complete(request, sample_index);
    } catch (const BackendError& e) {
      if (!e.retryable() || attempt + 1 >= policy_.max_attempts) throw;
      sleeper_(policy_.backoff_for(attempt));
    }
  }
}

// TokenBucket

TokenBucket::TokenBucket(double per_minute, double burst, Clock clock, Sleeper sleeper)
    : per_second_(per_minute / 60.0), burst_(burst), tokens_(burst), clock_(std::move(clock)), sleeper_(std::move(sleeper)) {
  if (!(per_minute > 0.0)) throw InvalidArgument("rate limit must be positive");
  if (!(burst >= 1.0)) throw InvalidArgument("token bucket burst must be >= 1");
  if (!clock_) clock_ = [] { return std::chrono::steady_clock::now(); };
  if (!sleeper_) sleeper_ = default_sleep;
  last_ = clock_();
}

void TokenBucket::refill_locked() {
  const auto now = clock_();
  const double elapsed = std::chrono::duration<double>(now - last_).count();
  if (elapsed > 0) {
    tokens_ = std::min(burst_, tokens_ + elapsed * per_second_);
    last_ = now;
  }
}

bool TokenBucket::try_acquire() {
  std::lock_guard lock(mu_);
  refill_locked();
  if (tokens_ >= 1.0) {
    tokens_ -= 1.0;
    return true;
  }
  return false;
}

void TokenBucket::acquire() {
  for (;;) {
    std::chrono::milliseconds wait{0};
    {
      std::lock_guard lock(mu_);
      refill_locked();
      if (tokens_ >= 1.0) {
        tokens_ -= 1.0;
        return;
      }
      const double seconds = (1.0 - tokens_) / per_second_;
      wait = std::chrono::milliseconds(static_cast<long long>(std::ceil(seconds * 1000.0)));
    }
    sleeper_(std::max(wait, std::chrono::milliseconds(1)));
  }
}

RateLimitedBackend::RateLimitedBackend(std::shared_ptr<CompletionBackend> inner, std::shared_ptr<TokenBucket> bucket)
    : inner_(std::move(inner)), bucket_(std::move(bucket)) {
  if (!inner_ || !bucket_) throw InvalidArgument("rate-limited backend needs an inner backend and a bucket");
}

std::string RateLimitedBackend::complete(const CompletionRequest& request, std::size_t sample_index) {
  bucket_->acquire();
  return inner_->complete(request, sample_index);
}

std::string utc_timestamp_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace qselect
