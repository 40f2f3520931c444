// Copyright 2026 The qselect Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdlib>

#include "httplib.h"
#include "qselect/llm_backend.hpp"

namespace qselect {

LiveConfig live_config_from_env() {
  LiveConfig config;
  const char* key = std::getenv(std::string(kApiKeyEnv).c_str());
  if (key == nullptr || *key == '\0') {
    throw ConfigError("live backend requires the " + std::string(kApiKeyEnv) + " environment variable");
  }
  config.api_key = key;
  if (const char* base = std::getenv(std::string(kApiBaseEnv).c_str()); base != nullptr && *base != '\0') {
    config.base_url = base;
  }
  return config;
}

nlohmann::json completions_body(const CompletionRequest& request) {
  nlohmann::json body = {{"model", request.logical_model_id},
                         {"prompt", request.prefix},
                         {"temperature", request.temperature},
                         {"max_tokens", request.max_tokens}};
  if (request.suffix) body["suffix"] = *request.suffix;
  if (!request.stop_sequences.empty()) body["stop"] = request.stop_sequences;
  return body;
}

std::string parse_completions_response(std::string_view body) {
  nlohmann::json j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded()) throw BackendError(BackendErrorKind::malformed_response, "response is not JSON");
  if (!j.is_object() || !j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw BackendError(BackendErrorKind::malformed_response, "response has no choices");
  }
  const auto& choice = j["choices"][0];
  if (!choice.is_object() || !choice.contains("text") || !choice["text"].is_string()) {
    throw BackendError(BackendErrorKind::malformed_response, "choices[0].text missing");
  }
  return choice["text"].get<std::string>();
}

BackendErrorKind classify_http_status(int status) {
  if (status == 401 || status == 403) return BackendErrorKind::auth;
  if (status == 429) return BackendErrorKind::rate_limited;
  if (status >= 500 || status == 408) return BackendErrorKind::network;
  return BackendErrorKind::malformed_response;
}

std::string truncate_at_stop(std::string_view text, const std::vector<std::string>& stops) {
  std::size_t cut = text.size();
  for (const auto& stop : stops) {
    if (stop.empty()) continue;
    cut = std::min(cut, text.find(stop));
  }
  return std::string(text.substr(0, cut));
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {
  if (config_.api_key.empty()) throw ConfigError("live backend requires an API key");
  // Split "scheme://host[:port][/path]" into the client address and path prefix.
  const std::string& url = config_.base_url;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("API base URL must include a scheme: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  scheme_host_port_ = url.substr(0, path_start);
  path_prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
  while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
}

std::string LiveBackend::complete(const CompletionRequest& request, std::size_t /*sample_index*/) {
  request.validate();
  httplib::Client client(scheme_host_port_);
  client.set_connection_timeout(config_.timeout);
  client.set_read_timeout(config_.timeout);
  client.set_write_timeout(config_.timeout);
  const httplib::Headers headers = {{"Authorization", "Bearer " + config_.api_key}};
  const std::string body = completions_body(request).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace);
  auto result = client.Post(path_prefix_ + "/completions", headers, body, "application/json");
  if (!result) {
    throw BackendError(BackendErrorKind::network, "request failed: " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw BackendError(classify_http_status(result->status),
                       "HTTP " + std::to_string(result->status) + ": " + result->body.substr(0, 200));
  }
  return truncate_at_stop(parse_completions_response(result->body), request.stop_sequences);
}

}  // namespace qselect
