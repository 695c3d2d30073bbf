#pragma once

#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>

#include "sentidistill/common.hpp"
#include "sentidistill/io.hpp"

namespace sentidistill {

struct GenRequest {
  std::string request_id;
  std::string prompt;
  std::string model;
  int max_new_tokens = 512;
  double temperature = 0.0;
  std::string teacher_tag;
};

enum class GenStatus { ok, failed_after_retries, over_budget };
std::string_view to_string(GenStatus s);

struct GenResult {
  std::string request_id;
  GenStatus status = GenStatus::failed_after_retries;
  std::optional<std::string> text;  // present iff status == ok
  int attempts = 0;
  bool cached = false;
  std::string diagnostic;
};

json to_json(const GenResult& r);
GenResult gen_result_from_json(const json& j);

// What one attempt against the endpoint produced.
struct EndpointReply {
  enum class Kind { ok, transient, permanent };
  Kind kind = Kind::transient;
  std::string text;
  std::string diagnostic;
};

class Endpoint {
 public:
  virtual ~Endpoint() = default;
  // Must be safe to call from several threads at once.
  virtual EndpointReply complete(const GenRequest& request) = 0;
};

struct EndpointConfig {
  // Full URL of the chat-completions route,
  // e.g. http://localhost:8000/v1/chat/completions
  std::string url;
  std::string api_key;
  double timeout_seconds = 120.0;
};

// Chat-completions request body for one prompt.
json chat_request_body(const GenRequest& request);
// Classifies an HTTP reply. 408/429/5xx and unparseable bodies are transient;
// other 4xx are permanent.
EndpointReply parse_chat_response(int http_status, std::string_view body);

class ChatCompletionsEndpoint final : public Endpoint {
 public:
  explicit ChatCompletionsEndpoint(EndpointConfig config);
  EndpointReply complete(const GenRequest& request) override;

 private:
  EndpointConfig config_;
  std::string origin_;  // scheme://host[:port]
  std::string path_;
};

// SHA-256 over the canonical JSON of (model, prompt, temperature,
// max_new_tokens).
std::string cache_key(const GenRequest& request);
// Only deterministic decoding is served from or written to the cache.
bool is_cacheable(const GenRequest& request);

// Content-addressed completion cache stored as JSONL segments
// (segment-00000.jsonl, ...) under one directory. Safe for concurrent
// lookups and inserts.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir, std::size_t entries_per_segment = 10000);

  std::optional<std::string> lookup(const std::string& key) const;
  void store(const std::string& key, const GenRequest& request, const std::string& text);
  std::size_t size() const;

 private:
  void open_segment();

  std::filesystem::path dir_;
  std::size_t entries_per_segment_;
  mutable std::shared_mutex mu_;
  std::unordered_map<std::string, std::string> entries_;
  std::ofstream segment_;
  std::size_t segment_index_ = 0;
  std::size_t segment_count_ = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds base_backoff{500};
  std::chrono::milliseconds max_backoff{30000};
};

// Delay before attempt number `attempt` (1-based; attempt 1 has none).
std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt);

struct BatchOptions {
  std::size_t max_in_flight = 4;
  RetryPolicy retry;
  // Maximum number of non-cached requests sent to the endpoint.
  std::optional<std::size_t> budget;
  // Replaceable for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

struct BatchSummary {
  std::size_t requests = 0;
  std::size_t cached = 0;
  std::size_t issued = 0;  // non-cached requests sent (retries not counted)
  std::size_t ok = 0;
  std::size_t failed = 0;
  std::size_t over_budget = 0;
  std::size_t attempts = 0;  // endpoint calls including retries
};

json to_json(const BatchSummary& s);

// Runs every request, emitting one GenResult per request through `sink` in
// completion order (the sink is never called concurrently). Cache hits are
// resolved first; the budget is then assigned to the remaining requests in
// input order, so which requests go over budget does not depend on timing.
// At most max_in_flight endpoint calls are outstanding at any instant.
// Transient failures are retried with exponential backoff; a request that
// still fails ends as failed_after_retries and the batch carries on.
BatchSummary generate_batch(std::span<const GenRequest> requests, const BatchOptions& options,
                            Endpoint& endpoint, ResponseCache* cache,
                            const std::function<void(const GenResult&)>& sink);

}  // namespace sentidistill
