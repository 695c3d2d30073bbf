#include "sentidistill/llm_client.hpp"

#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <atomic>
#include <cstdio>
#include <mutex>
#include <thread>
#include <unordered_set>

namespace sentidistill {

std::string_view to_string(GenStatus s) {
  switch (s) {
    case GenStatus::ok: return "ok";
    case GenStatus::failed_after_retries: return "failed_after_retries";
    case GenStatus::over_budget: return "over_budget";
  }
  return "failed_after_retries";
}

json to_json(const GenResult& r) {
  json j{{"request_id", r.request_id},
         {"status", to_string(r.status)},
         {"attempts", r.attempts},
         {"cached", r.cached}};
  j["text"] = r.text ? json(*r.text) : json(nullptr);
  if (!r.diagnostic.empty()) j["diagnostic"] = r.diagnostic;
  return j;
}

GenResult gen_result_from_json(const json& j) {
  GenResult r;
  try {
    r.request_id = j.at("request_id").get<std::string>();
    std::string status = j.at("status").get<std::string>();
    if (status == "ok") {
      r.status = GenStatus::ok;
    } else if (status == "over_budget") {
      r.status = GenStatus::over_budget;
    } else if (status == "failed_after_retries") {
      r.status = GenStatus::failed_after_retries;
    } else {
      throw ValidationError("unknown generation status '" + status + "'");
    }
    if (j.contains("text") && j["text"].is_string()) r.text = j["text"].get<std::string>();
    r.attempts = j.value("attempts", 0);
    r.cached = j.value("cached", false);
    r.diagnostic = j.value("diagnostic", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed generation record: ") + e.what());
  }
  if ((r.status == GenStatus::ok) != r.text.has_value()) {
    throw ValidationError("generation record " + r.request_id + ": text must be present iff ok");
  }
  return r;
}

json chat_request_body(const GenRequest& request) {
  return json{{"model", request.model},
              {"messages", json::array({json{{"role", "user"}, {"content", request.prompt}}})},
              {"temperature", request.temperature},
              {"max_tokens", request.max_new_tokens}};
}

EndpointReply parse_chat_response(int http_status, std::string_view body) {
  EndpointReply reply;
  if (http_status != 200) {
    bool transient = http_status == 408 || http_status == 429 || http_status >= 500;
    reply.kind = transient ? EndpointReply::Kind::transient : EndpointReply::Kind::permanent;
    reply.diagnostic = "HTTP " + std::to_string(http_status) + ": " +
                       std::string(body.substr(0, std::min<std::size_t>(body.size(), 200)));
    return reply;
  }
  try {
    json j = json::parse(body);
    const json& content = j.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw std::runtime_error("content is not a string");
    reply.kind = EndpointReply::Kind::ok;
    reply.text = content.get<std::string>();
  } catch (const std::exception& e) {
    reply.kind = EndpointReply::Kind::transient;
    reply.diagnostic = std::string("malformed response: ") + e.what();
  }
  return reply;
}

ChatCompletionsEndpoint::ChatCompletionsEndpoint(EndpointConfig config) : config_(std::move(config)) {
  std::size_t scheme = config_.url.find("://");
  if (scheme == std::string::npos) throw ValidationError("endpoint URL needs a scheme: " + config_.url);
  std::size_t slash = config_.url.find('/', scheme + 3);
  origin_ = config_.url.substr(0, slash);
  path_ = slash == std::string::npos ? "/v1/chat/completions" : config_.url.substr(slash);
}

EndpointReply ChatCompletionsEndpoint::complete(const GenRequest& request) {
  httplib::Client client(origin_);
  auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  client.set_connection_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  client.set_read_timeout(std::chrono::duration_cast<std::chrono::microseconds>(timeout));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);
  auto res = client.Post(path_, headers, chat_request_body(request).dump(), "application/json");
  if (!res) {
    return EndpointReply{EndpointReply::Kind::transient, {},
                         "connection error: " + httplib::to_string(res.error())};
  }
  return parse_chat_response(res->status, res->body);
}

std::string cache_key(const GenRequest& request) {
  json j{{"model", request.model},
         {"prompt", request.prompt},
         {"temperature", request.temperature},
         {"max_new_tokens", request.max_new_tokens}};
  return sha256_hex(j.dump(-1, ' ', false, json::error_handler_t::replace));
}

bool is_cacheable(const GenRequest& request) {
  return request.temperature == 0.0;
}

ResponseCache::ResponseCache(std::filesystem::path dir, std::size_t entries_per_segment)
    : dir_(std::move(dir)), entries_per_segment_(std::max<std::size_t>(1, entries_per_segment)) {
  std::filesystem::create_directories(dir_);
  std::vector<std::filesystem::path> segments;
  for (const auto& entry : std::filesystem::directory_iterator(dir_)) {
    auto name = entry.path().filename().string();
    if (name.rfind("segment-", 0) == 0 && entry.path().extension() == ".jsonl") {
      segments.push_back(entry.path());
    }
  }
  std::sort(segments.begin(), segments.end());
  for (const auto& seg : segments) {
    read_jsonl(seg, [&](const json& j, std::size_t) {
      entries_.emplace(j.at("key").get<std::string>(), j.at("text").get<std::string>());
    });
  }
  segment_index_ = segments.size();
}

void ResponseCache::open_segment() {
  char name[32];
  std::snprintf(name, sizeof name, "segment-%05zu.jsonl", segment_index_++);
  segment_.close();
  segment_.open(dir_ / name, std::ios::binary | std::ios::app);
  if (!segment_) throw ValidationError("cannot write cache segment in " + dir_.string());
  segment_count_ = 0;
}

std::optional<std::string> ResponseCache::lookup(const std::string& key) const {
  std::shared_lock lock(mu_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void ResponseCache::store(const std::string& key, const GenRequest& request,
                          const std::string& text) {
  std::unique_lock lock(mu_);
  if (!entries_.emplace(key, text).second) return;
  if (!segment_.is_open() || segment_count_ >= entries_per_segment_) open_segment();
  json line{{"key", key}, {"model", request.model}, {"text", text}};
  segment_ << line.dump(-1, ' ', false, json::error_handler_t::replace) << '\n';
  segment_.flush();
  ++segment_count_;
}

std::size_t ResponseCache::size() const {
  std::shared_lock lock(mu_);
  return entries_.size();
}

std::chrono::milliseconds backoff_delay(const RetryPolicy& policy, int attempt) {
  if (attempt <= 1) return std::chrono::milliseconds(0);
  auto delay = policy.base_backoff;
  for (int i = 2; i < attempt && delay < policy.max_backoff; ++i) delay *= 2;
  return std::min(delay, policy.max_backoff);
}

json to_json(const BatchSummary& s) {
  return json{{"requests", s.requests}, {"cached", s.cached},   {"issued", s.issued},
              {"ok", s.ok},             {"failed", s.failed},   {"over_budget", s.over_budget},
              {"attempts", s.attempts}};
}

BatchSummary generate_batch(std::span<const GenRequest> requests, const BatchOptions& options,
                            Endpoint& endpoint, ResponseCache* cache,
                            const std::function<void(const GenResult&)>& sink) {
  if (options.max_in_flight < 1) throw ValidationError("max_in_flight must be at least 1");
  if (options.retry.max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
  {
    std::unordered_set<std::string_view> ids;
    for (const auto& r : requests) {
      if (!ids.insert(r.request_id).second) {
        throw ValidationError("duplicate request_id '" + r.request_id + "' in batch");
      }
      if (r.max_new_tokens <= 0) {
        throw ValidationError("request " + r.request_id + ": max_new_tokens must be positive");
      }
      if (r.temperature < 0) {
        throw ValidationError("request " + r.request_id + ": temperature must be non-negative");
      }
    }
  }

  BatchSummary summary;
  summary.requests = requests.size();
  std::mutex sink_mu;
  auto emit = [&](const GenResult& r) {
    std::lock_guard lock(sink_mu);
    switch (r.status) {
      case GenStatus::ok: ++summary.ok; break;
      case GenStatus::failed_after_retries: ++summary.failed; break;
      case GenStatus::over_budget: ++summary.over_budget; break;
    }
    if (r.cached) ++summary.cached;
    sink(r);
  };

  std::vector<const GenRequest*> dispatch;
  for (const auto& req : requests) {
    if (cache && is_cacheable(req)) {
      if (auto hit = cache->lookup(cache_key(req))) {
        emit(GenResult{req.request_id, GenStatus::ok, std::move(*hit), 0, true, {}});
        continue;
      }
    }
    if (options.budget && dispatch.size() >= *options.budget) {
      emit(GenResult{req.request_id, GenStatus::over_budget, std::nullopt, 0, false,
                     "budget of " + std::to_string(*options.budget) + " requests exhausted"});
      continue;
    }
    dispatch.push_back(&req);
  }
  summary.issued = dispatch.size();
  if (dispatch.empty()) return summary;

  auto sleep = options.sleep ? options.sleep
                             : [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> attempts{0};
  auto worker = [&] {
    for (;;) {
      std::size_t idx = next.fetch_add(1);
      if (idx >= dispatch.size()) return;
      const GenRequest& req = *dispatch[idx];
      GenResult result{req.request_id, GenStatus::failed_after_retries, std::nullopt, 0, false, {}};
      for (int attempt = 1; attempt <= options.retry.max_attempts; ++attempt) {
        if (attempt > 1) sleep(backoff_delay(options.retry, attempt));
        result.attempts = attempt;
        attempts.fetch_add(1);
        EndpointReply reply;
        try {
          reply = endpoint.complete(req);
        } catch (const std::exception& e) {
          reply = EndpointReply{EndpointReply::Kind::transient, {}, e.what()};
        }
        if (reply.kind == EndpointReply::Kind::ok) {
          result.status = GenStatus::ok;
          result.text = std::move(reply.text);
          result.diagnostic.clear();
          break;
        }
        result.diagnostic = std::move(reply.diagnostic);
        if (reply.kind == EndpointReply::Kind::permanent) break;
      }
      if (result.status == GenStatus::ok && cache && is_cacheable(req)) {
        cache->store(cache_key(req), req, *result.text);
      }
      emit(result);
    }
  };

  std::size_t n_workers = std::min(options.max_in_flight, dispatch.size());
  std::vector<std::thread> workers;
  workers.reserve(n_workers);
  for (std::size_t i = 0; i < n_workers; ++i) workers.emplace_back(worker);
  for (auto& t : workers) t.join();
  summary.attempts = attempts.load();
  return summary;
}

}  // namespace sentidistill
