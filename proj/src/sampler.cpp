#include "sentidistill/sampler.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <unordered_set>

namespace sentidistill {

json to_json(const RawReview& r) {
  return json{{"id", r.id},
              {"text", r.text},
              {"stars", r.stars},
              {"domain", to_string(r.domain)},
              {"source", to_string(r.source)}};
}

RawReview review_from_json(const json& j) {
  RawReview r;
  try {
    r.id = j.at("id").is_string() ? j.at("id").get<std::string>() : j.at("id").dump();
    r.text = j.at("text").get<std::string>();
    r.stars = j.at("stars").get<int>();
    r.domain = parse_domain(j.at("domain").get<std::string>());
    r.source = parse_source(j.at("source").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed review record: ") + e.what());
  }
  if (r.stars < 1 || r.stars > 5) {
    throw ValidationError("review " + r.id + ": stars must be in [1,5]");
  }
  if (trim(r.text).empty()) {
    throw ValidationError("review " + r.id + ": empty text");
  }
  return r;
}

std::vector<RawReview> load_reviews(const std::filesystem::path& path) {
  std::vector<RawReview> out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      out.push_back(review_from_json(j));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void write_reviews(const std::filesystem::path& path, std::span<const RawReview> reviews) {
  JsonlWriter w(path);
  for (const auto& r : reviews) w.write(to_json(r));
}

SamplingScheme::SamplingScheme(std::array<int, 5> weights) : weights_(weights) {
  bool any = false;
  for (int w : weights_) {
    if (w < 0 || w > 9) throw ValidationError("sampling weights must be single digits");
    any = any || w > 0;
  }
  if (!any) throw ValidationError("invalid sampling scheme: all weights are zero");
}

SamplingScheme SamplingScheme::parse(std::string_view name) {
  if (name.size() != 6 || (name[0] != 'R' && name[0] != 'r')) {
    throw ValidationError("invalid sampling scheme '" + std::string(name) +
                          "': expected R followed by five digits");
  }
  std::array<int, 5> w{};
  for (std::size_t i = 0; i < 5; ++i) {
    char c = name[i + 1];
    if (c < '0' || c > '9') {
      throw ValidationError("invalid sampling scheme '" + std::string(name) + "'");
    }
    w[i] = c - '0';
  }
  return SamplingScheme(w);
}

std::string SamplingScheme::name() const {
  std::string s = "R";
  for (int w : weights_) s.push_back(static_cast<char>('0' + w));
  return s;
}

namespace {

double review_uniform(std::uint64_t seed, std::string_view id, std::uint64_t epoch) {
  std::uint64_t h = splitmix64(seed ^ splitmix64(fnv1a64(id)) ^ splitmix64(epoch + 0x51ed27));
  return unit_interval(h);
}

struct Keyed {
  double key;
  const RawReview* review;
};

bool key_order(const Keyed& a, const Keyed& b) {
  if (a.key != b.key) return a.key > b.key;
  return a.review->id < b.review->id;
}

// Eligible reviews after text dedup, in pool order.
std::vector<const RawReview*> eligible_reviews(std::span<const RawReview> pool,
                                               const SamplingScheme& scheme,
                                               SampleResult& result) {
  std::unordered_set<std::string_view> ids;
  std::unordered_set<std::string_view> texts;
  std::vector<const RawReview*> out;
  for (const auto& r : pool) {
    if (!ids.insert(r.id).second) {
      throw ValidationError("duplicate review id '" + r.id + "' in pool");
    }
    if (!texts.insert(r.text).second) {
      ++result.duplicates_removed;
      continue;
    }
    if (r.stars < 1 || r.stars > 5) {
      throw ValidationError("review " + r.id + ": stars must be in [1,5]");
    }
    if (scheme.weight(r.stars) > 0) out.push_back(&r);
  }
  return out;
}

}  // namespace

SampleResult stratified_sample(std::span<const RawReview> pool, const SamplingScheme& scheme,
                               std::size_t n, std::uint64_t seed, bool refill) {
  SampleResult result;
  if (pool.empty()) {
    if (n > 0) result.warnings.push_back("empty pool: requested " + std::to_string(n) + " reviews");
    return result;
  }
  std::vector<const RawReview*> eligible = eligible_reviews(pool, scheme, result);
  result.eligible = eligible.size();
  if (n == 0) return result;
  if (eligible.empty()) {
    result.warnings.push_back("no review has a non-zero weight under " + scheme.name());
    return result;
  }

  if (!refill) {
    std::vector<Keyed> keyed;
    keyed.reserve(eligible.size());
    for (const RawReview* r : eligible) {
      double u = review_uniform(seed, r->id, 0);
      keyed.push_back({std::log(u) / scheme.weight(r->stars), r});
    }
    std::size_t k = std::min(n, keyed.size());
    if (k < n) {
      result.warnings.push_back("only " + std::to_string(k) + " eligible reviews for " +
                                std::to_string(n) + " requested");
    }
    std::partial_sort(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(k), keyed.end(),
                      key_order);
    result.reviews.reserve(k);
    for (std::size_t i = 0; i < k; ++i) result.reviews.push_back(*keyed[i].review);
    return result;
  }

  struct Stratum {
    std::vector<Keyed> order;
    std::size_t next = 0;
    std::uint64_t epoch = 0;
    double mass = 0.0;
  };
  std::array<Stratum, 5> strata;
  for (const RawReview* r : eligible) strata[static_cast<std::size_t>(r->stars - 1)].order.push_back({0.0, r});
  auto shuffle = [&](Stratum& s) {
    for (auto& item : s.order) item.key = review_uniform(seed, item.review->id, s.epoch);
    std::sort(s.order.begin(), s.order.end(), key_order);
    s.next = 0;
  };
  double total_mass = 0.0;
  for (std::size_t i = 0; i < 5; ++i) {
    auto& s = strata[i];
    if (s.order.empty()) continue;
    s.mass = static_cast<double>(scheme.weights()[i]) * static_cast<double>(s.order.size());
    total_mass += s.mass;
    shuffle(s);
  }

  std::mt19937_64 rng(seed);
  result.reviews.reserve(n);
  for (std::size_t draw = 0; draw < n; ++draw) {
    double target = unit_interval(rng()) * total_mass;
    std::size_t pick = 0;
    double acc = 0.0;
    for (std::size_t i = 0; i < 5; ++i) {
      if (strata[i].mass == 0.0) continue;
      pick = i;
      acc += strata[i].mass;
      if (target < acc) break;
    }
    Stratum& s = strata[pick];
    if (s.next == s.order.size()) {
      ++s.epoch;
      shuffle(s);
    }
    result.reviews.push_back(*s.order[s.next++].review);
  }
  return result;
}

}  // namespace sentidistill
