#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentidistill/common.hpp"
#include "sentidistill/io.hpp"

namespace sentidistill {

struct RawReview {
  std::string id;
  std::string text;
  int stars = 0;
  Domain domain = Domain::restaurant;
  Source source = Source::yelp;

  friend bool operator==(const RawReview&, const RawReview&) = default;
};

json to_json(const RawReview& r);
// Throws ValidationError when stars fall outside [1,5] or the text is blank.
RawReview review_from_json(const json& j);

std::vector<RawReview> load_reviews(const std::filesystem::path& path);
void write_reviews(const std::filesystem::path& path, std::span<const RawReview> reviews);

// Per-star sampling weights, named "R" followed by one digit per star
// (1 through 5). R11111 keeps the pool's own proportions, R00100 keeps only
// 3-star reviews, R12421 favours mid-range ratings.
class SamplingScheme {
 public:
  explicit SamplingScheme(std::array<int, 5> weights);

  static SamplingScheme parse(std::string_view name);

  const std::array<int, 5>& weights() const { return weights_; }
  int weight(int stars) const { return weights_.at(static_cast<std::size_t>(stars - 1)); }
  std::string name() const;

 private:
  std::array<int, 5> weights_;
};

struct SampleResult {
  std::vector<RawReview> reviews;
  std::vector<std::string> warnings;
  std::size_t duplicates_removed = 0;
  // Distinct-text reviews whose star weight is non-zero.
  std::size_t eligible = 0;
};

// Weighted sampling of reviews by star rating.
//
// Without refill every eligible review draws a key log(u)/w, with u derived
// from (seed, review id), and the n largest keys win. This is successive
// weighted sampling without replacement: each draw picks a remaining review
// with probability proportional to its star weight, and exhausted strata
// simply stop competing. Keys depend only on the seed and the id, so the
// selected set does not depend on pool order.
//
// With refill, each draw picks a star stratum with probability proportional
// to weight * stratum size and takes the stratum's next unused review. A
// stratum that runs dry is reshuffled and reused, so star counts follow the
// multinomial with those probabilities exactly and reviews only repeat after
// their stratum has been exhausted.
//
// Texts are deduplicated (first occurrence wins) before any draw.
SampleResult stratified_sample(std::span<const RawReview> pool, const SamplingScheme& scheme,
                               std::size_t n, std::uint64_t seed, bool refill = false);

}  // namespace sentidistill
