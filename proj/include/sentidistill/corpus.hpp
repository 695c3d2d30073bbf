#pragma once

#include <compare>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sentidistill/common.hpp"
#include "sentidistill/io.hpp"
#include "sentidistill/parser.hpp"

namespace sentidistill {

// anl: full analysis blocks; rw: rewritten review; anl_no_r: analysis without
// reasoning; anl_no_l: reasoning only; merged: anl and rw pairs together.
enum class Variant { anl, rw, anl_no_r, anl_no_l, merged };
std::string_view to_string(Variant v);
Variant parse_variant(std::string_view s);

// Parsed analysis of one review.
struct AnalysisRecord {
  std::string review_id;
  std::string review_text;
  std::string teacher;
  Source source = Source::yelp;
  std::vector<Quadruple> quads;
};

// Rewriting completion for one review.
struct RewriteRecord {
  std::string review_id;
  std::string review_text;
  std::string teacher;
  Source source = Source::yelp;
  std::string text;
};

// One seq2seq pretraining pair: input review x, understanding text u.
struct CorpusPair {
  std::string review_id;
  std::string x;
  std::string u;
  // Never `merged`: pairs in a merged corpus keep their anl/rw origin.
  Variant variant = Variant::anl;
  std::string teacher;
  Source source = Source::yelp;

  friend bool operator==(const CorpusPair&, const CorpusPair&) = default;
};

json to_json(const CorpusPair& p);
CorpusPair corpus_pair_from_json(const json& j);

// Pipeline-side length control. Lengths are estimated as whitespace tokens
// times `token_factor` (rounded up); the trainer does exact subword
// truncation later.
struct CorpusLimits {
  std::size_t max_input_tokens = 128;
  std::size_t max_output_tokens = 400;
  double token_factor = 1.3;
};

std::size_t approx_tokens(std::string_view text, double token_factor);
// Keeps the longest whitespace-token prefix whose estimate fits `cap`,
// preserving the original spacing. Returns true if anything was cut.
bool truncate_to_cap(std::string& text, std::size_t cap, double token_factor);

struct BuildReport {
  std::size_t emitted = 0;
  std::size_t truncated_x = 0;
  std::size_t truncated_u = 0;
  std::size_t skipped_no_analysis = 0;
  std::vector<std::string> provenance_errors;
};

json to_json(const BuildReport& r);

// Target text of an analysis-derived pair for the given variant.
std::string analysis_target(std::span<const Quadruple> quads, Variant variant);

// Emits pairs for `variant` through `sink`. Analysis variants use
// `analyses`; rw uses `rewrites`; merged emits the anl pairs followed by the
// rw pairs. Records without review text are skipped and logged in the report;
// analyses with no quadruples (failed parses) are skipped.
void build_pairs(std::span<const AnalysisRecord> analyses, std::span<const RewriteRecord> rewrites,
                 Variant variant, const CorpusLimits& limits, BuildReport& report,
                 const std::function<void(const CorpusPair&)>& sink);

// Fixed-width histogram of estimated token lengths.
struct LengthHistogram {
  std::size_t bucket_width = 16;
  std::map<std::size_t, std::size_t> buckets;  // bucket start -> count

  void add(std::size_t tokens);
  void merge(const LengthHistogram& other);
  std::size_t total() const;
};

struct CorpusStats {
  struct Key {
    std::string teacher;
    std::string source;
    std::string variant;
    auto operator<=>(const Key&) const = default;
  };

  std::map<Key, std::size_t> counts;
  std::size_t total = 0;
  LengthHistogram x_lengths;
  LengthHistogram u_lengths;
  double token_factor = 1.3;

  void add(const CorpusPair& p);
  // Associative and commutative, so shards can be reduced in any order.
  void merge(const CorpusStats& other);
  json to_json() const;
  std::string to_table() const;
};

CorpusStats corpus_stats(std::span<const CorpusPair> pairs, double token_factor = 1.3);

struct ShardInfo {
  std::string file;
  std::size_t count = 0;
  std::string sha256;
};

// Writes pairs into corpus-00000.jsonl, corpus-00001.jsonl, ... with at most
// `shard_size` pairs each, and a manifest.json that lists every shard's count
// and checksum together with `metadata`.
class ShardedCorpusWriter {
 public:
  ShardedCorpusWriter(std::filesystem::path dir, std::size_t shard_size = 50000);

  void write(const CorpusPair& p);
  // Closes the last shard and writes the manifest. Returns the manifest.
  json finish(const json& metadata);

  const CorpusStats& stats() const { return stats_; }

 private:
  void close_shard();

  std::filesystem::path dir_;
  std::size_t shard_size_;
  std::unique_ptr<JsonlWriter> current_;
  std::vector<ShardInfo> shards_;
  CorpusStats stats_;
};

// Loads every shard listed in dir/manifest.json after checking its checksum
// and count. Throws ValidationError on any mismatch.
std::vector<CorpusPair> read_corpus(const std::filesystem::path& dir);

}  // namespace sentidistill
