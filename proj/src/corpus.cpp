#include "sentidistill/corpus.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace sentidistill {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::anl: return "anl";
    case Variant::rw: return "rw";
    case Variant::anl_no_r: return "anl_no_r";
    case Variant::anl_no_l: return "anl_no_l";
    case Variant::merged: return "merged";
  }
  return "anl";
}

Variant parse_variant(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "anl") return Variant::anl;
  if (v == "rw") return Variant::rw;
  if (v == "anl_no_r") return Variant::anl_no_r;
  if (v == "anl_no_l") return Variant::anl_no_l;
  if (v == "merged") return Variant::merged;
  throw ValidationError("unknown corpus variant '" + std::string(s) + "'");
}

json to_json(const CorpusPair& p) {
  return json{{"review_id", p.review_id}, {"x", p.x},
              {"u", p.u},                 {"variant", to_string(p.variant)},
              {"teacher", p.teacher},     {"source", to_string(p.source)}};
}

CorpusPair corpus_pair_from_json(const json& j) {
  CorpusPair p;
  try {
    p.review_id = j.at("review_id").get<std::string>();
    p.x = j.at("x").get<std::string>();
    p.u = j.at("u").get<std::string>();
    p.variant = parse_variant(j.at("variant").get<std::string>());
    p.teacher = j.at("teacher").get<std::string>();
    p.source = parse_source(j.at("source").get<std::string>());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed corpus pair: ") + e.what());
  }
  return p;
}

std::size_t approx_tokens(std::string_view text, double token_factor) {
  double est = static_cast<double>(whitespace_tokens(text)) * token_factor;
  return static_cast<std::size_t>(std::ceil(est - 1e-9));
}

bool truncate_to_cap(std::string& text, std::size_t cap, double token_factor) {
  if (approx_tokens(text, token_factor) <= cap) return false;
  auto keep = static_cast<std::size_t>(std::floor(static_cast<double>(cap) / token_factor + 1e-9));
  std::size_t seen = 0;
  bool in_token = false;
  std::size_t end = 0;
  for (std::size_t i = 0; i < text.size(); ++i) {
    bool space = std::isspace(static_cast<unsigned char>(text[i])) != 0;
    if (!space && !in_token) {
      if (seen == keep) break;
      ++seen;
    }
    if (!space) end = i + 1;
    in_token = !space;
  }
  text.resize(keep == 0 ? 0 : end);
  return true;
}

json to_json(const BuildReport& r) {
  return json{{"emitted", r.emitted},
              {"truncated_x", r.truncated_x},
              {"truncated_u", r.truncated_u},
              {"skipped_no_analysis", r.skipped_no_analysis},
              {"provenance_errors", r.provenance_errors}};
}

std::string analysis_target(std::span<const Quadruple> quads, Variant variant) {
  switch (variant) {
    case Variant::anl: return serialize_analysis(quads, {true, true});
    case Variant::anl_no_r: return serialize_analysis(quads, {true, false});
    case Variant::anl_no_l: return serialize_analysis(quads, {false, true});
    default: throw ValidationError("not an analysis variant: " + std::string(to_string(variant)));
  }
}

namespace {

bool emit_pair(CorpusPair p, const CorpusLimits& limits, BuildReport& report,
               const std::function<void(const CorpusPair&)>& sink) {
  if (truncate_to_cap(p.x, limits.max_input_tokens, limits.token_factor)) ++report.truncated_x;
  if (truncate_to_cap(p.u, limits.max_output_tokens, limits.token_factor)) ++report.truncated_u;
  if (trim(p.x).empty() || trim(p.u).empty()) {
    report.provenance_errors.push_back("review " + p.review_id + ": empty text after truncation");
    return false;
  }
  ++report.emitted;
  sink(p);
  return true;
}

void analysis_pairs(std::span<const AnalysisRecord> analyses, Variant variant,
                    const CorpusLimits& limits, BuildReport& report,
                    const std::function<void(const CorpusPair&)>& sink) {
  for (const auto& a : analyses) {
    if (trim(a.review_text).empty()) {
      report.provenance_errors.push_back("analysis for review " + a.review_id +
                                         " has no review text");
      continue;
    }
    if (a.quads.empty()) {
      ++report.skipped_no_analysis;
      continue;
    }
    emit_pair(CorpusPair{a.review_id, a.review_text, analysis_target(a.quads, variant), variant,
                         a.teacher, a.source},
              limits, report, sink);
  }
}

void rewrite_pairs(std::span<const RewriteRecord> rewrites, const CorpusLimits& limits,
                   BuildReport& report, const std::function<void(const CorpusPair&)>& sink) {
  for (const auto& r : rewrites) {
    if (trim(r.review_text).empty()) {
      report.provenance_errors.push_back("rewrite for review " + r.review_id +
                                         " has no review text");
      continue;
    }
    if (trim(r.text).empty()) {
      report.provenance_errors.push_back("rewrite for review " + r.review_id + " is empty");
      continue;
    }
    emit_pair(CorpusPair{r.review_id, r.review_text, r.text, Variant::rw, r.teacher, r.source},
              limits, report, sink);
  }
}

}  // namespace

void build_pairs(std::span<const AnalysisRecord> analyses, std::span<const RewriteRecord> rewrites,
                 Variant variant, const CorpusLimits& limits, BuildReport& report,
                 const std::function<void(const CorpusPair&)>& sink) {
  switch (variant) {
    case Variant::anl:
    case Variant::anl_no_r:
    case Variant::anl_no_l:
      analysis_pairs(analyses, variant, limits, report, sink);
      break;
    case Variant::rw:
      rewrite_pairs(rewrites, limits, report, sink);
      break;
    case Variant::merged:
      analysis_pairs(analyses, Variant::anl, limits, report, sink);
      rewrite_pairs(rewrites, limits, report, sink);
      break;
  }
}

void LengthHistogram::add(std::size_t tokens) {
  ++buckets[tokens / bucket_width * bucket_width];
}

void LengthHistogram::merge(const LengthHistogram& other) {
  if (other.bucket_width != bucket_width) throw Error("histogram bucket widths differ");
  for (const auto& [start, n] : other.buckets) buckets[start] += n;
}

std::size_t LengthHistogram::total() const {
  std::size_t n = 0;
  for (const auto& [start, c] : buckets) n += c;
  return n;
}

void CorpusStats::add(const CorpusPair& p) {
  ++counts[Key{p.teacher, std::string(to_string(p.source)), std::string(to_string(p.variant))}];
  ++total;
  x_lengths.add(approx_tokens(p.x, token_factor));
  u_lengths.add(approx_tokens(p.u, token_factor));
}

void CorpusStats::merge(const CorpusStats& other) {
  for (const auto& [k, n] : other.counts) counts[k] += n;
  total += other.total;
  x_lengths.merge(other.x_lengths);
  u_lengths.merge(other.u_lengths);
}

namespace {

json histogram_json(const LengthHistogram& h) {
  json buckets = json::array();
  for (const auto& [start, n] : h.buckets) {
    buckets.push_back(json{{"from", start}, {"to", start + h.bucket_width - 1}, {"count", n}});
  }
  return json{{"bucket_width", h.bucket_width}, {"buckets", buckets}};
}

}  // namespace

json CorpusStats::to_json() const {
  json rows = json::array();
  for (const auto& [k, n] : counts) {
    rows.push_back(json{{"teacher", k.teacher}, {"source", k.source}, {"variant", k.variant},
                        {"pairs", n}});
  }
  return json{{"total", total},
              {"counts", rows},
              {"x_token_lengths", histogram_json(x_lengths)},
              {"u_token_lengths", histogram_json(u_lengths)},
              {"token_factor", token_factor}};
}

std::string CorpusStats::to_table() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof line, "%-16s %-8s %-10s %10s\n", "Teacher", "Source", "Variant",
                "Pairs");
  out << line;
  for (const auto& [k, n] : counts) {
    std::snprintf(line, sizeof line, "%-16s %-8s %-10s %10zu\n", k.teacher.c_str(),
                  k.source.c_str(), k.variant.c_str(), n);
    out << line;
  }
  std::snprintf(line, sizeof line, "%-36s %10zu\n", "Total", total);
  out << line;
  return out.str();
}

CorpusStats corpus_stats(std::span<const CorpusPair> pairs, double token_factor) {
  CorpusStats s;
  s.token_factor = token_factor;
  for (const auto& p : pairs) s.add(p);
  return s;
}

ShardedCorpusWriter::ShardedCorpusWriter(std::filesystem::path dir, std::size_t shard_size)
    : dir_(std::move(dir)), shard_size_(std::max<std::size_t>(1, shard_size)) {
  std::filesystem::create_directories(dir_);
}

void ShardedCorpusWriter::close_shard() {
  if (!current_) return;
  auto path = current_->path();
  std::size_t n = current_->count();
  current_.reset();
  shards_.push_back(ShardInfo{path.filename().string(), n, sha256_file(path)});
}

void ShardedCorpusWriter::write(const CorpusPair& p) {
  if (current_ && current_->count() >= shard_size_) close_shard();
  if (!current_) {
    char name[32];
    std::snprintf(name, sizeof name, "corpus-%05zu.jsonl", shards_.size());
    current_ = std::make_unique<JsonlWriter>(dir_ / name);
  }
  current_->write(to_json(p));
  stats_.add(p);
}

json ShardedCorpusWriter::finish(const json& metadata) {
  close_shard();
  json shards = json::array();
  for (const auto& s : shards_) {
    shards.push_back(json{{"file", s.file}, {"count", s.count}, {"sha256", s.sha256}});
  }
  json manifest = metadata;
  manifest["shard_size"] = shard_size_;
  manifest["total_pairs"] = stats_.total;
  manifest["shards"] = shards;
  manifest["stats"] = stats_.to_json();
  write_file(dir_ / "manifest.json", manifest.dump(2) + "\n");
  return manifest;
}

std::vector<CorpusPair> read_corpus(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw ValidationError("corpus manifest: " + std::string(e.what()));
  }
  std::vector<CorpusPair> pairs;
  for (const auto& shard : manifest.at("shards")) {
    auto path = dir / shard.at("file").get<std::string>();
    if (sha256_file(path) != shard.at("sha256").get<std::string>()) {
      throw ValidationError("checksum mismatch for shard " + path.string());
    }
    std::size_t before = pairs.size();
    read_jsonl(path, [&](const json& j, std::size_t) { pairs.push_back(corpus_pair_from_json(j)); });
    if (pairs.size() - before != shard.at("count").get<std::size_t>()) {
      throw ValidationError("pair count mismatch for shard " + path.string());
    }
  }
  return pairs;
}

}  // namespace sentidistill
