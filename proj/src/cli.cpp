#include "sentidistill/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <map>
#include <set>
#include <unordered_map>

#include "sentidistill/corpus.hpp"
#include "sentidistill/datasets.hpp"
#include "sentidistill/eval.hpp"
#include "sentidistill/parser.hpp"
#include "sentidistill/prompts.hpp"
#include "sentidistill/sampler.hpp"

namespace sentidistill {

namespace fs = std::filesystem;

bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
  return to_json(a) == to_json(b);
}

json to_json(const PipelineConfig& c) {
  return json{
      {"endpoint",
       {{"url", c.endpoint.url},
        {"api_key", c.endpoint.api_key},
        {"timeout_seconds", c.endpoint.timeout_seconds}}},
      {"teacher", c.teacher},
      {"model", c.model},
      {"scheme", c.scheme},
      {"n", c.n},
      {"seed", c.seed},
      {"refill", c.refill},
      {"variants", c.variants},
      {"paths",
       {{"reviews", c.paths.reviews},
        {"cache", c.paths.cache},
        {"corpus", c.paths.corpus},
        {"datasets", c.paths.datasets},
        {"predictions", c.paths.predictions},
        {"reports", c.paths.reports}}},
      {"budget", c.budget ? json(*c.budget) : json(nullptr)},
      {"max_in_flight", c.max_in_flight},
      {"max_attempts", c.max_attempts},
      {"base_backoff_ms", c.base_backoff_ms},
      {"temperature", c.temperature},
      {"max_new_tokens", c.max_new_tokens},
      {"shard_size", c.shard_size},
      {"max_input_tokens", c.max_input_tokens},
      {"max_output_tokens", c.max_output_tokens},
  };
}

json redacted_config(const PipelineConfig& c) {
  json j = to_json(c);
  j["endpoint"]["api_key"] = c.endpoint.api_key.empty() ? "" : "<redacted>";
  return j;
}

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError("unknown config key '" + std::string(where) + key + "'");
    }
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j[key].get<T>();
}

}  // namespace

PipelineConfig pipeline_config_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  reject_unknown(j,
                 {"endpoint", "teacher", "model", "scheme", "n", "seed", "refill", "variants",
                  "paths", "budget", "max_in_flight", "max_attempts", "base_backoff_ms",
                  "temperature", "max_new_tokens", "shard_size", "max_input_tokens",
                  "max_output_tokens"},
                 "");
  PipelineConfig c;
  try {
    if (j.contains("endpoint")) {
      const json& e = j["endpoint"];
      reject_unknown(e, {"url", "api_key", "timeout_seconds"}, "endpoint.");
      read_key(e, "url", c.endpoint.url);
      read_key(e, "api_key", c.endpoint.api_key);
      read_key(e, "timeout_seconds", c.endpoint.timeout_seconds);
    }
    read_key(j, "teacher", c.teacher);
    c.teacher = canonical_teacher(c.teacher);
    read_key(j, "model", c.model);
    read_key(j, "scheme", c.scheme);
    read_key(j, "n", c.n);
    read_key(j, "seed", c.seed);
    read_key(j, "refill", c.refill);
    read_key(j, "variants", c.variants);
    if (j.contains("paths")) {
      const json& p = j["paths"];
      reject_unknown(p, {"reviews", "cache", "corpus", "datasets", "predictions", "reports"},
                     "paths.");
      read_key(p, "reviews", c.paths.reviews);
      read_key(p, "cache", c.paths.cache);
      read_key(p, "corpus", c.paths.corpus);
      read_key(p, "datasets", c.paths.datasets);
      read_key(p, "predictions", c.paths.predictions);
      read_key(p, "reports", c.paths.reports);
    }
    if (j.contains("budget") && !j["budget"].is_null()) c.budget = j["budget"].get<std::size_t>();
    read_key(j, "max_in_flight", c.max_in_flight);
    read_key(j, "max_attempts", c.max_attempts);
    read_key(j, "base_backoff_ms", c.base_backoff_ms);
    read_key(j, "temperature", c.temperature);
    read_key(j, "max_new_tokens", c.max_new_tokens);
    read_key(j, "shard_size", c.shard_size);
    read_key(j, "max_input_tokens", c.max_input_tokens);
    read_key(j, "max_output_tokens", c.max_output_tokens);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  SamplingScheme::parse(c.scheme);
  for (const auto& v : c.variants) parse_variant(v);
  return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
  PipelineConfig c = pipeline_config_from_json(j);
  validate_config(c);
  return c;
}

void validate_config(const PipelineConfig& c) {
  std::map<std::string, std::string> seen;
  const std::pair<const char*, const std::string*> paths[] = {
      {"reviews", &c.paths.reviews},   {"cache", &c.paths.cache},
      {"corpus", &c.paths.corpus},     {"datasets", &c.paths.datasets},
      {"predictions", &c.paths.predictions}, {"reports", &c.paths.reports}};
  for (const auto& [name, value] : paths) {
    if (value->empty()) continue;
    std::string key = fs::path(*value).lexically_normal().string();
    if (!key.empty() && key.back() == '/') key.pop_back();
    auto [it, inserted] = seen.emplace(key, name);
    if (!inserted) {
      throw ValidationError(std::string("config paths '") + it->second + "' and '" + name +
                            "' are both " + *value);
    }
  }
  if (c.max_in_flight < 1) throw ValidationError("max_in_flight must be at least 1");
  if (c.max_attempts < 1) throw ValidationError("max_attempts must be at least 1");
  if (c.max_new_tokens < 1) throw ValidationError("max_new_tokens must be positive");
  if (c.temperature < 0) throw ValidationError("temperature must be non-negative");
}

void apply_env(PipelineConfig& c, const EnvLookup& env) {
  if (!env) return;
  if (auto v = env("SENTIDISTILL_ENDPOINT_URL")) c.endpoint.url = *v;
  if (auto v = env("SENTIDISTILL_API_KEY")) c.endpoint.api_key = *v;
}

json checksum_entries(const fs::path& path) {
  json out = json::array();
  if (fs::is_regular_file(path)) {
    out.push_back(json{{"path", path.generic_string()}, {"sha256", sha256_file(path)}});
  } else if (fs::is_directory(path)) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(path)) {
      if (e.is_regular_file()) files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
      out.push_back(json{{"path", f.generic_string()}, {"sha256", sha256_file(f)}});
    }
  } else {
    throw ValidationError("no such file or directory: " + path.string());
  }
  return out;
}

json run_manifest(std::string_view command, const json& options, const std::vector<fs::path>& inputs,
                  const std::vector<fs::path>& outputs, const json& summary) {
  json in = json::array();
  for (const auto& p : inputs) {
    for (auto& e : checksum_entries(p)) in.push_back(std::move(e));
  }
  json out = json::array();
  for (const auto& p : outputs) {
    for (auto& e : checksum_entries(p)) out.push_back(std::move(e));
  }
  return json{{"tool", "sentidistill"}, {"version", kVersion}, {"command", command},
              {"options", options},     {"inputs", in},        {"outputs", out},
              {"summary", summary}};
}

namespace {

std::string dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

void write_json(const fs::path& path, const json& j) { write_file(path, dump(j)); }

void write_manifest_for(const fs::path& output, std::string_view command, const json& options,
                        const std::vector<fs::path>& inputs, const std::vector<fs::path>& outputs,
                        const json& summary) {
  write_json(output.string() + ".manifest.json",
             run_manifest(command, options, inputs, outputs, summary));
}

void require(const std::string& value, std::string_view flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required");
}

// quads.jsonl -> quads.failures.jsonl
fs::path failures_path(const fs::path& out) {
  fs::path p = out;
  std::string stem = p.stem().string();
  return p.parent_path() / (stem + ".failures.jsonl");
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::vector<std::string> out;
  std::string text = read_file(path);
  for (auto line : split_lines(text)) {
    std::string t = trim(line);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

class OfflineEndpoint final : public Endpoint {
 public:
  EndpointReply complete(const GenRequest&) override {
    return EndpointReply{EndpointReply::Kind::permanent, {}, "no endpoint configured (offline)"};
  }
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

// ---- sample ----

struct SampleOpts {
  std::string reviews, out, scheme;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  bool refill = false;
};

int cmd_sample(const SampleOpts& o, Streams io) {
  require(o.reviews, "--reviews");
  require(o.out, "--out");
  auto scheme = SamplingScheme::parse(o.scheme);
  auto pool = load_reviews(o.reviews);
  auto res = stratified_sample(pool, scheme, o.n, o.seed, o.refill);
  write_reviews(o.out, res.reviews);
  for (const auto& w : res.warnings) io.err << "warning: " << w << "\n";
  std::array<std::size_t, 5> per_star{};
  for (const auto& r : res.reviews) ++per_star[static_cast<std::size_t>(r.stars - 1)];
  json summary{{"sampled", res.reviews.size()},
               {"eligible", res.eligible},
               {"duplicates_removed", res.duplicates_removed},
               {"per_star", per_star},
               {"warnings", res.warnings}};
  json options{{"reviews", o.reviews}, {"out", o.out},   {"scheme", scheme.name()},
               {"n", o.n},             {"seed", o.seed}, {"refill", o.refill}};
  write_manifest_for(o.out, "sample", options, {o.reviews}, {o.out}, summary);
  io.out << "sampled " << res.reviews.size() << " of " << res.eligible << " eligible reviews ("
         << scheme.name() << ", seed " << o.seed << ")\n";
  return 0;
}

// ---- generate ----

struct GenerateOpts {
  std::string reviews, out, kind = "analysis", teacher, model, cache, templates;
  long long budget = -1;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  int base_backoff_ms = 500;
  double temperature = 0;
  int max_new_tokens = 512;
  EndpointConfig endpoint;
};

int cmd_generate(const GenerateOpts& o, const CliContext& ctx, Streams io) {
  require(o.reviews, "--reviews");
  require(o.out, "--out");
  PromptKind kind = parse_prompt_kind(o.kind);
  if (kind != PromptKind::analysis && kind != PromptKind::rewriting) {
    throw UsageError("--kind must be analysis or rewriting");
  }
  std::string teacher = canonical_teacher(o.teacher);
  std::string model = o.model.empty() ? teacher : o.model;
  fs::path template_dir = o.templates.empty() ? TemplateStore::default_dir() : fs::path(o.templates);
  TemplateStore store = TemplateStore::load(template_dir);
  PromptRenderer renderer(store);

  auto reviews = load_reviews(o.reviews);
  std::string suffix = kind == PromptKind::analysis ? "#anl" : "#rw";
  std::vector<GenRequest> requests;
  requests.reserve(reviews.size());
  for (const auto& r : reviews) {
    requests.push_back(GenRequest{r.id + suffix, renderer.render_generation(kind, r.text), model,
                                  o.max_new_tokens, o.temperature, teacher});
  }

  std::unique_ptr<ResponseCache> cache;
  if (!o.cache.empty()) cache = std::make_unique<ResponseCache>(o.cache);
  std::unique_ptr<Endpoint> endpoint;
  if (o.endpoint.url.empty()) {
    endpoint = std::make_unique<OfflineEndpoint>();
  } else if (ctx.make_endpoint) {
    endpoint = ctx.make_endpoint(o.endpoint);
  } else {
    endpoint = std::make_unique<ChatCompletionsEndpoint>(o.endpoint);
  }

  BatchOptions opts;
  opts.max_in_flight = o.max_in_flight;
  opts.retry.max_attempts = o.max_attempts;
  opts.retry.base_backoff = std::chrono::milliseconds(o.base_backoff_ms);
  if (o.budget >= 0) opts.budget = static_cast<std::size_t>(o.budget);
  opts.sleep = ctx.sleep;

  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < requests.size(); ++i) index.emplace(requests[i].request_id, i);
  std::vector<GenResult> results(requests.size());
  BatchSummary summary = generate_batch(requests, opts, *endpoint, cache.get(),
                                        [&](const GenResult& r) { results[index.at(r.request_id)] = r; });

  {
    JsonlWriter w(o.out);
    for (std::size_t i = 0; i < results.size(); ++i) {
      json j = to_json(results[i]);
      j["review_id"] = reviews[i].id;
      j["teacher"] = teacher;
      j["model"] = model;
      j["prompt_kind"] = to_string(kind);
      w.write(j);
    }
  }
  json options{{"reviews", o.reviews},
               {"out", o.out},
               {"kind", to_string(kind)},
               {"teacher", teacher},
               {"model", model},
               {"cache", o.cache},
               {"templates", template_dir.generic_string()},
               {"template_fingerprint", store.fingerprint()},
               {"budget", o.budget >= 0 ? json(o.budget) : json(nullptr)},
               {"max_in_flight", o.max_in_flight},
               {"max_attempts", o.max_attempts},
               {"base_backoff_ms", o.base_backoff_ms},
               {"temperature", o.temperature},
               {"max_new_tokens", o.max_new_tokens},
               {"endpoint_url", o.endpoint.url}};
  write_manifest_for(o.out, "generate", options, {o.reviews}, {o.out}, to_json(summary));
  io.out << "requests " << summary.requests << ", cached " << summary.cached << ", issued "
         << summary.issued << ", ok " << summary.ok << ", failed " << summary.failed
         << ", over_budget " << summary.over_budget << "\n";
  return 0;
}

// ---- parse ----

struct ParseOpts {
  std::string generations, out, mode = "analysis", task = "tsa", categories;
};

int cmd_parse(const ParseOpts& o, Streams io) {
  require(o.generations, "--generations");
  require(o.out, "--out");
  fs::path fail_path = failures_path(o.out);
  std::map<std::string, std::size_t> reasons;
  std::size_t lines = 0, parsed = 0, items = 0, not_generated = 0;
  JsonlWriter out(o.out);
  JsonlWriter failures(fail_path);
  std::vector<fs::path> inputs{o.generations};

  if (o.mode == "analysis") {
    read_jsonl(o.generations, [&](const json& j, std::size_t) {
      ++lines;
      GenResult g = gen_result_from_json(j);
      std::string review_id = j.value("review_id", g.request_id);
      std::string teacher = j.value("teacher", std::string());
      std::string kind = j.value("prompt_kind", std::string("analysis"));
      if (g.status != GenStatus::ok) {
        ++not_generated;
        return;
      }
      auto res = parse_analysis(*g.text);
      if (auto* quads = std::get_if<std::vector<Quadruple>>(&res)) {
        ++parsed;
        for (const auto& q : *quads) {
          out.write(quadruple_record(q, review_id, teacher, kind));
          ++items;
        }
      } else {
        const auto& f = std::get<ParseFailure<Quadruple>>(res);
        ++reasons[std::string(to_string(f.reason))];
        json rec = failure_record(f, review_id);
        rec["teacher"] = teacher;
        failures.write(rec);
      }
    });
  } else if (o.mode == "pairs") {
    Task task = parse_task(o.task);
    std::vector<std::string> categories;
    if (!o.categories.empty()) {
      for (const auto& c : read_lines(o.categories)) categories.push_back(normalize_category(c));
      inputs.emplace_back(o.categories);
    }
    if (task == Task::asa && categories.empty()) {
      throw UsageError("--categories is required for ASA pair lists");
    }
    read_jsonl(o.generations, [&](const json& j, std::size_t) {
      ++lines;
      GenResult g = gen_result_from_json(j);
      std::string sentence_id = j.value("sentence_id", g.request_id);
      std::vector<PredPair> pairs;
      if (g.status != GenStatus::ok) {
        ++not_generated;
      } else {
        auto res = parse_pair_list(*g.text, task, categories);
        pairs = usable_items(res);
        if (const auto* f = std::get_if<ParseFailure<PredPair>>(&res)) {
          ++reasons[std::string(to_string(f->reason))];
          failures.write(failure_record(*f, sentence_id));
        } else {
          ++parsed;
        }
      }
      items += pairs.size();
      out.write(prediction_record(sentence_id, pairs));
    });
  } else {
    throw UsageError("--mode must be analysis or pairs");
  }

  json summary{{"lines", lines},
               {"parsed", parsed},
               {"items", items},
               {"not_generated", not_generated},
               {"failures", reasons}};
  json options{{"generations", o.generations}, {"out", o.out}, {"mode", o.mode},
               {"task", o.task}, {"categories", o.categories}};
  write_manifest_for(o.out, "parse", options, inputs, {o.out, fail_path}, summary);
  io.out << "parsed " << parsed << " of " << lines << " completions, " << items << " items";
  std::size_t failed = 0;
  for (const auto& [r, n] : reasons) failed += n;
  if (failed) io.out << ", " << failed << " failures";
  io.out << "\n";
  return 0;
}

// ---- build-corpus ----

struct BuildOpts {
  std::string variant = "anl", teacher, reviews, analyses, rewrites, out;
  std::size_t shard_size = 50000, max_input_tokens = 128, max_output_tokens = 400;
};

int cmd_build_corpus(const BuildOpts& o, Streams io) {
  require(o.reviews, "--reviews");
  require(o.out, "--out");
  require(o.teacher, "--teacher");
  Variant variant = parse_variant(o.variant);
  std::string teacher = canonical_teacher(o.teacher);
  bool need_anl = variant != Variant::rw;
  bool need_rw = variant == Variant::rw || variant == Variant::merged;
  if (need_anl) require(o.analyses, "--analyses");
  if (need_rw) require(o.rewrites, "--rewrites");

  auto reviews = load_reviews(o.reviews);
  std::unordered_map<std::string, const RawReview*> by_id;
  for (const auto& r : reviews) by_id.emplace(r.id, &r);
  std::vector<fs::path> inputs{o.reviews};

  auto make_record = [&](const std::string& id, auto& rec) {
    rec.review_id = id;
    rec.teacher = teacher;
    if (auto it = by_id.find(id); it != by_id.end()) {
      rec.review_text = it->second->text;
      rec.source = it->second->source;
    }
  };
  // Reviews file order first, then ids the reviews file does not know.
  auto ordered_ids = [&](const auto& keyed) {
    std::vector<std::string> ids;
    for (const auto& r : reviews) {
      if (keyed.count(r.id)) ids.push_back(r.id);
    }
    std::vector<std::string> unknown;
    for (const auto& [id, v] : keyed) {
      if (!by_id.count(id)) unknown.push_back(id);
    }
    std::sort(unknown.begin(), unknown.end());
    ids.insert(ids.end(), unknown.begin(), unknown.end());
    return ids;
  };

  std::vector<AnalysisRecord> analyses;
  if (need_anl) {
    inputs.emplace_back(o.analyses);
    std::unordered_map<std::string, std::vector<Quadruple>> quads;
    read_jsonl(o.analyses, [&](const json& j, std::size_t line) {
      try {
        if (canonical_teacher(j.value("teacher", teacher)) != teacher) return;
        quads[j.at("review_id").get<std::string>()].push_back(quadruple_from_record(j));
      } catch (const std::exception& e) {
        throw ValidationError(o.analyses + ":" + std::to_string(line) + ": " + e.what());
      }
    });
    for (const auto& id : ordered_ids(quads)) {
      AnalysisRecord rec;
      make_record(id, rec);
      rec.quads = std::move(quads[id]);
      analyses.push_back(std::move(rec));
    }
  }

  std::vector<RewriteRecord> rewrites;
  if (need_rw) {
    inputs.emplace_back(o.rewrites);
    std::unordered_map<std::string, std::string> texts;
    read_jsonl(o.rewrites, [&](const json& j, std::size_t) {
      GenResult g = gen_result_from_json(j);
      if (g.status != GenStatus::ok) return;
      if (canonical_teacher(j.value("teacher", teacher)) != teacher) return;
      if (j.contains("prompt_kind") && j["prompt_kind"] != "rewriting") return;
      texts.emplace(j.value("review_id", g.request_id), *g.text);
    });
    for (const auto& id : ordered_ids(texts)) {
      RewriteRecord rec;
      make_record(id, rec);
      rec.text = std::move(texts[id]);
      rewrites.push_back(std::move(rec));
    }
  }

  CorpusLimits limits{o.max_input_tokens, o.max_output_tokens, 1.3};
  BuildReport report;
  ShardedCorpusWriter writer(o.out, o.shard_size);
  build_pairs(analyses, rewrites, variant, limits, report,
              [&](const CorpusPair& p) { writer.write(p); });
  for (const auto& e : report.provenance_errors) io.err << "provenance: " << e << "\n";

  json options{{"variant", to_string(variant)},
               {"teacher", teacher},
               {"reviews", o.reviews},
               {"analyses", o.analyses},
               {"rewrites", o.rewrites},
               {"out", o.out},
               {"shard_size", o.shard_size},
               {"max_input_tokens", o.max_input_tokens},
               {"max_output_tokens", o.max_output_tokens},
               {"token_factor", limits.token_factor}};
  json metadata{{"variant", to_string(variant)},
                {"teacher", teacher},
                {"build_report", to_json(report)},
                {"run", run_manifest("build-corpus", options, inputs, {}, json::object())}};
  writer.finish(metadata);
  io.out << writer.stats().to_table();
  return 0;
}

// ---- datasets helpers ----

struct DatasetOpts {
  std::string name, root, hard;
};

fs::path dataset_dir(const DatasetOpts& o, const std::string& name) {
  return fs::path(o.root.empty() ? "datasets" : o.root) / name;
}

FsaDataset load_for_eval(const DatasetOpts& o, std::vector<fs::path>& inputs) {
  require(o.name, "--dataset");
  fs::path dir = dataset_dir(o, o.name);
  FsaDataset ds = load_dataset(dir, o.name);
  inputs.push_back(dir);
  if (!o.hard.empty()) {
    fs::path hdir = dataset_dir(o, o.hard);
    FsaDataset hard = load_dataset(hdir, o.hard);
    inputs.push_back(hdir);
    ds = merge_hard(ds, hard);
  }
  return ds;
}

Task eval_task(const FsaDataset& ds, const std::string& task_flag) {
  if (!task_flag.empty()) return parse_task(task_flag);
  if (!ds.info.task) throw UsageError("--task is required for " + ds.info.name);
  return *ds.info.task;
}

std::vector<Subset> parse_subsets(const std::string& s) {
  std::vector<Subset> out;
  for (const auto& part : split(s, ',')) {
    if (!trim(part).empty()) out.push_back(parse_subset(part));
  }
  if (out.empty()) throw UsageError("--subset needs at least one of all, imp, mul");
  return out;
}

// ---- stats ----

struct StatsOpts {
  DatasetOpts ds;
  std::string corpus, out;
};

int cmd_stats(const StatsOpts& o, Streams io) {
  std::vector<fs::path> inputs;
  json report;
  if (!o.corpus.empty()) {
    auto pairs = read_corpus(o.corpus);
    auto stats = corpus_stats(pairs);
    inputs.emplace_back(o.corpus);
    report = stats.to_json();
    io.out << stats.to_table();
  } else {
    require(o.ds.name, "--dataset");
    fs::path dir = dataset_dir(o.ds, o.ds.name);
    FsaDataset ds = load_dataset(dir, o.ds.name);
    inputs.push_back(dir);
    std::vector<SplitStats> rows;
    for (const char* split : {"train", "dev", "test"}) {
      const auto& samples = ds.split(split);
      if (samples.empty() && std::string_view(split) != "test") continue;
      rows.push_back(split_stats(ds.info.name, split, samples));
    }
    if (!o.ds.hard.empty()) {
      fs::path hdir = dataset_dir(o.ds, o.ds.hard);
      FsaDataset hard = load_dataset(hdir, o.ds.hard);
      inputs.push_back(hdir);
      FsaDataset merged = merge_hard(ds, hard);
      rows.push_back(split_stats(hard.info.name, "test", hard.test));
      rows.push_back(split_stats(ds.info.name, "test+" + hard.info.name, merged.test));
    }
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    report = json{{"dataset", ds.info.name}, {"rows", arr},
                  {"implicit_reading", "sentences with at least one implicit pair"}};
    io.out << stats_table(rows);
  }
  if (!o.out.empty()) {
    write_json(o.out, report);
    json options{{"dataset", o.ds.name}, {"datasets_dir", o.ds.root}, {"merge_hard", o.ds.hard},
                 {"corpus", o.corpus},   {"out", o.out}};
    write_manifest_for(o.out, "stats", options, inputs, {o.out}, json::object());
  }
  return 0;
}

// ---- evaluate ----

struct EvaluateOpts {
  DatasetOpts ds;
  std::vector<std::string> preds;
  std::string subset = "all", policy = "sentence", task, out;
};

int cmd_evaluate(const EvaluateOpts& o, Streams io) {
  if (o.preds.empty()) throw UsageError("--preds is required");
  std::vector<fs::path> inputs;
  FsaDataset ds = load_for_eval(o.ds, inputs);
  Task task = eval_task(ds, o.task);
  auto subsets = parse_subsets(o.subset);
  SubsetPolicy policy = parse_subset_policy(o.policy);

  json runs = json::array();
  std::map<Subset, std::vector<PrfScore>> per_subset;
  for (const auto& path : o.preds) {
    PredictionSet preds = load_predictions(path);
    inputs.emplace_back(path);
    std::vector<PairScore> scores;
    json run = json::array();
    for (Subset s : subsets) {
      scores.push_back(pair_f1(preds, ds.test, task, s, policy));
      per_subset[s].push_back(scores.back().score);
      run.push_back(to_json(scores.back()));
    }
    runs.push_back(json{{"preds", path}, {"scores", run}});
    if (o.preds.size() > 1) io.out << path << "\n";
    io.out << score_table(scores, ds.info.name);
  }
  json report{{"dataset", ds.info.name}, {"task", to_string(task)}, {"policy", to_string(policy)},
              {"runs", runs}};
  if (o.preds.size() > 1) {
    json agg = json::object();
    io.out << "F1 over " << o.preds.size() << " runs:\n";
    for (Subset s : subsets) {
      auto a = aggregate_runs(std::span<const PrfScore>(per_subset[s]));
      agg[std::string(to_string(s))] = to_json(a);
      io.out << "  " << to_string(s) << ": mean " << format_percent(a.mean) << ", stddev "
             << format_percent(a.stddev) << "\n";
    }
    report["aggregate"] = agg;
  }
  if (!o.out.empty()) {
    write_json(o.out, report);
    json options{{"dataset", o.ds.name}, {"datasets_dir", o.ds.root}, {"merge_hard", o.ds.hard},
                 {"preds", o.preds},     {"subset", o.subset},        {"policy", o.policy},
                 {"task", to_string(task)}, {"out", o.out}};
    write_manifest_for(o.out, "evaluate", options, inputs, {o.out}, json::object());
  }
  return 0;
}

// ---- zeroshot-eval ----

int cmd_zeroshot(const EvaluateOpts& o, Streams io) {
  if (o.preds.empty()) throw UsageError("--preds is required");
  std::vector<fs::path> inputs;
  FsaDataset ds = load_for_eval(o.ds, inputs);
  Task task = eval_task(ds, o.task);
  auto subsets = parse_subsets(o.subset);

  json runs = json::array();
  std::map<Subset, std::vector<double>> per_subset;
  char line[160];
  for (const auto& path : o.preds) {
    auto preds = load_zeroshot_predictions(path, task);
    inputs.emplace_back(path);
    json run = json::array();
    std::snprintf(line, sizeof line, "%-14s %-6s %9s %8s %8s\n", "Dataset", "Subset", "Accuracy",
                  "Correct", "Total");
    if (o.preds.size() > 1) io.out << path << "\n";
    io.out << line;
    for (Subset s : subsets) {
      auto acc = zeroshot_accuracy(preds, ds.test, task, s);
      per_subset[s].push_back(acc.accuracy);
      run.push_back(to_json(acc));
      std::snprintf(line, sizeof line, "%-14s %-6s %9s %8zu %8zu\n", ds.info.name.c_str(),
                    std::string(to_string(s)).c_str(), format_percent(acc.accuracy).c_str(),
                    acc.correct, acc.total);
      io.out << line;
    }
    runs.push_back(json{{"preds", path}, {"scores", run}});
  }
  json report{{"dataset", ds.info.name}, {"task", to_string(task)}, {"runs", runs}};
  if (o.preds.size() > 1) {
    json agg = json::object();
    for (Subset s : subsets) {
      agg[std::string(to_string(s))] = to_json(aggregate_runs(std::span<const double>(per_subset[s])));
    }
    report["aggregate"] = agg;
  }
  if (!o.out.empty()) {
    write_json(o.out, report);
    json options{{"dataset", o.ds.name}, {"datasets_dir", o.ds.root}, {"merge_hard", o.ds.hard},
                 {"preds", o.preds},     {"subset", o.subset},        {"task", to_string(task)},
                 {"out", o.out}};
    write_manifest_for(o.out, "zeroshot-eval", options, inputs, {o.out}, json::object());
  }
  return 0;
}

// ---- humaneval-aggregate ----

struct HumanEvalOpts {
  std::string records, out;
};

int cmd_humaneval(const HumanEvalOpts& o, Streams io) {
  require(o.records, "--records");
  auto records = load_humaneval(o.records);
  auto rows = humaneval_aggregate(records);
  io.out << humaneval_table(rows);
  if (!o.out.empty()) {
    json arr = json::array();
    for (const auto& r : rows) arr.push_back(to_json(r));
    write_json(o.out, json{{"rows", arr}});
    write_manifest_for(o.out, "humaneval-aggregate", json{{"records", o.records}, {"out", o.out}},
                       {o.records}, {o.out}, json{{"records", records.size()}});
  }
  return 0;
}

// ---- error-report ----

struct ErrorReportOpts {
  std::string labels, out, row = "model";
  std::size_t total = 0;
};

int cmd_error_report(const ErrorReportOpts& o, Streams io) {
  require(o.labels, "--labels");
  auto labels = load_error_labels(o.labels);
  std::size_t total = o.total == 0 ? labels.size() : o.total;
  auto report = error_report(labels, total);
  io.out << error_table(report, o.row);
  if (!o.out.empty()) {
    json j = to_json(report);
    j["row"] = o.row;
    write_json(o.out, j);
    write_manifest_for(o.out, "error-report",
                       json{{"labels", o.labels}, {"total", total}, {"row", o.row}, {"out", o.out}},
                       {o.labels}, {o.out}, json::object());
  }
  return 0;
}

// ---- convert ----

struct ConvertOpts {
  std::string format = "semeval14", input, split = "test", origin, out, dev_ids, opinion_words,
              towe;
};

int cmd_convert(const ConvertOpts& o, Streams io) {
  require(o.input, "--input");
  require(o.out, "--out");
  if (o.split != "train" && o.split != "dev" && o.split != "test") {
    throw UsageError("--split must be train, dev or test");
  }
  Origin origin = !o.origin.empty()   ? parse_origin(o.origin)
                  : o.split == "train" ? Origin::train
                  : o.split == "dev"   ? Origin::dev
                                       : Origin::original_test;
  std::vector<FsaSample> samples;
  if (o.format == "semeval14") {
    samples = convert_semeval14(o.input, origin);
  } else if (o.format == "semeval16") {
    samples = convert_semeval16(o.input, origin);
  } else if (o.format == "jsonl") {
    samples = read_samples(o.input);
    for (auto& s : samples) s.origin = origin;
  } else {
    throw UsageError("--format must be semeval14, semeval16 or jsonl");
  }
  std::vector<fs::path> inputs{o.input};
  std::size_t annotated = 0;
  if (!o.opinion_words.empty()) {
    annotated += attach_opinion_words(samples, read_opinion_words(o.opinion_words));
    inputs.emplace_back(o.opinion_words);
  }
  if (!o.towe.empty()) {
    annotated += attach_opinion_words(samples, read_towe_tsv(o.towe));
    inputs.emplace_back(o.towe);
  }
  std::vector<FsaSample> dev;
  if (!o.dev_ids.empty()) {
    if (o.split != "train") throw UsageError("--dev-ids only applies to --split train");
    dev = carve_dev(samples, read_lines(o.dev_ids));
    inputs.emplace_back(o.dev_ids);
  }

  fs::path dir(o.out);
  fs::create_directories(dir);
  std::vector<fs::path> outputs{dir / (o.split + ".jsonl")};
  write_samples(outputs[0], samples);
  if (!o.dev_ids.empty()) {
    outputs.push_back(dir / "dev.jsonl");
    write_samples(outputs.back(), dev);
  }

  // Category space: whatever categories.txt already lists plus new ones.
  std::vector<std::string> categories;
  fs::path cat_path = dir / "categories.txt";
  if (fs::exists(cat_path)) categories = read_lines(cat_path);
  std::size_t before = categories.size();
  for (const auto* split : {&samples, &dev}) {
    for (const auto& s : *split) {
      for (const auto& p : s.pairs) {
        if (p.category && std::find(categories.begin(), categories.end(), *p.category) ==
                              categories.end()) {
          categories.push_back(*p.category);
        }
      }
    }
  }
  if (categories.size() != before) {
    std::string text;
    for (const auto& c : categories) text += c + "\n";
    write_file(cat_path, text);
  }
  if (!categories.empty()) outputs.push_back(cat_path);

  json options{{"format", o.format},   {"input", o.input},   {"split", o.split},
               {"origin", to_string(origin)}, {"out", o.out}, {"dev_ids", o.dev_ids},
               {"opinion_words", o.opinion_words}, {"towe", o.towe}};
  json summary{{"samples", samples.size()}, {"dev", dev.size()},
               {"opinion_word_annotations", annotated}};
  write_manifest_for(outputs[0], "convert", options, inputs, outputs, summary);
  io.out << "wrote " << samples.size() << " samples to " << outputs[0].generic_string();
  if (!dev.empty()) io.out << " and " << dev.size() << " to " << outputs[1].generic_string();
  io.out << "\n";
  return 0;
}

void add_dataset_options(CLI::App* sub, DatasetOpts& o) {
  sub->add_option("--dataset", o.name, "Dataset name, e.g. tsa_rest14");
  sub->add_option("--datasets-dir", o.root, "Directory holding one subdirectory per dataset");
  sub->add_option("--merge-hard", o.hard, "Hard set merged into the test split, e.g. rest_hard");
}

}  // namespace

int run_command(const std::vector<std::string>& args, const CliContext& ctx) {
  Streams io{ctx.out ? *ctx.out : std::cout, ctx.err ? *ctx.err : std::cerr};
  EnvLookup env = ctx.env ? ctx.env : [](const std::string& k) -> std::optional<std::string> {
    if (const char* v = std::getenv(k.c_str())) return std::string(v);
    return std::nullopt;
  };

  try {
    // Config file first, then the environment, then flags.
    PipelineConfig cfg;
    for (std::size_t i = 0; i < args.size(); ++i) {
      std::string path;
      if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
      if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
      if (!path.empty()) cfg = load_pipeline_config(path);
    }
    apply_env(cfg, env);

    CLI::App app{"Distillation-data pipeline and FSA benchmark harness", "sentidistill"};
    app.set_version_flag("--version", std::string(kVersion));
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON pipeline config");

    SampleOpts sample{cfg.paths.reviews, "", cfg.scheme, cfg.n, cfg.seed, cfg.refill};
    auto* s_sample = app.add_subcommand("sample", "Rating-stratified review sampling");
    s_sample->add_option("--reviews", sample.reviews, "Review pool JSONL");
    s_sample->add_option("--out", sample.out, "Sampled reviews JSONL");
    s_sample->add_option("--scheme", sample.scheme, "Sampling scheme, e.g. R12421");
    s_sample->add_option("--n", sample.n, "Number of reviews");
    s_sample->add_option("--seed", sample.seed, "Random seed");
    s_sample->add_flag("--refill", sample.refill, "Reuse strata after exhaustion");

    GenerateOpts gen;
    gen.reviews = cfg.paths.reviews;
    gen.teacher = cfg.teacher;
    gen.model = cfg.model;
    gen.cache = cfg.paths.cache;
    gen.budget = cfg.budget ? static_cast<long long>(*cfg.budget) : -1;
    gen.max_in_flight = cfg.max_in_flight;
    gen.max_attempts = cfg.max_attempts;
    gen.base_backoff_ms = cfg.base_backoff_ms;
    gen.temperature = cfg.temperature;
    gen.max_new_tokens = cfg.max_new_tokens;
    gen.endpoint = cfg.endpoint;
    auto* s_gen = app.add_subcommand("generate", "Query a teacher with analysis or rewriting prompts");
    s_gen->add_option("--reviews", gen.reviews, "Reviews JSONL");
    s_gen->add_option("--out", gen.out, "Generation results JSONL");
    s_gen->add_option("--kind", gen.kind, "analysis or rewriting");
    s_gen->add_option("--teacher", gen.teacher, "Teacher tag");
    s_gen->add_option("--model", gen.model, "Model name sent to the endpoint");
    s_gen->add_option("--cache", gen.cache, "Response cache directory");
    s_gen->add_option("--templates", gen.templates, "Template directory");
    s_gen->add_option("--budget", gen.budget, "Maximum non-cached requests");
    s_gen->add_option("--max-in-flight", gen.max_in_flight, "Concurrent requests");
    s_gen->add_option("--max-attempts", gen.max_attempts, "Attempts per request");
    s_gen->add_option("--base-backoff-ms", gen.base_backoff_ms, "First retry delay");
    s_gen->add_option("--temperature", gen.temperature, "Sampling temperature");
    s_gen->add_option("--max-new-tokens", gen.max_new_tokens, "Completion length limit");
    s_gen->add_option("--endpoint", gen.endpoint.url, "Chat-completions URL");
    s_gen->add_option("--api-key", gen.endpoint.api_key, "API key");
    s_gen->add_option("--timeout", gen.endpoint.timeout_seconds, "Request timeout in seconds");

    ParseOpts parse;
    auto* s_parse = app.add_subcommand("parse", "Parse completions into quadruples or pairs");
    s_parse->add_option("--generations", parse.generations, "Generation results JSONL");
    s_parse->add_option("--out", parse.out, "Parsed output JSONL");
    s_parse->add_option("--mode", parse.mode, "analysis or pairs");
    s_parse->add_option("--task", parse.task, "tsa or asa (pairs mode)");
    s_parse->add_option("--categories", parse.categories, "Category space file (ASA)");

    BuildOpts build;
    build.variant = cfg.variants.empty() ? "anl" : cfg.variants.front();
    build.teacher = cfg.teacher;
    build.reviews = cfg.paths.reviews;
    build.out = cfg.paths.corpus;
    build.shard_size = cfg.shard_size;
    build.max_input_tokens = cfg.max_input_tokens;
    build.max_output_tokens = cfg.max_output_tokens;
    auto* s_build = app.add_subcommand("build-corpus", "Assemble pretraining pairs");
    s_build->add_option("--variant", build.variant, "anl, rw, anl_no_r, anl_no_l or merged");
    s_build->add_option("--teacher", build.teacher, "Teacher tag");
    s_build->add_option("--reviews", build.reviews, "Reviews JSONL");
    s_build->add_option("--analyses", build.analyses, "Parsed quadruples JSONL");
    s_build->add_option("--rewrites", build.rewrites, "Rewriting generation results JSONL");
    s_build->add_option("--out", build.out, "Corpus directory");
    s_build->add_option("--shard-size", build.shard_size, "Pairs per shard");
    s_build->add_option("--max-input-tokens", build.max_input_tokens, "Input length cap");
    s_build->add_option("--max-output-tokens", build.max_output_tokens, "Output length cap");

    StatsOpts stats;
    stats.ds.root = cfg.paths.datasets;
    auto* s_stats = app.add_subcommand("stats", "Dataset or corpus statistics");
    s_stats->add_option("name", stats.ds.name, "Dataset name");
    add_dataset_options(s_stats, stats.ds);
    s_stats->add_option("--corpus", stats.corpus, "Corpus directory instead of a dataset");
    s_stats->add_option("--out", stats.out, "JSON report");

    EvaluateOpts evaluate;
    evaluate.ds.root = cfg.paths.datasets;
    if (!cfg.paths.predictions.empty()) evaluate.preds.push_back(cfg.paths.predictions);
    auto* s_eval = app.add_subcommand("evaluate", "Exact-match pair F1");
    add_dataset_options(s_eval, evaluate.ds);
    s_eval->add_option("--preds", evaluate.preds, "Prediction JSONL (repeat for several runs)");
    s_eval->add_option("--subset", evaluate.subset, "Comma-separated: all,imp,mul");
    s_eval->add_option("--policy", evaluate.policy, "Subset policy: sentence or pair");
    s_eval->add_option("--task", evaluate.task, "tsa or asa (required for hard sets)");
    s_eval->add_option("--out", evaluate.out, "JSON report");

    EvaluateOpts zeroshot;
    zeroshot.ds.root = cfg.paths.datasets;
    if (!cfg.paths.predictions.empty()) zeroshot.preds.push_back(cfg.paths.predictions);
    auto* s_zero = app.add_subcommand("zeroshot-eval", "Zero-shot classification accuracy");
    add_dataset_options(s_zero, zeroshot.ds);
    s_zero->add_option("--preds", zeroshot.preds, "Prediction JSONL (repeat for several runs)");
    s_zero->add_option("--subset", zeroshot.subset, "Comma-separated: all,imp,mul");
    s_zero->add_option("--task", zeroshot.task, "tsa or asa (required for hard sets)");
    s_zero->add_option("--out", zeroshot.out, "JSON report");

    HumanEvalOpts human;
    auto* s_human = app.add_subcommand("humaneval-aggregate", "Aggregate human evaluation scores");
    s_human->add_option("--records", human.records, "Annotation JSONL");
    s_human->add_option("--out", human.out, "JSON report");

    ErrorReportOpts errors;
    auto* s_err = app.add_subcommand("error-report", "Error-type proportions");
    s_err->add_option("--labels", errors.labels, "Error label JSONL");
    s_err->add_option("--total", errors.total, "Number of sampled wrong predictions");
    s_err->add_option("--row", errors.row, "Row label for the table");
    s_err->add_option("--out", errors.out, "JSON report");

    ConvertOpts convert;
    auto* s_conv = app.add_subcommand("convert", "Convert SemEval XML to the JSONL dataset format");
    s_conv->add_option("--format", convert.format, "semeval14, semeval16 or jsonl");
    s_conv->add_option("--input", convert.input, "Source file");
    s_conv->add_option("--split", convert.split, "train, dev or test");
    s_conv->add_option("--origin", convert.origin, "Sample origin, e.g. hard_set");
    s_conv->add_option("--out", convert.out, "Dataset directory");
    s_conv->add_option("--dev-ids", convert.dev_ids, "Sentence ids moved from train to dev");
    s_conv->add_option("--opinion-words", convert.opinion_words, "Opinion-word JSONL");
    s_conv->add_option("--towe", convert.towe, "Opinion-word TSV");

    std::vector<const char*> argv{"sentidistill"};
    for (const auto& a : args) argv.push_back(a.c_str());
    try {
      app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e, io.out, io.err);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e, io.out, io.err);
    } catch (const CLI::CallForVersion& e) {
      return app.exit(e, io.out, io.err);
    } catch (const CLI::ParseError& e) {
      app.exit(e, io.out, io.err);
      return 2;
    }

    if (s_sample->parsed()) return cmd_sample(sample, io);
    if (s_gen->parsed()) {
      validate_config(cfg);
      return cmd_generate(gen, ctx, io);
    }
    if (s_parse->parsed()) return cmd_parse(parse, io);
    if (s_build->parsed()) return cmd_build_corpus(build, io);
    if (s_stats->parsed()) return cmd_stats(stats, io);
    if (s_eval->parsed()) return cmd_evaluate(evaluate, io);
    if (s_zero->parsed()) return cmd_zeroshot(zeroshot, io);
    if (s_human->parsed()) return cmd_humaneval(human, io);
    if (s_err->parsed()) return cmd_error_report(errors, io);
    if (s_conv->parsed()) return cmd_convert(convert, io);
    throw UsageError("no subcommand given");
  } catch (const UsageError& e) {
    io.err << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    io.err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sentidistill
