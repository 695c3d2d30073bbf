// Acceptance checks. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <regex>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/chi_squared.hpp>

#include "support.hpp"

using namespace sentidistill;
using testsupport::run_cli;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

struct Check {
  bool ok = true;
  std::ostringstream detail;

  void expect(bool cond, const std::string& what) {
    if (!cond && ok) detail << what;
    ok = ok && cond;
  }
};

int failures = 0;

void criterion(const std::string& name, double limit_seconds, const std::function<void(Check&)>& body) {
  Check c;
  auto start = std::chrono::steady_clock::now();
  try {
    body(c);
  } catch (const std::exception& e) {
    c.ok = false;
    c.detail << "exception: " << e.what();
  }
  double elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  if (elapsed >= limit_seconds) {
    if (c.ok) c.detail << "took " << elapsed << " s, limit " << limit_seconds << " s";
    c.ok = false;
  }
  char timing[64];
  std::snprintf(timing, sizeof timing, "%.2fs/%.0fs", elapsed, limit_seconds);
  std::cout << (c.ok ? "PASS " : "FAIL ") << name << " [" << timing << "]";
  if (!c.detail.str().empty()) std::cout << " " << c.detail.str();
  std::cout << std::endl;
  failures += !c.ok;
}

std::string p(const fs::path& path) { return path.string(); }

void cli(Check& c, const std::vector<std::string>& args, const CliContext& ctx = {}) {
  auto r = run_cli(args, ctx);
  if (r.status != 0) {
    std::string joined;
    for (const auto& a : args) joined += a + " ";
    throw std::runtime_error("command failed (" + std::to_string(r.status) + "): " + joined + r.err);
  }
  (void)c;
}

// ---- metric oracle ----

void metric_oracle(Check& c) {
  std::mt19937_64 rng(20240611);
  const std::vector<std::string> firsts{"food", "service", "wine list", "staff", "price"};
  const std::vector<Polarity> pols{Polarity::negative, Polarity::neutral, Polarity::positive};
  auto draw = [&](std::size_t max) {
    std::vector<std::pair<std::string, Polarity>> out(std::uniform_int_distribution<std::size_t>(0, max)(rng));
    for (auto& pr : out) {
      pr.first = firsts[std::uniform_int_distribution<std::size_t>(0, firsts.size() - 1)(rng)];
      pr.second = pols[std::uniform_int_distribution<std::size_t>(0, pols.size() - 1)(rng)];
    }
    return out;
  };

  std::vector<FsaSample> all;
  PredictionSet all_preds;
  std::size_t tp_sum = 0, np_sum = 0, ng_sum = 0;
  for (int i = 0; i < 1000; ++i) {
    auto gold = draw(5);
    auto pred = draw(5);
    FsaSample s;
    s.sentence_id = "s" + std::to_string(i);
    s.sentence = "food service wine list staff price";
    for (const auto& [f, pol] : gold) {
      GoldPair g;
      g.target = f;
      g.polarity = pol;
      s.pairs.push_back(g);
    }
    std::vector<PredPair> pp;
    for (const auto& [f, pol] : pred) pp.push_back(PredPair{f, pol, false});
    PredictionSet one{{s.sentence_id, pp}};
    all_preds[s.sentence_id] = pp;
    all.push_back(s);

    std::size_t tp = testsupport::brute_force_matches(gold, pred);
    auto got = pair_f1(one, std::span<const FsaSample>(&all.back(), 1), Task::tsa).score;
    double prec = pred.empty() ? 0.0 : static_cast<double>(tp) / pred.size();
    double rec = gold.empty() ? 0.0 : static_cast<double>(tp) / gold.size();
    double f1 = prec + rec > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
    c.expect(got.tp == tp && got.fp == pred.size() - tp && got.fn == gold.size() - tp,
             "count mismatch on instance " + std::to_string(i));
    c.expect(std::abs(got.precision - prec) < 1e-12 && std::abs(got.recall - rec) < 1e-12 &&
                 std::abs(got.f1 - f1) < 1e-12,
             "score mismatch on instance " + std::to_string(i));
    tp_sum += tp;
    np_sum += pred.size();
    ng_sum += gold.size();
  }
  auto micro = pair_f1(all_preds, all, Task::tsa).score;
  c.expect(micro.tp == tp_sum && micro.fp == np_sum - tp_sum && micro.fn == ng_sum - tp_sum,
           "micro counts differ from summed oracle counts");
  c.detail << "1000 instances, micro tp=" << micro.tp;
}

void hand_f1(Check& c) {
  FsaSample s;
  s.sentence_id = "h1";
  s.sentence = "The pasta was great but the waiter was rude and the music loud.";
  auto gold = [](const char* t, Polarity pol) {
    GoldPair g;
    g.target = t;
    g.polarity = pol;
    return g;
  };
  s.pairs = {gold("pasta", Polarity::positive), gold("waiter", Polarity::negative),
             gold("music", Polarity::negative)};
  PredictionSet preds{{"h1", {PredPair{"pasta", Polarity::positive, false},
                              PredPair{"waiter", Polarity::positive, false}}}};
  auto score = pair_f1(preds, std::span<const FsaSample>(&s, 1), Task::tsa).score;
  c.expect(std::abs(score.precision - 0.5) <= 1e-9, "precision");
  c.expect(std::abs(score.recall - 1.0 / 3.0) <= 1e-9, "recall");
  c.expect(std::abs(score.recall - 0.3333) < 5e-5, "recall rounding");
  c.expect(std::abs(score.f1 - 0.4) <= 1e-9, "f1");
  c.detail << "P=" << score.precision << " R=" << score.recall << " F1=" << score.f1;
}

// ---- parser ----

std::size_t multiset_overlap(std::vector<std::string> a, std::vector<std::string> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::vector<std::string> common;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
  return common.size();
}

std::string key(const Quadruple& q) {
  return q.target.value_or("<null>") + "\x1f" + q.aspect + "\x1f" + std::string(surface_form(q.sentiment)) + "\x1f" +
         q.reasoning;
}

Quadruple expected_quad(const json& e) {
  Quadruple q;
  if (!e.at("target").is_null()) q.target = e.at("target").get<std::string>();
  q.aspect = e.at("aspect").get<std::string>();
  q.sentiment = five_level_from_name(e.at("sentiment").get<std::string>());
  q.reasoning = e.at("reasoning").get<std::string>();
  return q;
}

std::string key(const PredPair& p) { return p.first + "\x1f" + std::string(to_string(p.polarity)); }

template <typename T>
std::vector<std::string> keys(const std::vector<T>& items) {
  std::vector<std::string> out;
  for (const auto& i : items) out.push_back(key(i));
  return out;
}

void parser_checks(Check& c) {
  std::mt19937_64 rng(7);
  std::size_t identical = 0;
  for (int i = 0; i < 1000; ++i) {
    auto quads = testsupport::random_quadruples(rng, 6);
    auto parsed = parse_analysis(serialize_analysis(quads));
    const auto* ok = std::get_if<std::vector<Quadruple>>(&parsed);
    identical += ok && *ok == quads;
  }
  c.expect(identical == 1000, "round trip " + std::to_string(identical) + "/1000");

  std::size_t records = 0, aborts = 0, expected_blocks = 0, salvaged = 0, extraneous = 0;
  read_jsonl(testsupport::fixture_dir() / "noisy_completions.jsonl", [&](const json& rec, std::size_t) {
    ++records;
    std::vector<std::string> expected;
    std::vector<std::string> got;
    std::vector<std::string> clean;
    // Fixture fields are read outside the guarded region so that only parser
    // exceptions count as aborts.
    const std::string text = rec.at("text").get<std::string>();
    const std::string original = rec.value("clean", json()).is_string() ? rec.at("clean").get<std::string>() : "";
    const bool analysis = rec.at("kind") == "analysis";
    Task task = analysis ? Task::tsa : parse_task(rec.at("task").get<std::string>());
    for (const auto& e : rec.at("expected")) {
      expected.push_back(analysis ? key(expected_quad(e))
                                  : key(PredPair{e.at("first").get<std::string>(),
                                                 parse_polarity(e.at("polarity").get<std::string>()), false}));
    }
    try {
      if (analysis) {
        got = keys(usable_items(parse_analysis(text)));
        if (!original.empty()) clean = keys(usable_items(parse_analysis(original)));
      } else {
        got = keys(usable_items(parse_pair_list(text, task)));
        if (!original.empty()) clean = keys(usable_items(parse_pair_list(original, task)));
      }
    } catch (const std::exception&) {
      ++aborts;
      return;
    }
    expected_blocks += expected.size();
    salvaged += multiset_overlap(expected, got);
    // Anything salvaged must also come out of the uncorrupted original.
    if (!clean.empty()) extraneous += got.size() - multiset_overlap(got, clean);
  });
  double rate = expected_blocks ? static_cast<double>(salvaged) / expected_blocks : 0.0;
  c.expect(records >= 50, "fixture has only " + std::to_string(records) + " records");
  c.expect(aborts == 0, std::to_string(aborts) + " aborts");
  c.expect(rate >= 0.90, "salvage rate " + std::to_string(rate));
  c.expect(extraneous == 0, std::to_string(extraneous) + " salvaged items not in the clean parse");
  c.detail << "round trip " << identical << "/1000, " << records << " noisy records, salvage "
           << salvaged << "/" << expected_blocks;
}

// ---- sampler ----

void sampler_checks(Check& c) {
  TempDir dir;
  auto pool = testsupport::balanced_pool(500);
  c.expect(pool.size() == 2500, "pool size");

  for (bool refill : {false, true}) {
    auto only3 = stratified_sample(pool, SamplingScheme::parse("R00100"), refill ? 2000 : 500, 11, refill);
    bool all3 = !only3.reviews.empty();
    for (const auto& r : only3.reviews) all3 = all3 && r.stars == 3;
    c.expect(all3, "R00100 emitted a non-3-star review");
  }

  const std::array<double, 5> weights{1, 2, 4, 2, 1};
  auto res = stratified_sample(pool, SamplingScheme::parse("R12421"), 10000, 42, true);
  c.expect(res.reviews.size() == 10000, "R12421 size " + std::to_string(res.reviews.size()));
  std::array<double, 5> counts{};
  for (const auto& r : res.reviews) counts[r.stars - 1] += 1;
  double stat = 0;
  for (int k = 0; k < 5; ++k) {
    double e = 10000.0 * weights[k] / 10.0;
    stat += (counts[k] - e) * (counts[k] - e) / e;
  }
  double pval = boost::math::cdf(boost::math::complement(boost::math::chi_squared(4.0), stat));
  c.expect(pval > 0.001, "chi-square p=" + std::to_string(pval));

  write_reviews(dir / "a.jsonl", res.reviews);
  write_reviews(dir / "b.jsonl",
                stratified_sample(pool, SamplingScheme::parse("R12421"), 10000, 42, true).reviews);
  c.expect(sha256_file(dir / "a.jsonl") == sha256_file(dir / "b.jsonl"), "reruns differ");

  // The CLI path is byte-deterministic as well.
  write_reviews(dir / "pool.jsonl", pool);
  for (const char* out : {"c.jsonl", "d.jsonl"}) {
    cli(c, {"sample", "--reviews", p(dir / "pool.jsonl"), "--out", p(dir / out), "--scheme", "R12421",
            "--n", "1000", "--seed", "5"});
  }
  c.expect(sha256_file(dir / "c.jsonl") == sha256_file(dir / "d.jsonl"), "CLI reruns differ");
  char buf[128];
  std::snprintf(buf, sizeof buf, "counts %.0f/%.0f/%.0f/%.0f/%.0f, chi2=%.2f p=%.3f", counts[0], counts[1],
                counts[2], counts[3], counts[4], stat, pval);
  c.detail << buf;
}

// ---- dataset statistics ----

struct Expected {
  std::size_t sent;
  std::optional<std::size_t> trg, asp, imp;
  std::size_t mul;
};

struct DatasetCase {
  std::string name;
  testsupport::XmlFormat format;
  Domain domain;
  Expected train, dev, test;
};

testsupport::SplitSpec spec_of(const Expected& e, bool annotate) {
  return testsupport::SplitSpec{e.sent, e.trg.value_or(0), e.asp.value_or(0), e.imp.value_or(0), e.mul, annotate};
}

void compare_row(Check& c, const json& row, const Expected& e, const std::string& label) {
  auto opt = [](const json& v) { return v.is_null() ? std::optional<std::size_t>() : v.get<std::size_t>(); };
  bool same = row.at("sentences").get<std::size_t>() == e.sent && opt(row.at("targets")) == e.trg &&
              opt(row.at("aspects")) == e.asp && opt(row.at("implicit")) == e.imp &&
              row.at("multiple").get<std::size_t>() == e.mul;
  c.expect(same, label + " row " + row.dump());
}

void table2_checks(Check& c) {
  using F = testsupport::XmlFormat;
  const std::vector<DatasetCase> bases{
      {"tsa_rest14", F::semeval14, Domain::restaurant,
       {2432, 2972, {}, {}, 277}, {609, 721, {}, {}, 78}, {800, 1134, {}, 192, 85}},
      {"tsa_laptop14", F::semeval14, Domain::laptop,
       {2436, 1922, {}, {}, 148}, {609, 436, {}, {}, 34}, {800, 654, {}, 133, 40}},
      {"asa_rest16", F::semeval16, Domain::restaurant,
       {1600, 1386, 1823, {}, 114}, {400, 386, 477, {}, 29}, {676, 623, 751, 199, 42}},
      {"asa_laptop16", F::semeval16_no_targets, Domain::laptop,
       {2000, {}, 2349, {}, 126}, {500, {}, 560, {}, 25}, {808, {}, 801, 250, 35}},
  };
  const std::map<std::string, Expected> hard{{"rest_hard", {340, 383, 504, 285, 104}},
                                             {"laptop_hard", {237, 290, 382, 212, 59}}};
  TempDir dir;
  auto root = dir / "datasets";

  for (const auto& [name, e] : hard) {
    Domain d = name == "rest_hard" ? Domain::restaurant : Domain::laptop;
    testsupport::write_semeval_split(dir / (name + ".xml"), F::semeval16, name + "-", d, spec_of(e, true), nullptr,
                                     {}, dir / (name + ".ow.jsonl"));
    cli(c, {"convert", "--format", "semeval16", "--input", p(dir / (name + ".xml")), "--origin", "hard_set",
            "--opinion-words", p(dir / (name + ".ow.jsonl")), "--out", p(root / name)});
  }

  for (const auto& b : bases) {
    std::string fmt = b.format == F::semeval14 ? "semeval14" : "semeval16";
    auto dev = spec_of(b.dev, false);
    testsupport::write_semeval_split(dir / (b.name + ".train.xml"), b.format, b.name + "-tr", b.domain,
                                     spec_of(b.train, false), &dev, dir / (b.name + ".dev_ids.txt"));
    testsupport::write_semeval_split(dir / (b.name + ".test.xml"), b.format, b.name + "-te", b.domain,
                                     spec_of(b.test, true), nullptr, {}, dir / (b.name + ".test.ow.jsonl"));
    cli(c, {"convert", "--format", fmt, "--input", p(dir / (b.name + ".train.xml")), "--split", "train",
            "--dev-ids", p(dir / (b.name + ".dev_ids.txt")), "--out", p(root / b.name)});
    cli(c, {"convert", "--format", fmt, "--input", p(dir / (b.name + ".test.xml")), "--split", "test",
            "--opinion-words", p(dir / (b.name + ".test.ow.jsonl")), "--out", p(root / b.name)});

    std::string hard_name = b.domain == Domain::restaurant ? "rest_hard" : "laptop_hard";
    auto out = dir / (b.name + ".stats.json");
    cli(c, {"stats", b.name, "--datasets-dir", p(root), "--merge-hard", hard_name, "--out", p(out)});
    auto rows = json::parse(read_file(out)).at("rows");
    if (rows.size() != 5) {
      c.expect(false, b.name + ": expected 5 stats rows, got " + std::to_string(rows.size()));
      continue;
    }
    compare_row(c, rows[0], b.train, b.name + " train");
    compare_row(c, rows[1], b.dev, b.name + " dev");
    compare_row(c, rows[2], b.test, b.name + " test");
    compare_row(c, rows[3], hard.at(hard_name), hard_name);

    // Merged test = base test + hard test, column by column.
    const json& base = rows[2];
    const json& h = rows[3];
    const json& merged = rows[4];
    for (const char* col : {"sentences", "targets", "aspects", "implicit", "multiple"}) {
      if (base.at(col).is_null() || h.at(col).is_null()) continue;
      c.expect(merged.at(col).get<std::size_t>() == base.at(col).get<std::size_t>() + h.at(col).get<std::size_t>(),
               b.name + " merged " + col + " not additive: " + merged.dump());
    }
  }
  c.detail << "4 datasets x 3 splits, 2 hard sets, 4 merged tests";
}

// ---- ablation purity ----

void purity_checks(Check& c) {
  std::mt19937_64 rng(99);
  std::vector<AnalysisRecord> records;
  for (int i = 0; i < 1000; ++i) {
    records.push_back(AnalysisRecord{"rev-" + std::to_string(i), "review text number " + std::to_string(i),
                                     "gpt35", Source::yelp, testsupport::random_quadruples(rng, 4)});
  }
  const std::regex reasoning_label(R"((^|\n)\s*reasoning\s*:)", std::regex::icase);
  const std::regex surface(R"(\b(very negative|negative|mild sentiment|mild|positive|very positive)\b)",
                           std::regex::icase);
  const std::regex sentiment_label(R"((^|\n)Sentiment: )");

  std::size_t no_r = 0, no_l = 0, r_hits = 0, l_hits = 0, labelled = 0;
  BuildReport report;
  build_pairs(records, {}, Variant::anl_no_r, {}, report, [&](const CorpusPair& pr) {
    ++no_r;
    r_hits += std::regex_search(pr.u, reasoning_label);
    labelled += std::regex_search(pr.u, sentiment_label);
  });
  build_pairs(records, {}, Variant::anl_no_l, {}, report, [&](const CorpusPair& pr) {
    ++no_l;
    l_hits += std::regex_search(pr.u, surface);
  });
  c.expect(no_r == 1000 && no_l == 1000, "expected 1000 pairs per variant");
  c.expect(r_hits == 0, std::to_string(r_hits) + " anl_no_r pairs carry a reasoning label");
  c.expect(l_hits == 0, std::to_string(l_hits) + " anl_no_l pairs carry a sentiment surface form");
  c.expect(labelled == no_r, "anl_no_r pairs lost their labels");
  c.detail << no_r << " + " << no_l << " pairs scanned";
}

// ---- human evaluation ----

void humaneval_checks(Check& c) {
  const std::array<double, 6> target{1.88, 1.56, 1.54, 1.69, 1.45, 2.0};
  auto records = testsupport::humaneval_fixture("gpt35", "restaurant", target, 100);
  auto rows = humaneval_aggregate(records);
  c.expect(rows.size() == 1, "expected one row");
  if (rows.empty()) return;
  const auto& r = rows[0];
  for (std::size_t d = 0; d < 6; ++d) {
    c.expect(std::abs(r.means[d] - target[d]) <= 0.005, "dimension " + std::to_string(d));
  }
  c.expect(std::abs(r.avg - 1.69) <= 0.005, "avg " + std::to_string(r.avg));
  c.detail << "avg " << r.avg;
}

// ---- budget and concurrency ----

void budget_checks(Check& c) {
  std::mt19937_64 rng(31337);
  for (int cfg = 0; cfg < 10; ++cfg) {
    std::size_t n = std::uniform_int_distribution<std::size_t>(1, 300)(rng);
    std::optional<std::size_t> budget;
    if (cfg % 3 != 0) budget = std::uniform_int_distribution<std::size_t>(0, 2 * n)(rng);
    std::size_t max_in_flight = std::uniform_int_distribution<std::size_t>(1, 12)(rng);
    int flaky = std::uniform_int_distribution<int>(0, 4)(rng);
    auto latency = std::chrono::microseconds(std::uniform_int_distribution<int>(0, 400)(rng));

    std::vector<GenRequest> requests;
    for (std::size_t i = 0; i < n; ++i) {
      requests.push_back(GenRequest{"req-" + std::to_string(i), "prompt " + std::to_string(i), "m", 16, 0.0, "gpt35"});
    }
    testsupport::MockEndpoint endpoint(
        [flaky](const GenRequest& req, int call) {
          if (flaky && call == 1 && fnv1a64(req.request_id) % 5 < static_cast<unsigned>(flaky)) {
            return EndpointReply{EndpointReply::Kind::transient, {}, "busy"};
          }
          return testsupport::echo_reply(req, call);
        },
        latency);
    BatchOptions opts;
    opts.max_in_flight = max_in_flight;
    opts.budget = budget;
    opts.sleep = [](std::chrono::milliseconds) {};
    std::size_t results = 0;
    auto summary = generate_batch(requests, opts, endpoint, nullptr, [&](const GenResult&) { ++results; });
    std::size_t want = budget ? std::min(*budget, n) : n;
    std::string where = "config " + std::to_string(cfg) + ": ";
    c.expect(summary.issued == want, where + "issued " + std::to_string(summary.issued) + " want " + std::to_string(want));
    c.expect(endpoint.distinct_requests() == want, where + "endpoint saw " + std::to_string(endpoint.distinct_requests()));
    c.expect(summary.over_budget == n - want, where + "over_budget");
    c.expect(endpoint.peak_in_flight() <= max_in_flight,
             where + "peak " + std::to_string(endpoint.peak_in_flight()) + " > " + std::to_string(max_in_flight));
    c.expect(results == n, where + "results");
  }
  c.detail << "10 configs";
}

// ---- end to end ----

void end_to_end(Check& c) {
  TempDir dir;
  auto pool = testsupport::balanced_pool(40);
  write_reviews(dir / "pool.jsonl", pool);
  std::map<std::string, RawReview> by_id;
  for (const auto& r : pool) by_id[r.id] = r;
  const auto cache = dir / "cache";

  // Fill the response cache once from a canned teacher.
  CliContext seed_ctx;
  seed_ctx.sleep = [](std::chrono::milliseconds) {};
  seed_ctx.make_endpoint = [&](const EndpointConfig&) -> std::unique_ptr<Endpoint> {
    return std::make_unique<testsupport::MockEndpoint>([&](const GenRequest& req, int) {
      const auto& review = by_id.at(req.request_id.substr(0, req.request_id.find('#')));
      bool rewrite = req.request_id.find("#rw") != std::string::npos;
      return EndpointReply{EndpointReply::Kind::ok,
                           rewrite ? testsupport::canned_rewrite(review) : testsupport::canned_analysis(review), {}};
    });
  };
  auto seed_sample = dir / "seed_sample.jsonl";
  cli(c, {"sample", "--reviews", p(dir / "pool.jsonl"), "--out", p(seed_sample), "--scheme", "R11111", "--n", "100",
          "--seed", "9"});
  for (const char* kind : {"analysis", "rewriting"}) {
    cli(c, {"generate", "--reviews", p(seed_sample), "--out", p(dir / (std::string("seed_") + kind + ".jsonl")),
            "--kind", kind, "--endpoint", "http://teacher", "--cache", p(cache)},
        seed_ctx);
  }
  auto cache_before = testsupport::tree_checksums(cache);

  auto work = dir / "work";
  std::vector<std::map<std::string, std::string>> runs;
  for (int run = 0; run < 2; ++run) {
    fs::remove_all(work);
    fs::create_directories(work);
    cli(c, {"sample", "--reviews", p(dir / "pool.jsonl"), "--out", p(work / "sample.jsonl"), "--scheme", "R11111",
            "--n", "100", "--seed", "9"});
    // No endpoint: every completion has to come from the cache.
    for (const char* kind : {"analysis", "rewriting"}) {
      auto r = run_cli({"generate", "--reviews", p(work / "sample.jsonl"), "--out",
                        p(work / (std::string("gen_") + kind + ".jsonl")), "--kind", kind, "--cache", p(cache)});
      c.expect(r.status == 0, std::string("generate ") + kind + " failed: " + r.err);
      c.expect(r.out.find("cached 100, issued 0") != std::string::npos,
               std::string("generate ") + kind + " was not served from the cache: " + r.out);
    }
    cli(c, {"parse", "--generations", p(work / "gen_analysis.jsonl"), "--out", p(work / "quads.jsonl")});
    cli(c, {"build-corpus", "--variant", "merged", "--teacher", "gpt35", "--reviews", p(work / "sample.jsonl"),
            "--analyses", p(work / "quads.jsonl"), "--rewrites", p(work / "gen_rewriting.jsonl"), "--out",
            p(work / "corpus"), "--shard-size", "64"});
    cli(c, {"stats", "--corpus", p(work / "corpus"), "--out", p(work / "stats.json")});
    runs.push_back(testsupport::tree_checksums(work));
  }
  c.expect(runs[0] == runs[1], "artifacts differ between runs");
  c.expect(testsupport::tree_checksums(cache) == cache_before, "cache changed during cached runs");
  auto total = json::parse(read_file(work / "stats.json")).at("total").get<std::size_t>();
  c.expect(total > 100, "corpus has only " + std::to_string(total) + " pairs");
  c.detail << runs[0].size() << " artifacts identical, " << total << " corpus pairs";
}

}  // namespace

int main() {
  criterion("metric oracle equivalence", 10, metric_oracle);
  criterion("hand-verified F1 case", 10, hand_f1);
  criterion("parser round trip and salvage", 10, parser_checks);
  criterion("sampler schemes and determinism", 30, sampler_checks);
  criterion("dataset statistics", 10, table2_checks);
  criterion("ablation purity", 5, purity_checks);
  criterion("human evaluation aggregation", 5, humaneval_checks);
  criterion("budget and concurrency", 30, budget_checks);
  criterion("end-to-end determinism", 60, end_to_end);
  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
