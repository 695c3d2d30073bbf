#include "sentidistill/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_set>

namespace sentidistill {

PrfScore PrfScore::from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  PrfScore s;
  s.tp = tp;
  s.fp = fp;
  s.fn = fn;
  s.precision = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  s.recall = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  double pr = s.precision + s.recall;
  s.f1 = pr == 0 ? 0.0 : 2 * s.precision * s.recall / pr;
  return s;
}

json to_json(const PrfScore& s) {
  return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1},
              {"tp", s.tp},               {"fp", s.fp},         {"fn", s.fn}};
}

std::string_view to_string(Subset s) {
  switch (s) {
    case Subset::all: return "all";
    case Subset::imp: return "imp";
    case Subset::mul: return "mul";
  }
  return "all";
}

Subset parse_subset(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "all") return Subset::all;
  if (v == "imp") return Subset::imp;
  if (v == "mul") return Subset::mul;
  throw ValidationError("unknown subset '" + std::string(s) + "' (expected all, imp or mul)");
}

std::string_view to_string(SubsetPolicy p) {
  return p == SubsetPolicy::sentence ? "sentence" : "pair";
}

SubsetPolicy parse_subset_policy(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "sentence") return SubsetPolicy::sentence;
  if (v == "pair") return SubsetPolicy::pair;
  throw ValidationError("unknown subset policy '" + std::string(s) + "'");
}

namespace {

Polarity record_polarity(const json& j, const std::string& where) {
  std::string s = j.get<std::string>();
  Polarity p;
  if (!try_parse_polarity(s, true, p)) throw ValidationError(where + ": unknown polarity '" + s + "'");
  return p;
}

}  // namespace

PredictionSet load_predictions(const std::filesystem::path& path) {
  PredictionSet out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    std::string where = path.string() + ":" + std::to_string(line);
    try {
      std::string id = j.at("sentence_id").get<std::string>();
      std::vector<PredPair> pairs;
      for (const auto& p : j.at("pairs")) {
        pairs.push_back(PredPair{p.at("first").get<std::string>(),
                                 record_polarity(p.at("polarity"), where), false});
      }
      if (!out.emplace(id, std::move(pairs)).second) {
        throw ValidationError(where + ": duplicate sentence_id '" + id + "'");
      }
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
  });
  return out;
}

json prediction_record(std::string_view sentence_id, std::span<const PredPair> pairs) {
  json arr = json::array();
  for (const auto& p : pairs) arr.push_back(json{{"first", p.first}, {"polarity", to_string(p.polarity)}});
  return json{{"sentence_id", sentence_id}, {"pairs", arr}};
}

std::string normalize_first(Task task, std::string_view first) {
  return task == Task::tsa ? normalize_span(first) : normalize_category(first);
}

json to_json(const PairScore& s) {
  json j = to_json(s.score);
  j["subset"] = to_string(s.subset);
  j["policy"] = to_string(s.policy);
  j["sentences"] = s.sentences;
  j["null_targets_excluded"] = s.null_targets_excluded;
  return j;
}

namespace {

using PairKey = std::pair<std::string, Polarity>;

struct GoldKeys {
  std::map<PairKey, std::size_t> flagged;  // scored gold pairs
  std::map<PairKey, std::size_t> other;    // present but not scored (pair policy)
  std::size_t null_targets = 0;
};

GoldKeys gold_keys(const FsaSample& s, Task task, bool implicit_only) {
  GoldKeys g;
  std::map<PairKey, bool> asa;  // ASA pairs collapse; implicit if any copy is
  for (const auto& p : s.pairs) {
    if (task == Task::tsa) {
      if (!p.target) continue;
      if (!p.has_target()) {
        ++g.null_targets;
        continue;
      }
      PairKey k{normalize_span(*p.target), p.polarity};
      ++((!implicit_only || p.is_implicit()) ? g.flagged : g.other)[k];
    } else {
      if (!p.category) continue;
      asa[PairKey{*p.category, p.polarity}] |= p.is_implicit();
    }
  }
  for (const auto& [k, imp] : asa) ++((!implicit_only || imp) ? g.flagged : g.other)[k];
  return g;
}

std::size_t total(const std::map<PairKey, std::size_t>& m) {
  std::size_t n = 0;
  for (const auto& [k, c] : m) n += c;
  return n;
}

}  // namespace

PairScore pair_f1(const PredictionSet& preds, std::span<const FsaSample> test, Task task,
                  Subset subset, SubsetPolicy policy) {
  std::unordered_set<std::string_view> ids;
  for (const auto& s : test) ids.insert(s.sentence_id);
  for (const auto& [id, pairs] : preds) {
    if (!ids.count(id)) throw ValidationError("prediction for unknown sentence_id '" + id + "'");
  }

  PairScore out;
  out.subset = subset;
  out.policy = policy;
  std::size_t tp = 0, fp = 0, fn = 0;
  bool implicit_only = subset == Subset::imp && policy == SubsetPolicy::pair;
  for (const auto& s : test) {
    if (subset == Subset::imp && !s.is_implicit) continue;
    if (subset == Subset::mul && !s.is_multiple) continue;
    ++out.sentences;
    GoldKeys gold = gold_keys(s, task, implicit_only);
    out.null_targets_excluded += gold.null_targets;

    std::map<PairKey, std::size_t> pred;
    if (auto it = preds.find(s.sentence_id); it != preds.end()) {
      for (const auto& p : it->second) ++pred[PairKey{normalize_first(task, p.first), p.polarity}];
    }
    std::size_t matched = 0, ignored = 0;
    for (const auto& [k, n] : pred) {
      std::size_t m = 0;
      if (auto g = gold.flagged.find(k); g != gold.flagged.end()) m = std::min(n, g->second);
      matched += m;
      if (auto o = gold.other.find(k); o != gold.other.end()) ignored += std::min(n - m, o->second);
    }
    tp += matched;
    fp += total(pred) - matched - ignored;
    fn += total(gold.flagged) - matched;
  }
  out.score = PrfScore::from_counts(tp, fp, fn);
  return out;
}

ZeroShotPredictions load_zeroshot_predictions(const std::filesystem::path& path, Task task) {
  ZeroShotPredictions out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    std::string where = path.string() + ":" + std::to_string(line);
    try {
      ZeroShotKey key{j.at("sentence_id").get<std::string>(),
                      normalize_first(task, j.at("first").get<std::string>())};
      if (!out.emplace(key, record_polarity(j.at("polarity"), where)).second) {
        throw ValidationError(where + ": duplicate prediction for (" + key.sentence_id + ", " +
                              key.first + ")");
      }
    } catch (const json::exception& e) {
      throw ValidationError(where + ": " + e.what());
    }
  });
  return out;
}

json to_json(const AccuracyScore& s) {
  return json{{"accuracy", s.accuracy}, {"correct", s.correct}, {"total", s.total},
              {"subset", to_string(s.subset)}};
}

namespace {

std::map<std::string, std::set<Polarity>> zeroshot_instances(const FsaSample& s, Task task) {
  std::map<std::string, std::set<Polarity>> out;
  for (const auto& p : s.pairs) {
    if (task == Task::tsa && p.has_target()) out[normalize_span(*p.target)].insert(p.polarity);
    if (task == Task::asa && p.category) out[*p.category].insert(p.polarity);
  }
  return out;
}

}  // namespace

AccuracyScore zeroshot_accuracy(const ZeroShotPredictions& preds, std::span<const FsaSample> test,
                                Task task, Subset subset) {
  AccuracyScore out;
  out.subset = subset;
  std::set<ZeroShotKey> known;
  std::vector<std::string> missing;
  for (const auto& s : test) {
    bool included = subset == Subset::all || (subset == Subset::imp && s.is_implicit) ||
                    (subset == Subset::mul && s.is_multiple);
    for (const auto& [first, gold] : zeroshot_instances(s, task)) {
      ZeroShotKey key{s.sentence_id, first};
      known.insert(key);
      if (!included) continue;
      auto it = preds.find(key);
      if (it == preds.end()) {
        missing.push_back("(" + s.sentence_id + ", " + first + ")");
        continue;
      }
      ++out.total;
      out.correct += gold.count(it->second);
    }
  }
  if (!missing.empty()) {
    std::string msg = std::to_string(missing.size()) + " instance(s) have no prediction:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) msg += " " + missing[i];
    if (missing.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }
  for (const auto& [key, pol] : preds) {
    if (!known.count(key)) {
      throw ValidationError("prediction for unknown instance (" + key.sentence_id + ", " +
                            key.first + ")");
    }
  }
  out.accuracy = out.total == 0 ? 0.0 : static_cast<double>(out.correct) / static_cast<double>(out.total);
  return out;
}

json to_json(const RunAggregate& a) {
  return json{{"mean", a.mean}, {"stddev", a.stddev}, {"n", a.n}};
}

RunAggregate aggregate_runs(std::span<const double> values) {
  if (values.empty()) throw ValidationError("cannot aggregate an empty list of runs");
  RunAggregate a;
  a.n = values.size();
  double sum = 0;
  for (double v : values) sum += v;
  a.mean = sum / static_cast<double>(a.n);
  double ss = 0;
  for (double v : values) ss += (v - a.mean) * (v - a.mean);
  a.stddev = std::sqrt(ss / static_cast<double>(a.n));
  return a;
}

RunAggregate aggregate_runs(std::span<const PrfScore> scores) {
  std::vector<double> f1;
  f1.reserve(scores.size());
  for (const auto& s : scores) f1.push_back(s.f1);
  return aggregate_runs(std::span<const double>(f1));
}

std::vector<HumanEvalRecord> load_humaneval(const std::filesystem::path& path) {
  std::vector<HumanEvalRecord> out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      HumanEvalRecord r;
      r.item_id = j.at("item_id").get<std::string>();
      r.model = canonical_teacher(j.at("model").get<std::string>());
      r.domain = j.at("domain").get<std::string>();
      r.annotator_id = j.at("annotator_id").get<std::string>();
      const json& scores = j.at("scores");
      for (std::size_t d = 0; d < kHumanEvalDimensions.size(); ++d) {
        r.scores[d] = scores.at(std::string(kHumanEvalDimensions[d])).get<double>();
      }
      out.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

std::vector<HumanEvalRow> humaneval_aggregate(std::span<const HumanEvalRecord> records) {
  struct Item {
    const HumanEvalRecord* first = nullptr;
    std::vector<const HumanEvalRecord*> records;
  };
  std::map<std::string, Item> items;
  std::vector<std::string> problems;
  for (const auto& r : records) {
    for (double v : r.scores) {
      if (v != 0 && v != 1 && v != 2) {
        problems.push_back(r.item_id + " (annotator " + r.annotator_id + " score " +
                           format_fixed2(v) + " not in {0, 1, 2})");
        break;
      }
    }
    auto& item = items[r.item_id];
    if (!item.first) item.first = &r;
    if (item.first->model != r.model || item.first->domain != r.domain) {
      problems.push_back(r.item_id + " (mixed model or domain)");
    }
    item.records.push_back(&r);
  }
  for (const auto& [id, item] : items) {
    std::set<std::string> annotators;
    for (const auto* r : item.records) annotators.insert(r->annotator_id);
    if (item.records.size() != 2 || annotators.size() != 2) {
      problems.push_back(id + " (" + std::to_string(item.records.size()) + " records from " +
                         std::to_string(annotators.size()) + " annotators)");
    }
  }
  if (!problems.empty()) {
    std::string msg = "invalid human-evaluation items:";
    for (std::size_t i = 0; i < problems.size() && i < 20; ++i) msg += " " + problems[i] + ";";
    if (problems.size() > 20) msg += " ...";
    throw ValidationError(msg);
  }

  std::map<std::pair<std::string, std::string>, HumanEvalRow> rows;
  for (const auto& [id, item] : items) {
    auto& row = rows[{item.first->model, item.first->domain}];
    row.model = item.first->model;
    row.domain = item.first->domain;
    ++row.items;
    for (std::size_t d = 0; d < 6; ++d) {
      row.means[d] += (item.records[0]->scores[d] + item.records[1]->scores[d]) / 2.0;
    }
  }
  std::vector<HumanEvalRow> out;
  for (auto& [key, row] : rows) {
    double sum = 0;
    for (auto& m : row.means) {
      m /= static_cast<double>(row.items);
      sum += m;
    }
    row.avg = sum / 6.0;
    out.push_back(row);
  }
  return out;
}

json to_json(const HumanEvalRow& r) {
  json j{{"model", r.model}, {"domain", r.domain}, {"items", r.items}, {"avg", r.avg}};
  for (std::size_t d = 0; d < 6; ++d) j[std::string(kHumanEvalDimensions[d])] = r.means[d];
  return j;
}

std::string humaneval_table(std::span<const HumanEvalRow> rows) {
  std::ostringstream out;
  char line[256];
  std::snprintf(line, sizeof line, "%-14s %-12s %6s %6s %6s %6s %6s %6s %6s\n", "Model", "Domain",
                "TA-P", "TA-R", "Senti", "Reas-P", "Reas-E", "Reas-H", "Avg");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %-12s", r.model.c_str(), r.domain.c_str());
    out << line;
    for (double m : r.means) {
      std::snprintf(line, sizeof line, " %6s", format_fixed2(m).c_str());
      out << line;
    }
    std::snprintf(line, sizeof line, " %6s\n", format_fixed2(r.avg).c_str());
    out << line;
  }
  return out.str();
}

std::string_view to_string(ErrorType t) {
  switch (t) {
    case ErrorType::type1: return "type1";
    case ErrorType::type2: return "type2";
    case ErrorType::type3: return "type3";
  }
  return "type1";
}

ErrorType parse_error_type(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "type1" || v == "1" || v == "type 1") return ErrorType::type1;
  if (v == "type2" || v == "2" || v == "type 2") return ErrorType::type2;
  if (v == "type3" || v == "3" || v == "type 3") return ErrorType::type3;
  throw ValidationError("unknown error type '" + std::string(s) + "'");
}

std::vector<ErrorLabel> load_error_labels(const std::filesystem::path& path) {
  std::vector<ErrorLabel> out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      const json& t = j.at("type");
      std::string type = t.is_number() ? std::to_string(t.get<int>()) : t.get<std::string>();
      out.push_back(ErrorLabel{j.at("prediction_id").get<std::string>(), parse_error_type(type)});
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

ErrorReport error_report(std::span<const ErrorLabel> labels, std::size_t total_sampled) {
  if (labels.size() > total_sampled) {
    throw ValidationError(std::to_string(labels.size()) + " labels exceed the " +
                          std::to_string(total_sampled) + " sampled predictions");
  }
  std::unordered_set<std::string> ids;
  ErrorReport r;
  r.total_sampled = total_sampled;
  for (const auto& l : labels) {
    if (!ids.insert(l.prediction_id).second) {
      throw ValidationError("prediction '" + l.prediction_id + "' is labeled twice");
    }
    ++r.counts[static_cast<std::size_t>(l.type)];
  }
  for (std::size_t t = 0; t < 3; ++t) {
    r.proportions[t] = total_sampled == 0
                           ? 0.0
                           : static_cast<double>(r.counts[t]) / static_cast<double>(total_sampled);
  }
  return r;
}

json to_json(const ErrorReport& r) {
  json types = json::object();
  for (std::size_t t = 0; t < 3; ++t) {
    types[std::string(to_string(static_cast<ErrorType>(t)))] =
        json{{"count", r.counts[t]},
             {"proportion", r.proportions[t]},
             {"percent", format_percent(r.proportions[t])}};
  }
  return json{{"total_sampled", r.total_sampled}, {"types", types}};
}

std::string error_table(const ErrorReport& r, std::string_view row_label) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-28s %8s %8s %8s %8s\n", "", "Type 1", "Type 2", "Type 3",
                "Sampled");
  out << line;
  std::snprintf(line, sizeof line, "%-28s %8s %8s %8s %8zu\n", std::string(row_label).c_str(),
                format_percent(r.proportions[0]).c_str(), format_percent(r.proportions[1]).c_str(),
                format_percent(r.proportions[2]).c_str(), r.total_sampled);
  out << line;
  return out.str();
}

std::string score_table(std::span<const PairScore> scores, std::string_view dataset) {
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %-6s %-8s %7s %7s %7s %7s %7s %7s\n", "Dataset", "Subset",
                "Policy", "P", "R", "F1", "TP", "FP", "FN");
  out << line;
  for (const auto& s : scores) {
    std::snprintf(line, sizeof line, "%-14s %-6s %-8s %7s %7s %7s %7zu %7zu %7zu\n",
                  std::string(dataset).c_str(), std::string(to_string(s.subset)).c_str(),
                  std::string(to_string(s.policy)).c_str(),
                  format_percent(s.score.precision).c_str(), format_percent(s.score.recall).c_str(),
                  format_percent(s.score.f1).c_str(), s.score.tp, s.score.fp, s.score.fn);
    out << line;
  }
  return out.str();
}

}  // namespace sentidistill
