#pragma once

#include <array>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sentidistill/common.hpp"
#include "sentidistill/datasets.hpp"
#include "sentidistill/io.hpp"
#include "sentidistill/parser.hpp"

namespace sentidistill {

struct PrfScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t fn = 0;

  static PrfScore from_counts(std::size_t tp, std::size_t fp, std::size_t fn);
};

json to_json(const PrfScore& s);

enum class Subset { all, imp, mul };
std::string_view to_string(Subset s);
Subset parse_subset(std::string_view s);

// sentence: imp/mul score every pair of the flagged sentences.
// pair: imp scores only implicit gold pairs; predictions matching a
// non-implicit gold pair are ignored, other predictions in implicit sentences
// are false positives. mul is the same under both policies because every
// pair of a multi-polarity sentence is involved in the multiplicity.
enum class SubsetPolicy { sentence, pair };
std::string_view to_string(SubsetPolicy p);
SubsetPolicy parse_subset_policy(std::string_view s);

// Extraction predictions keyed by sentence_id.
using PredictionSet = std::map<std::string, std::vector<PredPair>>;

// JSONL {sentence_id, pairs: [{first, polarity}]}; a repeated sentence_id or
// a polarity outside the four labels is a ValidationError.
PredictionSet load_predictions(const std::filesystem::path& path);
json prediction_record(std::string_view sentence_id, std::span<const PredPair> pairs);

// Normalized comparison key of a pair's first element.
std::string normalize_first(Task task, std::string_view first);

struct PairScore {
  PrfScore score;
  Subset subset = Subset::all;
  SubsetPolicy policy = SubsetPolicy::sentence;
  std::size_t sentences = 0;
  // TSA gold pairs with a NULL target, which TSA cannot predict.
  std::size_t null_targets_excluded = 0;
};

json to_json(const PairScore& s);

// Exact-match micro P/R/F1 with one-to-one matching: per sentence,
// tp = size of the multiset intersection of normalized (first, polarity).
// Sentences without predictions count as empty predictions; a prediction for
// a sentence_id outside `test` is a ValidationError.
PairScore pair_f1(const PredictionSet& preds, std::span<const FsaSample> test, Task task,
                  Subset subset = Subset::all, SubsetPolicy policy = SubsetPolicy::sentence);

// Zero-shot predictions keyed by (sentence_id, normalized first).
struct ZeroShotKey {
  std::string sentence_id;
  std::string first;
  auto operator<=>(const ZeroShotKey&) const = default;
};
using ZeroShotPredictions = std::map<ZeroShotKey, Polarity>;

// JSONL {sentence_id, first, polarity}.
ZeroShotPredictions load_zeroshot_predictions(const std::filesystem::path& path, Task task);

struct AccuracyScore {
  double accuracy = 0;
  std::size_t correct = 0;
  std::size_t total = 0;
  Subset subset = Subset::all;
};

json to_json(const AccuracyScore& s);

// One instance per distinct (sentence, target) for TSA or (sentence,
// category) for ASA. When the gold polarities of an instance disagree, any of
// them is accepted. Every instance of the subset needs a prediction; missing
// ones are listed in the ValidationError.
AccuracyScore zeroshot_accuracy(const ZeroShotPredictions& preds, std::span<const FsaSample> test,
                                Task task, Subset subset = Subset::all);

struct RunAggregate {
  double mean = 0;
  double stddev = 0;  // population
  std::size_t n = 0;
};

json to_json(const RunAggregate& a);
RunAggregate aggregate_runs(std::span<const double> values);
RunAggregate aggregate_runs(std::span<const PrfScore> scores);

inline constexpr std::array<std::string_view, 6> kHumanEvalDimensions = {
    "ta_precision",        "ta_recall",           "senti_accuracy",
    "reas_persuasiveness", "reas_exhaustiveness", "reas_hallucination"};

struct HumanEvalRecord {
  std::string item_id;
  std::string model;
  std::string domain;
  std::string annotator_id;
  std::array<double, 6> scores{};
};

// JSONL {item_id, model, domain, annotator_id, scores: {dimension: 0|1|2}}.
std::vector<HumanEvalRecord> load_humaneval(const std::filesystem::path& path);

struct HumanEvalRow {
  std::string model;
  std::string domain;
  std::size_t items = 0;
  std::array<double, 6> means{};
  double avg = 0;  // mean of the six dimension means
};

// Averages the two annotators of each item, then averages items per
// (model, domain). Items with other than two annotators, or raw scores
// outside {0, 1, 2}, are rejected with a ValidationError listing them.
std::vector<HumanEvalRow> humaneval_aggregate(std::span<const HumanEvalRecord> records);
json to_json(const HumanEvalRow& r);
std::string humaneval_table(std::span<const HumanEvalRow> rows);

enum class ErrorType { type1, type2, type3 };
std::string_view to_string(ErrorType t);
ErrorType parse_error_type(std::string_view s);

struct ErrorLabel {
  std::string prediction_id;
  ErrorType type = ErrorType::type1;
};

// JSONL {prediction_id, type}.
std::vector<ErrorLabel> load_error_labels(const std::filesystem::path& path);

struct ErrorReport {
  std::size_t total_sampled = 0;
  std::array<std::size_t, 3> counts{};
  std::array<double, 3> proportions{};
};

// proportion = count / total_sampled. Requires labels.size() <= total_sampled
// and distinct prediction ids.
ErrorReport error_report(std::span<const ErrorLabel> labels, std::size_t total_sampled);
json to_json(const ErrorReport& r);
std::string error_table(const ErrorReport& r, std::string_view row_label);

// Aligned text table of P/R/F1 percentages, one row per score.
std::string score_table(std::span<const PairScore> scores, std::string_view dataset);

}  // namespace sentidistill
