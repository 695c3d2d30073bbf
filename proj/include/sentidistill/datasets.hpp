#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sentidistill/common.hpp"
#include "sentidistill/io.hpp"

namespace sentidistill {

// One gold opinion. TSA data carries a target, ASA data a category, the hard
// sets usually both. `target` holds kNullTarget when the target is only
// inferable from context.
struct GoldPair {
  std::optional<std::string> target;
  std::optional<std::string> category;  // normalized with normalize_category
  Polarity polarity = Polarity::neutral;
  // Character offsets [from, to) of the target in the sentence.
  std::optional<std::pair<std::size_t, std::size_t>> span;
  // nullopt: not annotated. Empty list: annotated, no explicit opinion words.
  std::optional<std::vector<std::string>> opinion_words;

  bool has_target() const { return target && !is_null_target(*target); }
  bool is_implicit() const { return opinion_words && opinion_words->empty(); }

  friend bool operator==(const GoldPair&, const GoldPair&) = default;
};

enum class Origin { train, dev, original_test, hard_set };
std::string_view to_string(Origin o);
Origin parse_origin(std::string_view s);

struct FsaSample {
  std::string sentence_id;
  std::string sentence;
  std::vector<GoldPair> pairs;
  bool is_implicit = false;
  bool is_multiple = false;
  Origin origin = Origin::original_test;

  friend bool operator==(const FsaSample&, const FsaSample&) = default;
};

json to_json(const GoldPair& p);
json to_json(const FsaSample& s);
// Throws ValidationError on missing or ill-typed fields.
FsaSample fsa_sample_from_json(const json& j);

// Sets is_implicit (some pair has annotated, empty opinion words) and
// is_multiple (at least two distinct polarities, conflict included).
void flag_sample(FsaSample& s);

struct DatasetInfo {
  std::string name;
  std::optional<Task> task;  // nullopt for the hard sets, which serve both
  Domain domain = Domain::restaurant;
};

// tsa_rest14, tsa_laptop14, asa_rest16, asa_laptop16, rest_hard, laptop_hard.
DatasetInfo dataset_info(std::string_view name);
std::vector<std::string> known_datasets();

struct FsaDataset {
  DatasetInfo info;
  std::vector<FsaSample> train;
  std::vector<FsaSample> dev;
  std::vector<FsaSample> test;
  std::vector<std::string> category_space;  // normalized, in file order

  const std::vector<FsaSample>& split(std::string_view name) const;
  std::vector<FsaSample>& split(std::string_view name);
};

// Canonical on-disk layout: a directory with train.jsonl, dev.jsonl and
// test.jsonl (one FsaSample per line; a missing file is an empty split) and
// an optional categories.txt with one category per line.
//
// Every record is checked: targets must occur in the sentence (at `span` when
// given), categories must belong to categories.txt when it exists, and stored
// flags must agree with the annotations. The first bad record aborts the load
// with "<file>:<line>: <reason>".
FsaDataset load_dataset(const std::filesystem::path& dir, std::string_view name);
void save_dataset(const FsaDataset& ds, const std::filesystem::path& dir);

void write_samples(const std::filesystem::path& path, std::span<const FsaSample> samples);
std::vector<FsaSample> read_samples(const std::filesystem::path& path,
                                    std::span<const std::string> category_space = {});

// Recomputes both flags on every split. Returns the number of flagged test
// samples as {implicit, multiple}.
std::pair<std::size_t, std::size_t> flag_hard(FsaDataset& ds);

// Appends the hard set's test samples to base.test with origin hard_set.
// Throws ValidationError when the domains differ or a sentence_id already
// exists in base.test.
FsaDataset merge_hard(const FsaDataset& base, const FsaDataset& hard);

// SemEval-2014 ABSA XML (<sentence id><text><aspectTerms><aspectTerm term
// polarity from to/>). Yields TSA samples with the given origin.
std::vector<FsaSample> convert_semeval14(const std::filesystem::path& xml, Origin origin);
// SemEval-2016 ABSA XML (<Review><sentences><sentence id><text><Opinions>
// <Opinion target category polarity from to/>). Targets are kept when the
// attribute is present; categories are normalized.
std::vector<FsaSample> convert_semeval16(const std::filesystem::path& xml, Origin origin);

// Moves the samples whose sentence_id is listed in `dev_ids` from `train`
// into a new dev split (origin dev), keeping file order.
std::vector<FsaSample> carve_dev(std::vector<FsaSample>& train, std::span<const std::string> dev_ids);

// Opinion-word annotation for one gold pair, matched by sentence_id and the
// pair's target (or category when there is no target).
struct OpinionWordEntry {
  std::string sentence_id;
  std::string first;
  std::vector<std::string> opinion_words;
};

// JSONL records {sentence_id, first, opinion_words}.
std::vector<OpinionWordEntry> read_opinion_words(const std::filesystem::path& path);
// TOWE-style TSV: "id<TAB>sentence<TAB>target tags<TAB>opinion tags", tags
// written as word\B, word\I, word\O.
std::vector<OpinionWordEntry> read_towe_tsv(const std::filesystem::path& path);
// Annotates matching pairs and returns how many pairs were annotated.
std::size_t attach_opinion_words(std::vector<FsaSample>& samples,
                                 std::span<const OpinionWordEntry> entries);

// One statistics row per split. Columns that do not apply to the data are nullopt
// and print as "-".
struct SplitStats {
  std::string dataset;
  std::string split;
  std::size_t sentences = 0;
  std::optional<std::size_t> targets;      // distinct non-NULL targets
  std::optional<std::size_t> aspects;      // distinct (category, polarity)
  std::optional<std::size_t> implicit;     // sentences with an implicit pair
  std::optional<std::size_t> implicit_pairs;
  std::size_t multiple = 0;
};

SplitStats split_stats(std::string_view dataset, std::string_view split,
                       std::span<const FsaSample> samples);
json to_json(const SplitStats& s);
std::string stats_table(std::span<const SplitStats> rows);

}  // namespace sentidistill
