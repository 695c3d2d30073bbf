#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sentidistill/common.hpp"
#include "sentidistill/io.hpp"

namespace sentidistill {

// Five-level sentiment intensity used by the analysis prompt.
enum class FiveLevel { very_negative, negative, mild, positive, very_positive };

// Enum name: very_negative, negative, mild, positive, very_positive.
std::string_view to_string(FiveLevel s);
// Wording used in the analysis prompt, e.g. "mild sentiment".
std::string_view surface_form(FiveLevel s);
// Accepts the five prompt surface forms (plus the short form "mild"),
// case-insensitively, ignoring surrounding quotes, bold markers and a
// trailing period.
std::optional<FiveLevel> parse_five_level(std::string_view s);
// Accepts the enum names used in JSONL records.
FiveLevel five_level_from_name(std::string_view s);

// very_negative/negative -> negative, mild -> neutral,
// positive/very_positive -> positive.
Polarity map_to_task_polarity(FiveLevel s);

struct Quadruple {
  // nullopt is the NULL marker: the target is only inferable from context.
  std::optional<std::string> target;
  std::string aspect;
  FiveLevel sentiment = FiveLevel::mild;
  std::string reasoning;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

struct PredPair {
  std::string first;
  Polarity polarity = Polarity::neutral;
  // ASA only: the category is not in the supplied category space.
  bool out_of_space = false;

  friend bool operator==(const PredPair&, const PredPair&) = default;
};

enum class FailureReason { no_structure_found, bad_label, truncated, salvage_partial };
std::string_view to_string(FailureReason r);

template <typename T>
struct ParseFailure {
  std::string raw_text;
  FailureReason reason = FailureReason::no_structure_found;
  std::vector<T> salvaged;
  std::string detail;
};

template <typename T>
using ParseResult = std::variant<std::vector<T>, ParseFailure<T>>;

// Parsed items on success, salvaged items on failure.
template <typename T>
const std::vector<T>& usable_items(const ParseResult<T>& r) {
  if (const auto* ok = std::get_if<std::vector<T>>(&r)) return *ok;
  return std::get<ParseFailure<T>>(r).salvaged;
}

// Which fields of a quadruple block are written out.
struct BlockFields {
  bool labels = true;     // Opinion Target, Aspect, Sentiment
  bool reasoning = true;  // Reasoning
};

// Canonical analysis text: one four-line block per quadruple
//   Opinion Target: ...
//   Aspect: ...
//   Sentiment: ...
//   Reasoning: ...
// with blocks separated by a blank line.
std::string serialize_analysis(std::span<const Quadruple> quads, BlockFields fields = {});

// Reads labeled Opinion Target / Aspect / Sentiment / Reasoning blocks.
// Tolerates list markers, numbering, bold or heading markup, blank lines and
// surrounding prose. Field values are single-line; a label with an empty
// value takes the next non-label line as its value. Never throws.
ParseResult<Quadruple> parse_analysis(std::string_view completion);

// Reads a bracketed list of two-element tuples such as
// [('wine list', 'positive')] or [("a", "negative"), ("b", "neutral")].
// Prose before and after the list is ignored. For ASA, categories outside
// `category_space` (compared after normalize_category) are kept and flagged.
// Never throws.
ParseResult<PredPair> parse_pair_list(std::string_view completion, Task task,
                                      std::span<const std::string> category_space = {});

// Python-repr style list of tuples, the format used in in-context demos.
std::string format_pair_list(std::span<const PredPair> pairs);

// JSONL record for one parsed quadruple.
json quadruple_record(const Quadruple& q, std::string_view review_id, std::string_view teacher,
                      std::string_view prompt_kind);
Quadruple quadruple_from_record(const json& j);

template <typename T>
json failure_record(const ParseFailure<T>& f, std::string_view review_id) {
  return json{{"review_id", review_id},
              {"reason", to_string(f.reason)},
              {"detail", f.detail},
              {"salvaged", f.salvaged.size()},
              {"raw_text", f.raw_text}};
}

}  // namespace sentidistill
