#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace sentidistill {

inline constexpr std::string_view kVersion = "0.3.1";

// Base for all library errors. ValidationError maps to exit status 1 in the
// CLI, UsageError to status 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

enum class Task { tsa, asa };
enum class Polarity { negative, neutral, positive, conflict };
enum class Domain { restaurant, laptop };
enum class Source { yelp, amazon };

std::string_view to_string(Task t);
std::string_view to_string(Polarity p);
std::string_view to_string(Domain d);
std::string_view to_string(Source s);

Task parse_task(std::string_view s);
Domain parse_domain(std::string_view s);
Source parse_source(std::string_view s);

// Case-insensitive, trimmed. Returns false for anything outside the four
// labels; `conflict` is only accepted when allow_conflict is set.
bool try_parse_polarity(std::string_view s, bool allow_conflict, Polarity& out);
Polarity parse_polarity(std::string_view s);

// Label space of a task: TSA includes `conflict`, ASA does not.
std::vector<Polarity> label_space(Task t);

// Teacher identifiers. Known aliases collapse onto the canonical tags
// llama2_7b, mixtral_8x7b and gpt35; anything else is kept verbatim.
std::string canonical_teacher(std::string_view s);

// Marker used for opinion targets that are only inferable from context.
inline constexpr std::string_view kNullTarget = "NULL";
bool is_null_target(std::string_view s);

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool starts_with_icase(std::string_view s, std::string_view prefix);
std::vector<std::string_view> split_lines(std::string_view text);
std::vector<std::string> split(std::string_view s, char sep);

// Lowercase, trim, and collapse runs of whitespace to one space.
std::string normalize_span(std::string_view s);

// Category normalization: lowercase, then treat '#' and whitespace as one
// separator. "FOOD#QUALITY" and "food  quality" both become "food quality".
std::string normalize_category(std::string_view s);

// Count of whitespace-delimited tokens.
std::size_t whitespace_tokens(std::string_view s);

// Fixed two-decimal percentage with half-up rounding, e.g. 0.14941 -> "14.94".
std::string format_percent(double proportion);
// Fixed two-decimal value with half-up rounding.
std::string format_fixed2(double value);

}  // namespace sentidistill
