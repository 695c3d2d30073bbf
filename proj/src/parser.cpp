#include "sentidistill/parser.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace sentidistill {

std::string_view to_string(FiveLevel s) {
  switch (s) {
    case FiveLevel::very_negative: return "very_negative";
    case FiveLevel::negative: return "negative";
    case FiveLevel::mild: return "mild";
    case FiveLevel::positive: return "positive";
    case FiveLevel::very_positive: return "very_positive";
  }
  return "mild";
}

std::string_view surface_form(FiveLevel s) {
  switch (s) {
    case FiveLevel::very_negative: return "very negative";
    case FiveLevel::negative: return "negative";
    case FiveLevel::mild: return "mild sentiment";
    case FiveLevel::positive: return "positive";
    case FiveLevel::very_positive: return "very positive";
  }
  return "mild sentiment";
}

std::optional<FiveLevel> parse_five_level(std::string_view s) {
  std::string v = trim(s);
  auto strip = [&](auto pred) {
    while (!v.empty() && pred(v.front())) v.erase(v.begin());
    while (!v.empty() && pred(v.back())) v.pop_back();
  };
  strip([](char c) {
    return c == '*' || c == '"' || c == '\'' || c == '`' || c == '.' ||
           std::isspace(static_cast<unsigned char>(c));
  });
  std::string key = normalize_span(v);
  if (key == "very negative") return FiveLevel::very_negative;
  if (key == "negative") return FiveLevel::negative;
  if (key == "mild sentiment" || key == "mild") return FiveLevel::mild;
  if (key == "positive") return FiveLevel::positive;
  if (key == "very positive") return FiveLevel::very_positive;
  return std::nullopt;
}

FiveLevel five_level_from_name(std::string_view s) {
  for (FiveLevel f : {FiveLevel::very_negative, FiveLevel::negative, FiveLevel::mild,
                      FiveLevel::positive, FiveLevel::very_positive}) {
    if (s == to_string(f)) return f;
  }
  if (auto f = parse_five_level(s)) return *f;
  throw ValidationError("unknown sentiment level '" + std::string(s) + "'");
}

Polarity map_to_task_polarity(FiveLevel s) {
  switch (s) {
    case FiveLevel::very_negative:
    case FiveLevel::negative:
      return Polarity::negative;
    case FiveLevel::mild:
      return Polarity::neutral;
    case FiveLevel::positive:
    case FiveLevel::very_positive:
      return Polarity::positive;
  }
  return Polarity::neutral;
}

std::string_view to_string(FailureReason r) {
  switch (r) {
    case FailureReason::no_structure_found: return "no_structure_found";
    case FailureReason::bad_label: return "bad_label";
    case FailureReason::truncated: return "truncated";
    case FailureReason::salvage_partial: return "salvage_partial";
  }
  return "no_structure_found";
}

std::string serialize_analysis(std::span<const Quadruple> quads, BlockFields fields) {
  std::string out;
  for (const auto& q : quads) {
    if (!out.empty()) out += "\n\n";
    std::string block;
    if (fields.labels) {
      block += "Opinion Target: ";
      block += q.target ? *q.target : std::string(kNullTarget);
      block += "\nAspect: ";
      block += q.aspect;
      block += "\nSentiment: ";
      block += surface_form(q.sentiment);
    }
    if (fields.reasoning) {
      if (!block.empty()) block += '\n';
      block += "Reasoning: ";
      block += q.reasoning;
    }
    out += block;
  }
  return out;
}

namespace {

enum class Field { target = 0, aspect = 1, sentiment = 2, reasoning = 3 };

bool is_space(char c) {
  return std::isspace(static_cast<unsigned char>(c)) != 0;
}

std::string_view trim_view(std::string_view s) {
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Drops heading hashes, bullets ("-", "*", "+", "•") and numbering ("1.",
// "2)", "(3)") from the start of a line.
std::string_view strip_list_markers(std::string_view s) {
  for (;;) {
    s = trim_view(s);
    std::string_view before = s;
    while (!s.empty() && s.front() == '#') s.remove_prefix(1);
    if (s.size() >= 2 && (s[0] == '-' || s[0] == '*' || s[0] == '+') && is_space(s[1])) {
      s.remove_prefix(2);
    } else if (s.size() >= 3 && s.substr(0, 3) == "\xE2\x80\xA2") {
      s.remove_prefix(3);
    } else {
      std::size_t i = 0;
      bool paren = !s.empty() && s[0] == '(';
      if (paren) ++i;
      std::size_t digits_start = i;
      while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
      if (i > digits_start && i < s.size() &&
          ((paren && s[i] == ')') || (!paren && (s[i] == '.' || s[i] == ')'))) &&
          (i + 1 == s.size() || is_space(s[i + 1]))) {
        s.remove_prefix(i + 1);
      }
    }
    if (s == before) return s;
  }
}

struct LabeledLine {
  Field field;
  std::string value;
};

std::optional<LabeledLine> match_label(std::string_view raw_line) {
  std::string_view s = strip_list_markers(raw_line);
  std::size_t colon = s.find(':');
  if (colon == std::string_view::npos || colon > 40) return std::nullopt;
  std::string label;
  for (char c : s.substr(0, colon)) {
    if (c != '*' && c != '_') label.push_back(c);
  }
  label = normalize_span(label);
  Field f;
  if (label == "opinion target" || label == "target") {
    f = Field::target;
  } else if (label == "aspect") {
    f = Field::aspect;
  } else if (label == "sentiment") {
    f = Field::sentiment;
  } else if (label == "reasoning") {
    f = Field::reasoning;
  } else {
    return std::nullopt;
  }
  std::string_view value = s.substr(colon + 1);
  while (!value.empty() && (value.front() == '*' || is_space(value.front()))) value.remove_prefix(1);
  return LabeledLine{f, std::string(trim_view(value))};
}

struct PartialBlock {
  std::array<std::string, 4> values;
  int filled = 0;  // number of leading fields present
};

}  // namespace

ParseResult<Quadruple> parse_analysis(std::string_view completion) {
  std::vector<Quadruple> quads;
  std::optional<PartialBlock> partial;
  // Label seen with an empty value; its value may follow on the next line.
  bool has_pending = false;
  Field pending{};
  bool any_label = false;
  std::size_t bad_labels = 0;
  std::size_t incomplete = 0;
  std::string detail;

  auto note = [&](const std::string& msg) {
    if (!detail.empty()) detail += "; ";
    detail += msg;
  };

  auto finish = [&](PartialBlock& b) {
    auto sentiment = parse_five_level(b.values[2]);
    if (!sentiment) {
      ++bad_labels;
      note("unrecognized sentiment '" + b.values[2] + "'");
      return;
    }
    if (b.values[0].empty() || b.values[1].empty() || b.values[3].empty()) {
      ++incomplete;
      note("block with an empty field");
      return;
    }
    Quadruple q;
    if (!is_null_target(b.values[0])) q.target = b.values[0];
    q.aspect = b.values[1];
    q.sentiment = *sentiment;
    q.reasoning = b.values[3];
    quads.push_back(std::move(q));
  };

  auto assign = [&](Field f, std::string value) {
    int idx = static_cast<int>(f);
    if (f == Field::target) {
      if (partial) {
        ++incomplete;
        note("incomplete block");
      }
      partial = PartialBlock{};
    } else if (!partial || partial->filled != idx) {
      // Out-of-order field: whatever was in progress cannot be completed.
      if (partial) {
        ++incomplete;
        note("fields out of order");
      } else {
        ++incomplete;
        note("field outside a block");
      }
      partial.reset();
      return;
    }
    partial->values[static_cast<std::size_t>(idx)] = std::move(value);
    partial->filled = idx + 1;
    if (partial->filled == 4) {
      finish(*partial);
      partial.reset();
    }
  };

  for (std::string_view line : split_lines(completion)) {
    if (trim_view(line).empty()) continue;
    auto labeled = match_label(line);
    if (has_pending) {
      has_pending = false;
      if (!labeled) {
        assign(pending, std::string(trim_view(strip_list_markers(line))));
        continue;
      }
      assign(pending, std::string());
    }
    if (!labeled) continue;
    any_label = true;
    if (labeled->value.empty()) {
      pending = labeled->field;
      has_pending = true;
      continue;
    }
    assign(labeled->field, std::move(labeled->value));
  }
  if (has_pending) assign(pending, std::string());

  bool truncated = partial.has_value();
  if (!any_label) {
    return ParseFailure<Quadruple>{std::string(completion), FailureReason::no_structure_found, {},
                                   "no labeled fields"};
  }
  if (truncated) {
    note("text ends inside a block");
    return ParseFailure<Quadruple>{std::string(completion), FailureReason::truncated,
                                   std::move(quads), detail};
  }
  if (bad_labels > 0) {
    return ParseFailure<Quadruple>{std::string(completion), FailureReason::bad_label,
                                   std::move(quads), detail};
  }
  if (quads.empty()) {
    return ParseFailure<Quadruple>{std::string(completion), FailureReason::no_structure_found, {},
                                   detail.empty() ? "no complete block" : detail};
  }
  if (incomplete > 0) {
    return ParseFailure<Quadruple>{std::string(completion), FailureReason::salvage_partial,
                                   std::move(quads), detail};
  }
  return quads;
}

namespace {

class ListScanner {
 public:
  ListScanner(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  bool at_end() {
    skip_ws();
    return pos_ >= text_.size();
  }
  char peek() {
    skip_ws();
    return pos_ < text_.size() ? text_[pos_] : '\0';
  }
  bool consume(char c) {
    if (peek() != c) return false;
    ++pos_;
    return true;
  }
  // Quoted string with ' " or ` opening (` closes with '). Returns nullopt on
  // a missing quote; sets eof_ when the text ends inside the string.
  std::optional<std::string> quoted() {
    char open = peek();
    if (open != '\'' && open != '"' && open != '`') return std::nullopt;
    char close = open == '`' ? '\'' : open;
    ++pos_;
    std::string out;
    while (pos_ < text_.size()) {
      char c = text_[pos_++];
      if (c == '\\' && pos_ < text_.size()) {
        out.push_back(text_[pos_++]);
        continue;
      }
      if (c == close) return out;
      out.push_back(c);
    }
    eof_ = true;
    return std::nullopt;
  }
  bool eof_hit() const { return eof_ || pos_ >= text_.size(); }

 private:
  void skip_ws() {
    while (pos_ < text_.size() && is_space(text_[pos_])) ++pos_;
  }

  std::string_view text_;
  std::size_t pos_;
  bool eof_ = false;
};

struct ListAttempt {
  enum class Outcome { not_a_list, complete, truncated, broken } outcome = Outcome::not_a_list;
  std::vector<std::vector<std::string>> tuples;
  std::size_t bad_tuples = 0;
};

ListAttempt scan_list(std::string_view text, std::size_t start) {
  ListAttempt a;
  ListScanner sc(text, start);
  if (!sc.consume('[')) return a;
  if (sc.consume(']')) {
    a.outcome = ListAttempt::Outcome::complete;
    return a;
  }
  for (;;) {
    char open = sc.peek();
    if (open != '(' && open != '[') {
      if (sc.at_end()) {
        a.outcome = a.tuples.empty() ? ListAttempt::Outcome::not_a_list
                                     : ListAttempt::Outcome::truncated;
      } else {
        a.outcome = a.tuples.empty() ? ListAttempt::Outcome::not_a_list
                                     : ListAttempt::Outcome::broken;
      }
      return a;
    }
    sc.consume(open);
    char close = open == '(' ? ')' : ']';
    std::vector<std::string> elems;
    for (;;) {
      if (sc.consume(close)) break;
      auto s = sc.quoted();
      if (!s) {
        bool eof = sc.eof_hit() || sc.at_end();
        if (a.tuples.empty() && !eof) return a;  // not a tuple list
        a.outcome = eof ? ListAttempt::Outcome::truncated : ListAttempt::Outcome::broken;
        if (a.tuples.empty() && eof) a.outcome = ListAttempt::Outcome::truncated;
        return a;
      }
      elems.push_back(std::move(*s));
      if (sc.consume(',')) continue;
      if (sc.consume(close)) break;
      a.outcome = sc.at_end() ? ListAttempt::Outcome::truncated : ListAttempt::Outcome::broken;
      return a;
    }
    if (elems.size() == 2) {
      a.tuples.push_back(std::move(elems));
    } else {
      ++a.bad_tuples;
    }
    if (sc.consume(',')) {
      if (sc.consume(']')) break;  // trailing comma
      continue;
    }
    if (sc.consume(']')) break;
    a.outcome = sc.at_end() ? ListAttempt::Outcome::truncated : ListAttempt::Outcome::broken;
    return a;
  }
  a.outcome = ListAttempt::Outcome::complete;
  return a;
}

}  // namespace

ParseResult<PredPair> parse_pair_list(std::string_view completion, Task task,
                                      std::span<const std::string> category_space) {
  ListAttempt found;
  bool have = false;
  for (std::size_t pos = completion.find('['); pos != std::string_view::npos;
       pos = completion.find('[', pos + 1)) {
    ListAttempt a = scan_list(completion, pos);
    if (a.outcome == ListAttempt::Outcome::not_a_list) continue;
    found = std::move(a);
    have = true;
    break;
  }
  if (!have) {
    return ParseFailure<PredPair>{std::string(completion), FailureReason::no_structure_found, {},
                                  "no bracketed tuple list"};
  }

  std::vector<std::string> space;
  for (const auto& c : category_space) space.push_back(normalize_category(c));

  std::vector<PredPair> pairs;
  std::size_t bad_labels = 0;
  std::string detail;
  for (auto& t : found.tuples) {
    PredPair p;
    p.first = trim(t[0]);
    if (!try_parse_polarity(t[1], task == Task::tsa, p.polarity) || p.first.empty()) {
      ++bad_labels;
      if (!detail.empty()) detail += "; ";
      detail += "bad label '" + t[1] + "'";
      continue;
    }
    if (task == Task::asa && !space.empty()) {
      std::string norm = normalize_category(p.first);
      p.out_of_space = std::find(space.begin(), space.end(), norm) == space.end();
    }
    pairs.push_back(std::move(p));
  }

  using O = ListAttempt::Outcome;
  if (found.outcome == O::truncated) {
    return ParseFailure<PredPair>{std::string(completion), FailureReason::truncated,
                                  std::move(pairs), "list not closed"};
  }
  if (bad_labels > 0) {
    return ParseFailure<PredPair>{std::string(completion), FailureReason::bad_label,
                                  std::move(pairs), detail};
  }
  if (found.outcome == O::broken || found.bad_tuples > 0) {
    if (pairs.empty()) {
      return ParseFailure<PredPair>{std::string(completion), FailureReason::no_structure_found,
                                    {}, "malformed tuple list"};
    }
    return ParseFailure<PredPair>{std::string(completion), FailureReason::salvage_partial,
                                  std::move(pairs), "malformed tuple list"};
  }
  return pairs;
}

namespace {

std::string py_repr(std::string_view s) {
  bool has_single = s.find('\'') != std::string_view::npos;
  bool has_double = s.find('"') != std::string_view::npos;
  char q = has_single && !has_double ? '"' : '\'';
  std::string out(1, q);
  for (char c : s) {
    if (c == q || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  out.push_back(q);
  return out;
}

}  // namespace

std::string format_pair_list(std::span<const PredPair> pairs) {
  std::string out = "[";
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (i > 0) out += ", ";
    out += "(" + py_repr(pairs[i].first) + ", " + py_repr(to_string(pairs[i].polarity)) + ")";
  }
  out += "]";
  return out;
}

json quadruple_record(const Quadruple& q, std::string_view review_id, std::string_view teacher,
                      std::string_view prompt_kind) {
  return json{{"review_id", review_id},
              {"target", q.target ? *q.target : std::string(kNullTarget)},
              {"aspect", q.aspect},
              {"sentiment", to_string(q.sentiment)},
              {"reasoning", q.reasoning},
              {"teacher", teacher},
              {"prompt_kind", prompt_kind}};
}

Quadruple quadruple_from_record(const json& j) {
  Quadruple q;
  try {
    std::string target = j.at("target").get<std::string>();
    if (!is_null_target(target)) q.target = target;
    q.aspect = j.at("aspect").get<std::string>();
    q.sentiment = five_level_from_name(j.at("sentiment").get<std::string>());
    q.reasoning = j.value("reasoning", std::string());
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed quadruple record: ") + e.what());
  }
  return q;
}

}  // namespace sentidistill
