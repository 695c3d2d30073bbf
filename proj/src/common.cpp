#include "sentidistill/common.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>

namespace sentidistill {

std::string_view to_string(Task t) {
  return t == Task::tsa ? "tsa" : "asa";
}

std::string_view to_string(Polarity p) {
  switch (p) {
    case Polarity::negative: return "negative";
    case Polarity::neutral: return "neutral";
    case Polarity::positive: return "positive";
    case Polarity::conflict: return "conflict";
  }
  return "neutral";
}

std::string_view to_string(Domain d) {
  return d == Domain::restaurant ? "restaurant" : "laptop";
}

std::string_view to_string(Source s) {
  return s == Source::yelp ? "yelp" : "amazon";
}

Task parse_task(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "tsa") return Task::tsa;
  if (v == "asa") return Task::asa;
  throw ValidationError("unknown task '" + std::string(s) + "'");
}

Domain parse_domain(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "restaurant") return Domain::restaurant;
  if (v == "laptop") return Domain::laptop;
  throw ValidationError("unknown domain '" + std::string(s) + "'");
}

Source parse_source(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "yelp") return Source::yelp;
  if (v == "amazon") return Source::amazon;
  throw ValidationError("unknown source '" + std::string(s) + "'");
}

bool try_parse_polarity(std::string_view s, bool allow_conflict, Polarity& out) {
  std::string v = to_lower(trim(s));
  if (v == "negative") {
    out = Polarity::negative;
  } else if (v == "neutral") {
    out = Polarity::neutral;
  } else if (v == "positive") {
    out = Polarity::positive;
  } else if (v == "conflict" && allow_conflict) {
    out = Polarity::conflict;
  } else {
    return false;
  }
  return true;
}

Polarity parse_polarity(std::string_view s) {
  Polarity p{};
  if (!try_parse_polarity(s, true, p)) {
    throw ValidationError("unknown polarity '" + std::string(s) + "'");
  }
  return p;
}

std::vector<Polarity> label_space(Task t) {
  if (t == Task::tsa) {
    return {Polarity::negative, Polarity::neutral, Polarity::positive, Polarity::conflict};
  }
  return {Polarity::negative, Polarity::neutral, Polarity::positive};
}

std::string canonical_teacher(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "llama" || v == "llama2" || v == "llama-2-7b" || v == "llama2_7b") return "llama2_7b";
  if (v == "mixtral" || v == "mixtral-8x7b" || v == "mixtral_8x7b") return "mixtral_8x7b";
  if (v == "gpt35" || v == "gpt-3.5" || v == "gpt-3.5-turbo" || v == "gpt3.5") return "gpt35";
  return std::string(trim(s));
}

bool is_null_target(std::string_view s) {
  return iequals(trim(s), kNullTarget);
}

std::string trim(std::string_view s) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && is_space(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && is_space(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

bool starts_with_icase(std::string_view s, std::string_view prefix) {
  return s.size() >= prefix.size() && iequals(s.substr(0, prefix.size()), prefix);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      if (start < text.size()) lines.push_back(text.substr(start));
      break;
    }
    std::string_view line = text.substr(start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    start = nl + 1;
  }
  return lines;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = s.find(sep, start);
    parts.emplace_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

namespace {

std::string collapse(std::string_view s, bool hash_is_separator) {
  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char ch : s) {
    auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c) || (hash_is_separator && ch == '#')) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) {
      out.push_back(' ');
      pending_space = false;
    }
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

}  // namespace

std::string normalize_span(std::string_view s) {
  return collapse(s, false);
}

std::string normalize_category(std::string_view s) {
  return collapse(s, true);
}

std::size_t whitespace_tokens(std::string_view s) {
  std::size_t n = 0;
  bool in_token = false;
  for (char ch : s) {
    bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_token) ++n;
    in_token = !space;
  }
  return n;
}

std::string format_fixed2(double value) {
  // 1e-9 absorbs binary representation error so 1.005 rounds to 1.01.
  double scaled = std::floor(std::fabs(value) * 100.0 + 0.5 + 1e-9);
  if (value < 0 && scaled != 0) scaled = -scaled;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.2f", scaled / 100.0);
  return buf;
}

std::string format_percent(double proportion) {
  return format_fixed2(proportion * 100.0);
}

}  // namespace sentidistill
