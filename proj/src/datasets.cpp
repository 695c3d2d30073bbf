#include "sentidistill/datasets.hpp"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

namespace sentidistill {

std::string_view to_string(Origin o) {
  switch (o) {
    case Origin::train: return "train";
    case Origin::dev: return "dev";
    case Origin::original_test: return "original_test";
    case Origin::hard_set: return "hard_set";
  }
  return "original_test";
}

Origin parse_origin(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "train") return Origin::train;
  if (v == "dev") return Origin::dev;
  if (v == "original_test" || v == "test") return Origin::original_test;
  if (v == "hard_set" || v == "hard") return Origin::hard_set;
  throw ValidationError("unknown sample origin '" + std::string(s) + "'");
}

json to_json(const GoldPair& p) {
  json j{{"polarity", to_string(p.polarity)}};
  if (p.target) j["target"] = *p.target;
  if (p.category) j["category"] = *p.category;
  if (p.span) {
    j["from"] = p.span->first;
    j["to"] = p.span->second;
  }
  if (p.opinion_words) j["opinion_words"] = *p.opinion_words;
  return j;
}

json to_json(const FsaSample& s) {
  json pairs = json::array();
  for (const auto& p : s.pairs) pairs.push_back(to_json(p));
  return json{{"sentence_id", s.sentence_id}, {"sentence", s.sentence},
              {"pairs", pairs},               {"is_implicit", s.is_implicit},
              {"is_multiple", s.is_multiple}, {"origin", to_string(s.origin)}};
}

namespace {

GoldPair gold_pair_from_json(const json& j) {
  if (!j.is_object()) throw ValidationError("pair is not an object");
  GoldPair p;
  if (j.contains("target") && !j["target"].is_null()) {
    std::string t = j["target"].get<std::string>();
    p.target = is_null_target(t) ? std::string(kNullTarget) : t;
  }
  if (j.contains("category") && !j["category"].is_null()) {
    p.category = normalize_category(j["category"].get<std::string>());
    if (p.category->empty()) throw ValidationError("empty category");
  }
  if (!p.target && !p.category) throw ValidationError("pair has neither target nor category");
  std::string pol = j.at("polarity").get<std::string>();
  if (!try_parse_polarity(pol, true, p.polarity)) {
    throw ValidationError("unknown polarity '" + pol + "'");
  }
  bool has_from = j.contains("from");
  if (has_from != j.contains("to")) throw ValidationError("span needs both from and to");
  if (has_from) {
    auto from = j["from"].get<long long>();
    auto to = j["to"].get<long long>();
    if (from < 0 || to < from) throw ValidationError("bad span offsets");
    p.span = std::make_pair(static_cast<std::size_t>(from), static_cast<std::size_t>(to));
  }
  if (j.contains("opinion_words") && !j["opinion_words"].is_null()) {
    p.opinion_words = j["opinion_words"].get<std::vector<std::string>>();
  }
  return p;
}

}  // namespace

FsaSample fsa_sample_from_json(const json& j) {
  FsaSample s;
  try {
    s.sentence_id = j.at("sentence_id").get<std::string>();
    if (s.sentence_id.empty()) throw ValidationError("empty sentence_id");
    s.sentence = j.at("sentence").get<std::string>();
    for (const auto& p : j.at("pairs")) s.pairs.push_back(gold_pair_from_json(p));
    s.origin = parse_origin(j.value("origin", std::string("original_test")));
    flag_sample(s);
    if (j.contains("is_implicit") && j["is_implicit"].get<bool>() != s.is_implicit) {
      throw ValidationError("is_implicit disagrees with the opinion-word annotations");
    }
    if (j.contains("is_multiple") && j["is_multiple"].get<bool>() != s.is_multiple) {
      throw ValidationError("is_multiple disagrees with the pair polarities");
    }
  } catch (const json::exception& e) {
    throw ValidationError(e.what());
  }
  return s;
}

void flag_sample(FsaSample& s) {
  std::set<Polarity> polarities;
  s.is_implicit = false;
  for (const auto& p : s.pairs) {
    polarities.insert(p.polarity);
    if (p.is_implicit()) s.is_implicit = true;
  }
  s.is_multiple = polarities.size() >= 2;
}

DatasetInfo dataset_info(std::string_view name) {
  std::string n = to_lower(trim(name));
  if (n == "tsa_rest14") return {n, Task::tsa, Domain::restaurant};
  if (n == "tsa_laptop14") return {n, Task::tsa, Domain::laptop};
  if (n == "asa_rest16") return {n, Task::asa, Domain::restaurant};
  if (n == "asa_laptop16") return {n, Task::asa, Domain::laptop};
  if (n == "rest_hard") return {n, std::nullopt, Domain::restaurant};
  if (n == "laptop_hard") return {n, std::nullopt, Domain::laptop};
  throw ValidationError("unknown dataset '" + std::string(name) + "'");
}

std::vector<std::string> known_datasets() {
  return {"tsa_rest14", "tsa_laptop14", "asa_rest16", "asa_laptop16", "rest_hard", "laptop_hard"};
}

const std::vector<FsaSample>& FsaDataset::split(std::string_view name) const {
  if (name == "train") return train;
  if (name == "dev") return dev;
  if (name == "test") return test;
  throw ValidationError("unknown split '" + std::string(name) + "'");
}

std::vector<FsaSample>& FsaDataset::split(std::string_view name) {
  return const_cast<std::vector<FsaSample>&>(std::as_const(*this).split(name));
}

namespace {

void validate_sample(const FsaSample& s, std::span<const std::string> category_space) {
  for (const auto& p : s.pairs) {
    if (p.has_target()) {
      if (p.target->empty()) throw ValidationError("empty target");
      if (p.span) {
        auto [from, to] = *p.span;
        if (to > s.sentence.size() || s.sentence.compare(from, to - from, *p.target) != 0) {
          throw ValidationError("target '" + *p.target + "' is not at [" + std::to_string(from) +
                                ", " + std::to_string(to) + ") of the sentence");
        }
      } else if (s.sentence.find(*p.target) == std::string::npos) {
        throw ValidationError("target '" + *p.target + "' is not a substring of the sentence");
      }
    }
    if (p.category && !category_space.empty() &&
        std::find(category_space.begin(), category_space.end(), *p.category) ==
            category_space.end()) {
      throw ValidationError("category '" + *p.category + "' is outside the category space");
    }
  }
}

std::vector<std::string> read_categories(const std::filesystem::path& path) {
  std::vector<std::string> out;
  if (!std::filesystem::exists(path)) return out;
  std::string text = read_file(path);
  for (auto line : split_lines(text)) {
    std::string c = normalize_category(line);
    if (!c.empty() && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  }
  return out;
}

}  // namespace

std::vector<FsaSample> read_samples(const std::filesystem::path& path,
                                    std::span<const std::string> category_space) {
  std::vector<FsaSample> out;
  if (!std::filesystem::exists(path)) return out;
  std::unordered_set<std::string> ids;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      FsaSample s = fsa_sample_from_json(j);
      validate_sample(s, category_space);
      if (!ids.insert(s.sentence_id).second) {
        throw ValidationError("duplicate sentence_id '" + s.sentence_id + "'");
      }
      out.push_back(std::move(s));
    } catch (const ValidationError& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

void write_samples(const std::filesystem::path& path, std::span<const FsaSample> samples) {
  JsonlWriter w(path);
  for (const auto& s : samples) w.write(to_json(s));
}

FsaDataset load_dataset(const std::filesystem::path& dir, std::string_view name) {
  if (!std::filesystem::is_directory(dir)) {
    throw ValidationError("dataset directory not found: " + dir.string());
  }
  FsaDataset ds;
  ds.info = dataset_info(name);
  ds.category_space = read_categories(dir / "categories.txt");
  ds.train = read_samples(dir / "train.jsonl", ds.category_space);
  ds.dev = read_samples(dir / "dev.jsonl", ds.category_space);
  ds.test = read_samples(dir / "test.jsonl", ds.category_space);
  return ds;
}

void save_dataset(const FsaDataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_samples(dir / "train.jsonl", ds.train);
  write_samples(dir / "dev.jsonl", ds.dev);
  write_samples(dir / "test.jsonl", ds.test);
  if (!ds.category_space.empty()) {
    std::string text;
    for (const auto& c : ds.category_space) text += c + "\n";
    write_file(dir / "categories.txt", text);
  }
}

std::pair<std::size_t, std::size_t> flag_hard(FsaDataset& ds) {
  for (auto* split : {&ds.train, &ds.dev, &ds.test}) {
    for (auto& s : *split) flag_sample(s);
  }
  std::size_t imp = 0;
  std::size_t mul = 0;
  for (const auto& s : ds.test) {
    imp += s.is_implicit;
    mul += s.is_multiple;
  }
  return {imp, mul};
}

FsaDataset merge_hard(const FsaDataset& base, const FsaDataset& hard) {
  if (base.info.domain != hard.info.domain) {
    throw ValidationError("cannot merge " + hard.info.name + " (" +
                          std::string(to_string(hard.info.domain)) + ") into " + base.info.name +
                          " (" + std::string(to_string(base.info.domain)) + ")");
  }
  FsaDataset out = base;
  std::unordered_set<std::string> ids;
  for (const auto& s : base.test) ids.insert(s.sentence_id);
  for (const auto& s : hard.test) {
    if (!ids.insert(s.sentence_id).second) {
      throw ValidationError("sentence_id '" + s.sentence_id + "' from " + hard.info.name +
                            " already exists in " + base.info.name + " test");
    }
    validate_sample(s, base.category_space);
    FsaSample m = s;
    m.origin = Origin::hard_set;
    out.test.push_back(std::move(m));
  }
  return out;
}

namespace {

namespace pt = boost::property_tree;

pt::ptree read_xml_tree(const std::filesystem::path& xml) {
  pt::ptree tree;
  try {
    pt::read_xml(xml.string(), tree);
  } catch (const pt::xml_parser_error& e) {
    throw ValidationError(e.message() + " (" + xml.string() + ":" + std::to_string(e.line()) + ")");
  }
  return tree;
}

// get_child with a temporary default would return a dangling reference.
const pt::ptree& children(const pt::ptree& node, const std::string& path) {
  static const pt::ptree empty;
  auto child = node.get_child_optional(path);
  return child ? *child : empty;
}

std::string attr(const pt::ptree& node, const std::string& name) {
  return node.get<std::string>("<xmlattr>." + name, "");
}

Polarity xml_polarity(const std::string& s, const std::string& where) {
  Polarity p;
  if (!try_parse_polarity(s, true, p)) {
    throw ValidationError(where + ": unknown polarity '" + s + "'");
  }
  return p;
}

std::pair<std::size_t, std::size_t> xml_span(const pt::ptree& node, const std::string& where) {
  try {
    return {std::stoul(attr(node, "from")), std::stoul(attr(node, "to"))};
  } catch (const std::exception&) {
    throw ValidationError(where + ": bad from/to offsets");
  }
}

void check_sample(FsaSample& s, const std::filesystem::path& xml) {
  flag_sample(s);
  try {
    validate_sample(s, {});
  } catch (const ValidationError& e) {
    throw ValidationError(xml.string() + ": sentence " + s.sentence_id + ": " + e.what());
  }
}

}  // namespace

std::vector<FsaSample> convert_semeval14(const std::filesystem::path& xml, Origin origin) {
  pt::ptree tree = read_xml_tree(xml);
  std::vector<FsaSample> out;
  for (const auto& [tag, node] : children(tree, "sentences")) {
    if (tag != "sentence") continue;
    FsaSample s;
    s.sentence_id = attr(node, "id");
    s.sentence = node.get<std::string>("text", "");
    s.origin = origin;
    std::string where = xml.string() + ": sentence " + s.sentence_id;
    for (const auto& [ttag, term] : children(node, "aspectTerms")) {
      if (ttag != "aspectTerm") continue;
      GoldPair p;
      p.target = attr(term, "term");
      p.polarity = xml_polarity(attr(term, "polarity"), where);
      p.span = xml_span(term, where);
      s.pairs.push_back(std::move(p));
    }
    check_sample(s, xml);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<FsaSample> convert_semeval16(const std::filesystem::path& xml, Origin origin) {
  pt::ptree tree = read_xml_tree(xml);
  std::vector<FsaSample> out;
  for (const auto& [rtag, review] : children(tree, "Reviews")) {
    if (rtag != "Review") continue;
    for (const auto& [tag, node] : children(review, "sentences")) {
      if (tag != "sentence") continue;
      FsaSample s;
      s.sentence_id = attr(node, "id");
      s.sentence = node.get<std::string>("text", "");
      s.origin = origin;
      std::string where = xml.string() + ": sentence " + s.sentence_id;
      for (const auto& [otag, op] : children(node, "Opinions")) {
        if (otag != "Opinion") continue;
        GoldPair p;
        p.category = normalize_category(attr(op, "category"));
        p.polarity = xml_polarity(attr(op, "polarity"), where);
        if (op.get_optional<std::string>("<xmlattr>.target")) {
          std::string target = attr(op, "target");
          if (is_null_target(target)) {
            p.target = std::string(kNullTarget);
          } else {
            p.target = target;
            p.span = xml_span(op, where);
          }
        }
        s.pairs.push_back(std::move(p));
      }
      check_sample(s, xml);
      out.push_back(std::move(s));
    }
  }
  return out;
}

std::vector<FsaSample> carve_dev(std::vector<FsaSample>& train, std::span<const std::string> dev_ids) {
  std::unordered_set<std::string> wanted(dev_ids.begin(), dev_ids.end());
  std::vector<FsaSample> dev;
  std::vector<FsaSample> rest;
  for (auto& s : train) {
    if (wanted.erase(s.sentence_id) > 0) {
      s.origin = Origin::dev;
      dev.push_back(std::move(s));
    } else {
      rest.push_back(std::move(s));
    }
  }
  if (!wanted.empty()) {
    throw ValidationError("dev id '" + *wanted.begin() + "' is not in the training data");
  }
  train = std::move(rest);
  return dev;
}

std::vector<OpinionWordEntry> read_opinion_words(const std::filesystem::path& path) {
  std::vector<OpinionWordEntry> out;
  read_jsonl(path, [&](const json& j, std::size_t line) {
    try {
      out.push_back(OpinionWordEntry{j.at("sentence_id").get<std::string>(),
                                     j.at("first").get<std::string>(),
                                     j.at("opinion_words").get<std::vector<std::string>>()});
    } catch (const json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(line) + ": " + e.what());
    }
  });
  return out;
}

namespace {

// Groups B/I-tagged tokens into phrases.
std::vector<std::string> tagged_phrases(std::string_view tags, const std::string& where) {
  std::vector<std::string> phrases;
  bool open = false;
  std::istringstream in{std::string(tags)};
  std::string tok;
  while (in >> tok) {
    std::size_t sep = tok.rfind('\\');
    if (sep == std::string::npos) throw ValidationError(where + ": token without tag: " + tok);
    std::string word = tok.substr(0, sep);
    std::string tag = tok.substr(sep + 1);
    if (tag == "B" || (tag == "I" && !open)) {
      phrases.push_back(word);
      open = true;
    } else if (tag == "I") {
      phrases.back() += " " + word;
    } else if (tag == "O") {
      open = false;
    } else {
      throw ValidationError(where + ": unknown tag '" + tag + "'");
    }
  }
  return phrases;
}

}  // namespace

std::vector<OpinionWordEntry> read_towe_tsv(const std::filesystem::path& path) {
  std::vector<OpinionWordEntry> out;
  std::string text = read_file(path);
  std::size_t line_no = 0;
  for (auto line : split_lines(text)) {
    ++line_no;
    if (trim(line).empty()) continue;
    std::string where = path.string() + ":" + std::to_string(line_no);
    auto fields = split(line, '\t');
    if (fields.size() != 4) throw ValidationError(where + ": expected 4 tab-separated fields");
    if (starts_with_icase(fields[0], "s_id")) continue;  // header
    auto targets = tagged_phrases(fields[2], where);
    if (targets.empty()) throw ValidationError(where + ": no target tagged");
    out.push_back(OpinionWordEntry{fields[0], targets.front(), tagged_phrases(fields[3], where)});
  }
  return out;
}

std::size_t attach_opinion_words(std::vector<FsaSample>& samples,
                                 std::span<const OpinionWordEntry> entries) {
  std::unordered_map<std::string, const OpinionWordEntry*> index;
  for (const auto& e : entries) {
    index[e.sentence_id + '\x1f' + normalize_category(e.first)] = &e;
  }
  std::size_t annotated = 0;
  for (auto& s : samples) {
    for (auto& p : s.pairs) {
      std::string first = p.has_target() ? *p.target : p.category.value_or(std::string());
      auto it = index.find(s.sentence_id + '\x1f' + normalize_category(first));
      if (it == index.end()) continue;
      p.opinion_words = it->second->opinion_words;
      ++annotated;
    }
    flag_sample(s);
  }
  return annotated;
}

SplitStats split_stats(std::string_view dataset, std::string_view split,
                       std::span<const FsaSample> samples) {
  SplitStats st;
  st.dataset = dataset;
  st.split = split;
  st.sentences = samples.size();
  bool any_target = false, any_category = false, any_opinion = false;
  std::size_t targets = 0, aspects = 0, implicit = 0, implicit_pairs = 0;
  for (const auto& s : samples) {
    std::set<std::pair<std::string, std::pair<std::size_t, std::size_t>>> trg;
    std::set<std::pair<std::string, Polarity>> asp;
    std::set<Polarity> pols;
    bool imp = false;
    for (const auto& p : s.pairs) {
      pols.insert(p.polarity);
      if (p.target) any_target = true;
      if (p.has_target()) trg.insert({*p.target, p.span.value_or(std::pair<std::size_t, std::size_t>{})});
      if (p.category) {
        any_category = true;
        asp.insert({*p.category, p.polarity});
      }
      if (p.opinion_words) any_opinion = true;
      if (p.is_implicit()) {
        imp = true;
        ++implicit_pairs;
      }
    }
    targets += trg.size();
    aspects += asp.size();
    implicit += imp;
    st.multiple += pols.size() >= 2;
  }
  if (any_target) st.targets = targets;
  if (any_category) st.aspects = aspects;
  if (any_opinion) {
    st.implicit = implicit;
    st.implicit_pairs = implicit_pairs;
  }
  return st;
}

json to_json(const SplitStats& s) {
  auto opt = [](const std::optional<std::size_t>& v) { return v ? json(*v) : json(nullptr); };
  return json{{"dataset", s.dataset},
              {"split", s.split},
              {"sentences", s.sentences},
              {"targets", opt(s.targets)},
              {"aspects", opt(s.aspects)},
              {"implicit", opt(s.implicit)},
              {"implicit_pairs", opt(s.implicit_pairs)},
              {"multiple", s.multiple}};
}

std::string stats_table(std::span<const SplitStats> rows) {
  auto cell = [](const std::optional<std::size_t>& v) {
    return v ? std::to_string(*v) : std::string("-");
  };
  std::ostringstream out;
  char line[200];
  std::snprintf(line, sizeof line, "%-14s %-12s %7s %7s %7s %7s %7s\n", "Dataset", "Split",
                "#Sent", "#Trg", "#Asp", "#Imp", "#Mul");
  out << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%-14s %-12s %7zu %7s %7s %7s %7zu\n", r.dataset.c_str(),
                  r.split.c_str(), r.sentences, cell(r.targets).c_str(), cell(r.aspects).c_str(),
                  cell(r.implicit).c_str(), r.multiple);
    out << line;
  }
  bool noted = false;
  for (const auto& r : rows) {
    if (r.implicit && r.implicit_pairs && *r.implicit_pairs != *r.implicit) {
      if (!noted) out << "#Imp counts sentences; implicit pairs differ:\n";
      noted = true;
      out << "  " << r.dataset << " " << r.split << ": " << *r.implicit_pairs
          << " implicit pairs\n";
    }
  }
  return out.str();
}

}  // namespace sentidistill
