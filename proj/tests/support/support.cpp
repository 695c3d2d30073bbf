#include "support.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "sentidistill/io.hpp"

#ifndef SENTIDISTILL_FIXTURE_DIR
#define SENTIDISTILL_FIXTURE_DIR "tests/fixtures"
#endif
#ifndef SENTIDISTILL_TEMPLATE_DIR
#define SENTIDISTILL_TEMPLATE_DIR "templates"
#endif

namespace testsupport {

fs::path fixture_dir() { return SENTIDISTILL_FIXTURE_DIR; }
fs::path template_dir() { return SENTIDISTILL_TEMPLATE_DIR; }

TempDir::TempDir() {
  std::string pattern = (fs::temp_directory_path() / "sentidistill-test-XXXXXX").string();
  std::vector<char> buf(pattern.begin(), pattern.end());
  buf.push_back('\0');
  if (!mkdtemp(buf.data())) throw std::runtime_error("mkdtemp failed");
  path_ = buf.data();
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

MockEndpoint::MockEndpoint(Reply reply, std::chrono::microseconds latency)
    : reply_(std::move(reply)), latency_(latency) {}

EndpointReply MockEndpoint::complete(const GenRequest& request) {
  ++calls_;
  std::size_t now = ++in_flight_;
  std::size_t peak = peak_.load();
  while (now > peak && !peak_.compare_exchange_weak(peak, now)) {
  }
  int nth;
  {
    std::lock_guard lock(mu_);
    nth = ++seen_[request.request_id];
  }
  if (latency_.count() > 0) std::this_thread::sleep_for(latency_);
  EndpointReply r = reply_ ? reply_(request, nth) : echo_reply(request, nth);
  --in_flight_;
  return r;
}

std::size_t MockEndpoint::distinct_requests() const {
  std::lock_guard lock(mu_);
  return seen_.size();
}

EndpointReply echo_reply(const GenRequest& request, int) {
  return EndpointReply{EndpointReply::Kind::ok, "echo:" + request.request_id, {}};
}

CliRun run_cli(const std::vector<std::string>& args, const CliContext& base) {
  std::ostringstream out, err;
  CliContext ctx = base;
  ctx.out = &out;
  ctx.err = &err;
  if (!ctx.env) ctx.env = [](const std::string&) -> std::optional<std::string> { return std::nullopt; };
  CliRun r;
  r.status = run_command(args, ctx);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::vector<RawReview> balanced_pool(std::size_t per_star, Domain domain, Source source) {
  static const char* kPhrases[] = {"the food", "our server", "the room", "the price", "the view"};
  std::vector<RawReview> pool;
  for (int stars = 1; stars <= 5; ++stars) {
    for (std::size_t k = 0; k < per_star; ++k) {
      RawReview r;
      r.id = "r" + std::to_string(stars) + "-" + std::to_string(k);
      r.text = "Visit " + std::to_string(k) + " with " + std::to_string(stars) + " stars: " +
               kPhrases[k % 5] + " was memorable in its own way.";
      r.stars = stars;
      r.domain = domain;
      r.source = source;
      pool.push_back(std::move(r));
    }
  }
  return pool;
}

namespace {

const std::vector<std::string> kTargetWords = {
    "pad", "thai", "fries", "battery", "screen", "staff", "wine", "list", "keyboard", "patio",
    "dessert", "trackpad", "fan", "burger", "café", "chef's", "soup", "USB-C", "port", "booth"};
const std::vector<std::string> kAspects = {
    "food quality", "service general", "ambience general", "restaurant prices",
    "battery operation performance", "display quality", "laptop design features",
    "drinks style options", "support quality"};
const std::vector<std::string> kReasonWords = {
    "the", "reviewer", "mentions", "portion", "arrived", "after", "dinner", "which", "suggests",
    "quality", "was", "noted", "compared", "to", "last", "visit", "because", "table", "menu",
    "seems", "clearly", "described", "as", "quick", "slow", "warm", "cold", "loud", "quiet",
    "{braces}", "a:b", "\"quoted\"", "it's", "#tag", "50%", "e.g.", "(aside)", "naïve"};

template <typename T>
const T& pick(std::mt19937_64& rng, const std::vector<T>& v) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

std::string words(std::mt19937_64& rng, const std::vector<std::string>& vocab, std::size_t lo,
                  std::size_t hi) {
  std::size_t n = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    out += pick(rng, vocab);
  }
  return out;
}

}  // namespace

Quadruple random_quadruple(std::mt19937_64& rng) {
  Quadruple q;
  if (std::uniform_int_distribution<int>(0, 4)(rng) != 0) q.target = words(rng, kTargetWords, 1, 3);
  q.aspect = pick(rng, kAspects);
  q.sentiment = static_cast<FiveLevel>(std::uniform_int_distribution<int>(0, 4)(rng));
  q.reasoning = words(rng, kReasonWords, 3, 14);
  return q;
}

std::vector<Quadruple> random_quadruples(std::mt19937_64& rng, std::size_t max_count) {
  std::size_t n = std::uniform_int_distribution<std::size_t>(1, max_count)(rng);
  std::vector<Quadruple> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(random_quadruple(rng));
  return out;
}

std::string canned_analysis(const RawReview& review) {
  std::uint64_t h = fnv1a64(review.id);
  if (h % 10 == 0) return "I am unable to analyze this review.";
  static const char* kLevels[] = {"very negative", "negative", "mild sentiment", "positive",
                                  "very positive"};
  std::string level = kLevels[review.stars - 1];
  std::string first = "**Opinion Target:** the visit\n**Aspect:** restaurant general\n"
                      "**Sentiment:** " + level + "\n**Reasoning:** the review gives " +
                      std::to_string(review.stars) + " stars overall";
  std::string second = "Opinion Target: NULL\nAspect: service general\nSentiment: " + level +
                       "\nReasoning: the tone of review " + review.id + " carries over to service";
  if (h % 10 == 1) return "Analysis:\n\n" + first + "\n\nOpinion Target: NULL\nAspect: service";
  return "Here is the analysis.\n\n1. " + first + "\n\n2. " + second;
}

std::string canned_rewrite(const RawReview& review) {
  return "I went there myself and I felt it deserved " + std::to_string(review.stars) +
         " stars. " + review.text;
}

std::vector<std::string> category_names(Domain domain) {
  if (domain == Domain::restaurant) {
    return {"FOOD#QUALITY",        "FOOD#PRICES",          "FOOD#STYLE_OPTIONS",
            "SERVICE#GENERAL",     "AMBIENCE#GENERAL",     "RESTAURANT#GENERAL",
            "RESTAURANT#PRICES",   "RESTAURANT#MISCELLANEOUS", "DRINKS#QUALITY",
            "DRINKS#PRICES",       "DRINKS#STYLE_OPTIONS", "LOCATION#GENERAL"};
  }
  return {"LAPTOP#GENERAL",      "LAPTOP#PRICE",          "LAPTOP#QUALITY",
          "LAPTOP#DESIGN_FEATURES", "LAPTOP#OPERATION_PERFORMANCE", "LAPTOP#USABILITY",
          "BATTERY#OPERATION_PERFORMANCE", "DISPLAY#QUALITY", "KEYBOARD#DESIGN_FEATURES",
          "SUPPORT#QUALITY",     "OS#GENERAL",            "COMPANY#GENERAL",
          "MOUSE#USABILITY",     "MULTIMEDIA_DEVICES#QUALITY", "CPU#OPERATION_PERFORMANCE",
          "HARD_DISC#QUALITY"};
}

namespace {

struct PlannedOpinion {
  std::optional<std::string> target;  // nullopt: NULL target (or none at all)
  std::string category;
  Polarity polarity = Polarity::positive;
  std::optional<std::vector<std::string>> opinion_words;
};

struct PlannedSentence {
  std::string id;
  std::vector<PlannedOpinion> opinions;
};

std::vector<PlannedSentence> plan_split(XmlFormat format, const std::string& prefix, Domain domain,
                                        const SplitSpec& spec, std::size_t& target_counter) {
  std::size_t pairs = format == XmlFormat::semeval14 ? spec.targets : spec.aspects;
  std::size_t targeted = format == XmlFormat::semeval16 ? spec.targets : 0;
  if (pairs < 2 * spec.multiple) throw std::runtime_error("too few pairs for the multiple count");
  if (spec.multiple > spec.sentences) throw std::runtime_error("too many multiple sentences");

  std::vector<std::size_t> counts(spec.sentences, 0);
  for (std::size_t i = 0; i < spec.multiple; ++i) counts[i] = 2;
  std::size_t remaining = pairs - 2 * spec.multiple;
  for (std::size_t i = spec.multiple; i < spec.sentences && remaining > 0; ++i, --remaining) {
    counts[i] = 1;
  }
  for (std::size_t i = 0; remaining > 0; i = (i + 1) % spec.sentences, --remaining) ++counts[i];

  auto cats = category_names(domain);
  static const Polarity kCycle[] = {Polarity::positive, Polarity::negative, Polarity::neutral};
  std::vector<PlannedSentence> out;
  std::size_t implicit_left = spec.implicit;
  std::size_t opinion_index = 0;
  for (std::size_t i = 0; i < spec.sentences; ++i) {
    PlannedSentence s;
    s.id = prefix + "-" + std::to_string(i);
    Polarity base = kCycle[i % 3];
    if (format == XmlFormat::semeval14 && i % 23 == 5) base = Polarity::conflict;
    bool implicit = false;
    if (spec.annotate_opinion_words && implicit_left > 0 && counts[i] > 0) {
      implicit = true;
      --implicit_left;
    }
    for (std::size_t j = 0; j < counts[i]; ++j, ++opinion_index) {
      PlannedOpinion o;
      o.category = cats[(i + j) % cats.size()];
      o.polarity = i < spec.multiple ? (j % 2 == 0 ? Polarity::positive : Polarity::negative) : base;
      bool has_target = format == XmlFormat::semeval14 ||
                        (format == XmlFormat::semeval16 && opinion_index < targeted);
      if (has_target) o.target = "item" + std::to_string(target_counter++);
      if (spec.annotate_opinion_words) {
        o.opinion_words = (implicit && j == 0) ? std::vector<std::string>{}
                                               : std::vector<std::string>{"great"};
      }
      s.opinions.push_back(std::move(o));
    }
    out.push_back(std::move(s));
  }
  if (implicit_left > 0) throw std::runtime_error("too few sentences with pairs for #Imp");
  if (format == XmlFormat::semeval16 && opinion_index < targeted) {
    throw std::runtime_error("more targets than opinions");
  }
  return out;
}

struct RenderedSentence {
  std::string text;
  std::vector<std::pair<std::size_t, std::size_t>> spans;  // per opinion, when targeted
};

RenderedSentence render_sentence(const PlannedSentence& s) {
  RenderedSentence r;
  r.text = "Sentence " + s.id + " talks about";
  for (const auto& o : s.opinions) {
    if (o.target) {
      r.text += " the ";
      std::size_t from = r.text.size();
      r.text += *o.target;
      r.spans.emplace_back(from, r.text.size());
      r.text += " ,";
    } else {
      r.spans.emplace_back(0, 0);
    }
  }
  r.text += " and more .";
  return r;
}

void emit_sentences(std::ostream& xml, XmlFormat format, const std::vector<PlannedSentence>& plan,
                    std::vector<json>& opinion_words) {
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const auto& s = plan[i];
    auto r = render_sentence(s);
    if (format != XmlFormat::semeval14 && i % 10 == 0) {
      if (i > 0) xml << "    </sentences>\n  </Review>\n";
      xml << "  <Review rid=\"" << s.id << "\">\n    <sentences>\n";
    }
    xml << "      <sentence id=\"" << s.id << "\">\n        <text>" << r.text << "</text>\n";
    if (!s.opinions.empty()) {
      xml << (format == XmlFormat::semeval14 ? "        <aspectTerms>\n" : "        <Opinions>\n");
      for (std::size_t j = 0; j < s.opinions.size(); ++j) {
        const auto& o = s.opinions[j];
        std::string pol(to_string(o.polarity));
        if (format == XmlFormat::semeval14) {
          xml << "          <aspectTerm term=\"" << *o.target << "\" polarity=\"" << pol
              << "\" from=\"" << r.spans[j].first << "\" to=\"" << r.spans[j].second << "\"/>\n";
        } else {
          xml << "          <Opinion";
          if (format == XmlFormat::semeval16) {
            xml << " target=\"" << (o.target ? *o.target : "NULL") << "\"";
          }
          xml << " category=\"" << o.category << "\" polarity=\"" << pol << "\" from=\""
              << r.spans[j].first << "\" to=\"" << r.spans[j].second << "\"/>\n";
        }
        if (o.opinion_words) {
          opinion_words.push_back(json{{"sentence_id", s.id},
                                       {"first", o.target ? *o.target : o.category},
                                       {"opinion_words", *o.opinion_words}});
        }
      }
      xml << (format == XmlFormat::semeval14 ? "        </aspectTerms>\n" : "        </Opinions>\n");
    }
    xml << "      </sentence>\n";
  }
  if (format != XmlFormat::semeval14 && !plan.empty()) xml << "    </sentences>\n  </Review>\n";
}

}  // namespace

void write_semeval_split(const fs::path& xml_path, XmlFormat format, const std::string& id_prefix,
                         Domain domain, const SplitSpec& spec, const SplitSpec* dev,
                         const fs::path& dev_ids_path, const fs::path& opinion_words_path) {
  std::size_t counter = 0;
  auto plan = plan_split(format, id_prefix, domain, spec, counter);
  std::vector<PlannedSentence> dev_plan;
  if (dev) dev_plan = plan_split(format, id_prefix + "-dev", domain, *dev, counter);

  std::ostringstream xml;
  xml << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  xml << (format == XmlFormat::semeval14 ? "<sentences>\n" : "<Reviews>\n");
  std::vector<json> opinion_words;
  emit_sentences(xml, format, plan, opinion_words);
  emit_sentences(xml, format, dev_plan, opinion_words);
  xml << (format == XmlFormat::semeval14 ? "</sentences>\n" : "</Reviews>\n");
  write_file(xml_path, xml.str());

  if (dev) {
    std::string ids;
    for (const auto& s : dev_plan) ids += s.id + "\n";
    write_file(dev_ids_path, ids);
  }
  if (!opinion_words_path.empty()) {
    JsonlWriter w(opinion_words_path);
    for (const auto& j : opinion_words) w.write(j);
  }
}

std::vector<HumanEvalRecord> humaneval_fixture(const std::string& model, const std::string& domain,
                                               const std::array<double, 6>& means,
                                               std::size_t items) {
  std::size_t slots = 2 * items;
  std::array<std::vector<int>, 6> scores;
  for (std::size_t d = 0; d < 6; ++d) {
    auto points = static_cast<std::size_t>(std::llround(means[d] * static_cast<double>(slots)));
    scores[d].assign(slots, 0);
    for (std::size_t s = 0; s < slots && points > 0; ++s) {
      int v = points >= 2 ? 2 : 1;
      scores[d][s] = v;
      points -= static_cast<std::size_t>(v);
    }
  }
  std::vector<HumanEvalRecord> out;
  for (std::size_t k = 0; k < items; ++k) {
    for (int a = 0; a < 2; ++a) {
      HumanEvalRecord r;
      r.item_id = model + "-" + domain + "-" + std::to_string(k);
      r.model = model;
      r.domain = domain;
      r.annotator_id = a == 0 ? "ann1" : "ann2";
      for (std::size_t d = 0; d < 6; ++d) r.scores[d] = scores[d][2 * k + static_cast<std::size_t>(a)];
      out.push_back(std::move(r));
    }
  }
  return out;
}

void write_humaneval(const fs::path& path, const std::vector<HumanEvalRecord>& records) {
  JsonlWriter w(path);
  for (const auto& r : records) {
    json scores = json::object();
    for (std::size_t d = 0; d < 6; ++d) {
      scores[std::string(kHumanEvalDimensions[d])] = static_cast<int>(r.scores[d]);
    }
    w.write(json{{"item_id", r.item_id},
                 {"model", r.model},
                 {"domain", r.domain},
                 {"annotator_id", r.annotator_id},
                 {"scores", scores}});
  }
}

namespace {

std::size_t best_matching(const std::vector<std::pair<std::string, Polarity>>& gold,
                          const std::vector<std::pair<std::string, Polarity>>& pred, std::size_t i,
                          std::vector<bool>& used) {
  if (i == pred.size()) return 0;
  std::size_t best = best_matching(gold, pred, i + 1, used);  // leave pred[i] unmatched
  for (std::size_t g = 0; g < gold.size(); ++g) {
    if (used[g] || gold[g] != pred[i]) continue;
    used[g] = true;
    best = std::max(best, 1 + best_matching(gold, pred, i + 1, used));
    used[g] = false;
  }
  return best;
}

}  // namespace

std::size_t brute_force_matches(const std::vector<std::pair<std::string, Polarity>>& gold,
                                const std::vector<std::pair<std::string, Polarity>>& pred) {
  std::vector<bool> used(gold.size(), false);
  return best_matching(gold, pred, 0, used);
}

std::map<std::string, std::string> tree_checksums(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
  }
  return out;
}

}  // namespace testsupport
