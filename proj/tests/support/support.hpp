#pragma once

#include <array>
#include <atomic>
#include <map>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <mutex>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "sentidistill/cli.hpp"
#include "sentidistill/corpus.hpp"
#include "sentidistill/datasets.hpp"
#include "sentidistill/eval.hpp"
#include "sentidistill/llm_client.hpp"
#include "sentidistill/parser.hpp"
#include "sentidistill/sampler.hpp"

namespace testsupport {

using namespace sentidistill;
namespace fs = std::filesystem;

fs::path fixture_dir();
fs::path template_dir();

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& name) const { return path_ / name; }

 private:
  fs::path path_;
};

// Endpoint double that counts calls and tracks how many run concurrently.
class MockEndpoint : public Endpoint {
 public:
  using Reply = std::function<EndpointReply(const GenRequest&, int call_for_request)>;

  explicit MockEndpoint(Reply reply = {}, std::chrono::microseconds latency = {});

  EndpointReply complete(const GenRequest& request) override;

  std::size_t calls() const { return calls_.load(); }
  std::size_t peak_in_flight() const { return peak_.load(); }
  // Distinct request ids that reached the endpoint.
  std::size_t distinct_requests() const;

 private:
  Reply reply_;
  std::chrono::microseconds latency_;
  std::atomic<std::size_t> calls_{0};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> peak_{0};
  mutable std::mutex mu_;
  std::map<std::string, int> seen_;
};

// Echoes a deterministic completion derived from the prompt.
EndpointReply echo_reply(const GenRequest& request, int);

// run_command with captured streams.
struct CliRun {
  int status = 0;
  std::string out;
  std::string err;
};
CliRun run_cli(const std::vector<std::string>& args, const CliContext& base = {});

// Reviews with `per_star` reviews for each rating, ids r<stars>-<k>.
std::vector<RawReview> balanced_pool(std::size_t per_star, Domain domain = Domain::restaurant,
                                     Source source = Source::yelp);

// Random quadruple lists whose values survive serialization: single-line,
// trimmed, no label-like prefixes. Reasoning never contains a sentiment
// surface form.
Quadruple random_quadruple(std::mt19937_64& rng);
std::vector<Quadruple> random_quadruples(std::mt19937_64& rng, std::size_t max_count);

// Canned teacher outputs used by the end-to-end fixture.
std::string canned_analysis(const RawReview& review);
std::string canned_rewrite(const RawReview& review);

// Target counts for one split of the synthetic SemEval fixture.
struct SplitSpec {
  std::size_t sentences = 0;
  std::size_t targets = 0;  // ignored when the format has no targets
  std::size_t aspects = 0;  // SemEval-16 opinions; ignored for SemEval-14
  std::size_t implicit = 0;  // needs opinion-word annotations
  std::size_t multiple = 0;
  bool annotate_opinion_words = false;
};

enum class XmlFormat { semeval14, semeval16, semeval16_no_targets };

// Writes a SemEval-style XML file (plus an opinion-word JSONL next to it when
// requested) whose statistics match `spec`. When `dev` is given its sentences
// are appended to the same file and their ids written to `dev_ids_path`.
void write_semeval_split(const fs::path& xml_path, XmlFormat format, const std::string& id_prefix,
                         Domain domain, const SplitSpec& spec, const SplitSpec* dev = nullptr,
                         const fs::path& dev_ids_path = {},
                         const fs::path& opinion_words_path = {});

std::vector<std::string> category_names(Domain domain);

// Two-annotator human-evaluation records for `items` items whose per-dimension
// means are exactly round(mean * 2 * items) / (2 * items).
std::vector<HumanEvalRecord> humaneval_fixture(const std::string& model, const std::string& domain,
                                               const std::array<double, 6>& means,
                                               std::size_t items);
void write_humaneval(const fs::path& path, const std::vector<HumanEvalRecord>& records);

// Exhaustive maximum one-to-one matching between gold and predicted pairs
// under exact equality of normalized keys.
std::size_t brute_force_matches(const std::vector<std::pair<std::string, Polarity>>& gold,
                                const std::vector<std::pair<std::string, Polarity>>& pred);

// Hex SHA-256 of every file under `dir`, keyed by relative path.
std::map<std::string, std::string> tree_checksums(const fs::path& dir);

}  // namespace testsupport
