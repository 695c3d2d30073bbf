#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sentidistill/common.hpp"

namespace sentidistill {

enum class PromptKind { analysis, rewriting, icl_tsa, icl_asa, zeroshot_tsa, zeroshot_asa };
enum class ModelFamily { chat_api, open_lm };

std::string_view to_string(PromptKind k);
PromptKind parse_prompt_kind(std::string_view s);
ModelFamily parse_model_family(std::string_view s);

// A worked example: for analysis/rewriting the review and the expected
// completion; for in-context learning the sentence and its label list.
struct Demo {
  std::string review;
  std::string completion;
};

// Template text with `{slot}` markers. `{{` and `}}` stand for literal braces.
class PromptTemplate {
 public:
  PromptTemplate() = default;
  explicit PromptTemplate(std::string body);

  const std::string& body() const { return body_; }
  std::vector<std::string> slots() const;

  // Single pass: substituted values are inserted verbatim and never rescanned,
  // so text that looks like a slot inside a value stays literal. Throws
  // ValidationError if a slot has no value.
  std::string render(const std::map<std::string, std::string, std::less<>>& values) const;

 private:
  struct Segment {
    bool is_slot = false;
    std::string text;  // literal text or slot name
  };

  std::string body_;
  std::vector<Segment> segments_;
};

// Templates and the fixed corpus-generation demos, loaded from a directory
// with a manifest.json listing each file's SHA-256. Any checksum mismatch
// fails the load.
class TemplateStore {
 public:
  static TemplateStore load(const std::filesystem::path& dir);
  // Directory compiled into the build (the repo's templates/).
  static std::filesystem::path default_dir();

  const PromptTemplate& get(std::string_view name) const;
  const Demo& analysis_demo() const { return analysis_demo_; }
  const Demo& rewriting_demo() const { return rewriting_demo_; }
  int version() const { return version_; }
  // Checksum over the manifest, identifying this template set.
  const std::string& fingerprint() const { return fingerprint_; }

 private:
  std::map<std::string, PromptTemplate, std::less<>> templates_;
  Demo analysis_demo_;
  Demo rewriting_demo_;
  int version_ = 0;
  std::string fingerprint_;
};

// Number of in-context demos: 4 for tsa_laptop14, 8 otherwise.
std::size_t icl_demo_count(std::string_view dataset_name);

class PromptRenderer {
 public:
  explicit PromptRenderer(const TemplateStore& store) : store_(&store) {}

  std::string render_analysis(std::string_view review, const Demo& demo) const;
  std::string render_rewriting(std::string_view review, const Demo& demo) const;
  std::string render_icl(Task task, std::string_view sentence, std::span<const Demo> demos,
                         std::optional<std::span<const std::string>> category_space = std::nullopt) const;
  std::string render_zeroshot(Task task, std::string_view sentence, std::string_view target,
                              ModelFamily family) const;

  // Corpus-generation prompt for one review, using the store's fixed demo.
  std::string render_generation(PromptKind kind, std::string_view review) const;

 private:
  const TemplateStore* store_;
};

// How a demo appears inside the Example section.
std::string format_generation_demo(const Demo& demo);

}  // namespace sentidistill
