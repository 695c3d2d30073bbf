#include "sentidistill/prompts.hpp"

#include "sentidistill/io.hpp"

#ifndef SENTIDISTILL_TEMPLATE_DIR
#define SENTIDISTILL_TEMPLATE_DIR "templates"
#endif

namespace sentidistill {

std::string_view to_string(PromptKind k) {
  switch (k) {
    case PromptKind::analysis: return "analysis";
    case PromptKind::rewriting: return "rewriting";
    case PromptKind::icl_tsa: return "icl_tsa";
    case PromptKind::icl_asa: return "icl_asa";
    case PromptKind::zeroshot_tsa: return "zeroshot_tsa";
    case PromptKind::zeroshot_asa: return "zeroshot_asa";
  }
  return "analysis";
}

PromptKind parse_prompt_kind(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "analysis" || v == "anl") return PromptKind::analysis;
  if (v == "rewriting" || v == "rw") return PromptKind::rewriting;
  if (v == "icl_tsa") return PromptKind::icl_tsa;
  if (v == "icl_asa") return PromptKind::icl_asa;
  if (v == "zeroshot_tsa") return PromptKind::zeroshot_tsa;
  if (v == "zeroshot_asa") return PromptKind::zeroshot_asa;
  throw ValidationError("unknown prompt kind '" + std::string(s) + "'");
}

ModelFamily parse_model_family(std::string_view s) {
  std::string v = to_lower(trim(s));
  if (v == "chat_api" || v == "chat") return ModelFamily::chat_api;
  if (v == "open_lm" || v == "open") return ModelFamily::open_lm;
  throw ValidationError("unknown model family '" + std::string(s) + "'");
}

PromptTemplate::PromptTemplate(std::string body) : body_(std::move(body)) {
  std::string literal;
  for (std::size_t i = 0; i < body_.size(); ++i) {
    char c = body_[i];
    if ((c == '{' || c == '}') && i + 1 < body_.size() && body_[i + 1] == c) {
      literal.push_back(c);
      ++i;
      continue;
    }
    if (c == '{') {
      std::size_t close = body_.find('}', i + 1);
      if (close == std::string::npos) throw ValidationError("unterminated slot in template");
      if (!literal.empty()) segments_.push_back({false, std::move(literal)});
      literal.clear();
      segments_.push_back({true, body_.substr(i + 1, close - i - 1)});
      i = close;
      continue;
    }
    if (c == '}') throw ValidationError("stray '}' in template");
    literal.push_back(c);
  }
  if (!literal.empty()) segments_.push_back({false, std::move(literal)});
}

std::vector<std::string> PromptTemplate::slots() const {
  std::vector<std::string> out;
  for (const auto& s : segments_) {
    if (s.is_slot) out.push_back(s.text);
  }
  return out;
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string, std::less<>>& values) const {
  std::string out;
  for (const auto& s : segments_) {
    if (!s.is_slot) {
      out += s.text;
      continue;
    }
    auto it = values.find(s.text);
    if (it == values.end()) throw ValidationError("no value for slot {" + s.text + "}");
    out += it->second;
  }
  return out;
}

namespace {

Demo load_demo(const std::filesystem::path& path) {
  json j = json::parse(read_file(path));
  return Demo{j.at("review").get<std::string>(), j.at("completion").get<std::string>()};
}

}  // namespace

TemplateStore TemplateStore::load(const std::filesystem::path& dir) {
  TemplateStore store;
  std::string manifest_text = read_file(dir / "manifest.json");
  json manifest;
  try {
    manifest = json::parse(manifest_text);
  } catch (const json::exception& e) {
    throw ValidationError("template manifest: " + std::string(e.what()));
  }
  store.version_ = manifest.value("version", 0);
  store.fingerprint_ = sha256_hex(manifest_text);
  for (const auto& [name, entry] : manifest.at("files").items()) {
    std::filesystem::path path = dir / entry.at("path").get<std::string>();
    std::string expected = entry.at("sha256").get<std::string>();
    std::string actual = sha256_file(path);
    if (actual != expected) {
      throw ValidationError("template checksum mismatch for " + path.string() + ": manifest " +
                            expected + ", file " + actual);
    }
    if (name == "demo_analysis") {
      store.analysis_demo_ = load_demo(path);
    } else if (name == "demo_rewriting") {
      store.rewriting_demo_ = load_demo(path);
    } else {
      store.templates_.emplace(name, PromptTemplate(read_file(path)));
    }
  }
  for (std::string_view required :
       {"analysis", "rewriting", "icl_tsa", "icl_asa", "zeroshot_tsa_chat", "zeroshot_asa_chat",
        "zeroshot_tsa_open", "zeroshot_asa_open"}) {
    if (store.templates_.find(required) == store.templates_.end()) {
      throw ValidationError("template manifest lacks '" + std::string(required) + "'");
    }
  }
  return store;
}

std::filesystem::path TemplateStore::default_dir() {
  return SENTIDISTILL_TEMPLATE_DIR;
}

const PromptTemplate& TemplateStore::get(std::string_view name) const {
  auto it = templates_.find(name);
  if (it == templates_.end()) throw ValidationError("unknown template '" + std::string(name) + "'");
  return it->second;
}

std::size_t icl_demo_count(std::string_view dataset_name) {
  return dataset_name == "tsa_laptop14" ? 4 : 8;
}

std::string format_generation_demo(const Demo& demo) {
  if (demo.review.empty() && demo.completion.empty()) return {};
  return "Review: " + demo.review + "\n\n" + demo.completion;
}

namespace {

std::string require_text(std::string_view s, std::string_view what) {
  if (trim(s).empty()) throw ValidationError(std::string(what) + " must not be empty");
  return std::string(s);
}

std::string quoted_list(std::span<const std::string> items) {
  std::string out = "[";
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i > 0) out += ", ";
    out += "'" + items[i] + "'";
  }
  return out + "]";
}

}  // namespace

std::string PromptRenderer::render_analysis(std::string_view review, const Demo& demo) const {
  return store_->get("analysis").render(
      {{"demo", format_generation_demo(demo)}, {"input review", require_text(review, "review")}});
}

std::string PromptRenderer::render_rewriting(std::string_view review, const Demo& demo) const {
  return store_->get("rewriting").render(
      {{"demo", format_generation_demo(demo)}, {"input review", require_text(review, "review")}});
}

std::string PromptRenderer::render_icl(Task task, std::string_view sentence,
                                       std::span<const Demo> demos,
                                       std::optional<std::span<const std::string>> category_space) const {
  std::string block;
  for (const auto& d : demos) {
    block += "Sentence: " + d.review + "\nLabel: " + d.completion + "\n";
  }
  if (!block.empty()) block += "\n";
  std::map<std::string, std::string, std::less<>> values{
      {"demos", block}, {"sentence", require_text(sentence, "sentence")}};
  if (task == Task::tsa) return store_->get("icl_tsa").render(values);

  if (!category_space) throw ValidationError("missing category space for ASA prompt");
  std::vector<std::string> categories;
  for (const auto& c : *category_space) categories.push_back(normalize_category(c));
  values.emplace("category space", quoted_list(categories));
  return store_->get("icl_asa").render(values);
}

std::string PromptRenderer::render_zeroshot(Task task, std::string_view sentence,
                                            std::string_view target, ModelFamily family) const {
  std::string name = std::string("zeroshot_") + std::string(to_string(task)) +
                     (family == ModelFamily::chat_api ? "_chat" : "_open");
  return store_->get(name).render({{"sentence", require_text(sentence, "sentence")},
                                   {"target", require_text(target, "target")}});
}

std::string PromptRenderer::render_generation(PromptKind kind, std::string_view review) const {
  switch (kind) {
    case PromptKind::analysis: return render_analysis(review, store_->analysis_demo());
    case PromptKind::rewriting: return render_rewriting(review, store_->rewriting_demo());
    default: throw ValidationError("corpus generation uses the analysis or rewriting prompt");
  }
}

}  // namespace sentidistill
