#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sentidistill/io.hpp"
#include "sentidistill/llm_client.hpp"

namespace sentidistill {

struct PipelineConfig {
  EndpointConfig endpoint;
  std::string teacher = "gpt35";
  std::string model;
  std::string scheme = "R11111";
  std::size_t n = 0;
  std::uint64_t seed = 17;
  bool refill = false;
  std::vector<std::string> variants{"anl"};
  struct Paths {
    std::string reviews;
    std::string cache;
    std::string corpus;
    std::string datasets;
    std::string predictions;
    std::string reports;
    friend bool operator==(const Paths&, const Paths&) = default;
  } paths;
  std::optional<std::size_t> budget;
  std::size_t max_in_flight = 4;
  int max_attempts = 3;
  int base_backoff_ms = 500;
  double temperature = 0.0;
  int max_new_tokens = 512;
  std::size_t shard_size = 50000;
  std::size_t max_input_tokens = 128;
  std::size_t max_output_tokens = 400;
};

bool operator==(const PipelineConfig& a, const PipelineConfig& b);

// Full config including the API key. Use redacted_config for anything that
// is written next to outputs.
json to_json(const PipelineConfig& c);
json redacted_config(const PipelineConfig& c);
// Missing keys keep their defaults; unknown keys are a ValidationError.
PipelineConfig pipeline_config_from_json(const json& j);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
// Non-empty paths must be pairwise distinct.
void validate_config(const PipelineConfig& c);

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;
// SENTIDISTILL_ENDPOINT_URL and SENTIDISTILL_API_KEY override the endpoint
// settings of a config file; command-line flags override both.
void apply_env(PipelineConfig& c, const EnvLookup& env);

// {path, sha256} for a file, or one entry per file (sorted) under a
// directory. Missing paths are a ValidationError.
json checksum_entries(const std::filesystem::path& path);

// Run manifest: tool version, command, the options needed to repeat the run,
// and checksums of inputs and outputs. Contains no timestamps.
json run_manifest(std::string_view command, const json& options,
                  const std::vector<std::filesystem::path>& inputs,
                  const std::vector<std::filesystem::path>& outputs, const json& summary);

struct CliContext {
  std::ostream* out = nullptr;  // defaults to std::cout
  std::ostream* err = nullptr;  // defaults to std::cerr
  EnvLookup env;                // defaults to std::getenv
  // Builds the endpoint used by `generate`; defaults to ChatCompletionsEndpoint.
  std::function<std::unique_ptr<Endpoint>(const EndpointConfig&)> make_endpoint;
  std::function<void(std::chrono::milliseconds)> sleep;
};

// Runs one subcommand. `args` excludes the program name.
// Returns 0 on success, 1 on validation or data errors, 2 on usage errors.
int run_command(const std::vector<std::string>& args, const CliContext& ctx = {});

}  // namespace sentidistill
