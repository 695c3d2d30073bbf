#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sentidistill {

using json = nlohmann::json;

// Hex-encoded SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

std::uint64_t fnv1a64(std::string_view bytes);
std::uint64_t splitmix64(std::uint64_t x);
// Maps 64 random bits onto the open interval (0, 1).
double unit_interval(std::uint64_t bits);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

// Calls `fn(record, line_number)` for every non-blank line. Lines that are not
// valid JSON raise ValidationError naming the file and line.
void read_jsonl(const std::filesystem::path& path,
                const std::function<void(const json&, std::size_t)>& fn);

// One compact JSON document per line. Object keys come out sorted, so equal
// records always serialize to equal bytes.
class JsonlWriter {
 public:
  explicit JsonlWriter(const std::filesystem::path& path);

  void write(const json& record);
  std::size_t count() const { return count_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t count_ = 0;
};

}  // namespace sentidistill
