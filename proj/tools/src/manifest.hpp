#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "config.hpp"

namespace bonelayer::cli {

inline constexpr int kManifestSchemaVersion = 1;

/// Run record written as manifest.json next to a command's outputs. Only the
/// "timing" member varies between identical runs.
class Manifest {
 public:
  explicit Manifest(std::string command);

  void set_config(Json config) { config_ = std::move(config); }
  void set_seed(std::uint64_t seed) { seed_ = seed; }
  void add_input(const std::filesystem::path& p) { inputs_.push_back(p.generic_string()); }
  void add_output(const std::filesystem::path& p) { outputs_.push_back(p.generic_string()); }
  void set_result(Json result) { result_ = std::move(result); }

  Json to_json() const;
  /// Writes dir/manifest.json and returns its path.
  std::filesystem::path write(const std::filesystem::path& dir) const;

 private:
  std::string command_;
  Json config_ = Json::object();
  std::optional<std::uint64_t> seed_;
  std::vector<std::string> inputs_;
  std::vector<std::string> outputs_;
  Json result_ = Json::object();
  std::chrono::steady_clock::time_point start_;
};

/// Writes `text` to `path`, creating parent directories.
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace bonelayer::cli
