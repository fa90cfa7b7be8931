#include "manifest.hpp"

#include <fstream>

#include "bonelayer/error.hpp"
#include "bonelayer/version.hpp"

namespace bonelayer::cli {

Manifest::Manifest(std::string command)
    : command_(std::move(command)), start_(std::chrono::steady_clock::now()) {}

Json Manifest::to_json() const {
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
  Json j;
  j["schema_version"] = kManifestSchemaVersion;
  j["command"] = command_;
  j["tool_version"] = kVersion;
  j["seed"] = seed_ ? Json(*seed_) : Json(nullptr);
  j["config"] = config_;
  j["inputs"] = inputs_;
  j["outputs"] = outputs_;
  j["result"] = result_;
  j["timing"] = {{"wall_seconds", elapsed.count()}};
  return j;
}

std::filesystem::path Manifest::write(const std::filesystem::path& dir) const {
  const auto path = dir / "manifest.json";
  write_text(path, to_json().dump(2) + "\n");
  return path;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path.string(), "cannot open for writing");
  out << text;
  if (!out) throw IoError(path.string(), "write failed");
}

}  // namespace bonelayer::cli
