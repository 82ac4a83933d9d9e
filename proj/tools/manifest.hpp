#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

namespace wcf::cli {

/// Lowercase hex SHA-256 of a file's bytes; throws std::runtime_error with
/// the path in the message when the file cannot be read.
std::string sha256_file(const std::filesystem::path& path);

/// Current time as ISO-8601 UTC, e.g. "2024-05-01T12:00:00Z".
std::string utc_timestamp();

/// Provenance record written next to every command's outputs. Reruns of the
/// same invocation on the same inputs produce identical manifests except for
/// the timestamp field.
struct RunManifest {
  std::string command;
  nlohmann::ordered_json config = nlohmann::ordered_json::object();
  std::vector<std::filesystem::path> inputs;  // digested in the order given
  std::vector<std::string> model_order;       // positional-argument order
  std::vector<std::string> outputs;

  nlohmann::ordered_json to_json() const;
  void write(const std::filesystem::path& path) const;
};

}  // namespace wcf::cli
