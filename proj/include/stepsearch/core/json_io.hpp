#pragma once

// JSON schema for the core types. Field names follow the type definitions in
// snake case; optional fields are written as null when absent. Files holding
// many values use JSON Lines (one object per line).

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/types.hpp"

namespace stepsearch {

void to_json(nlohmann::json& j, const Problem& v);
void from_json(const nlohmann::json& j, Problem& v);
void to_json(nlohmann::json& j, const Step& v);
void from_json(const nlohmann::json& j, Step& v);
void to_json(nlohmann::json& j, const Label& v);
void from_json(const nlohmann::json& j, Label& v);
void to_json(nlohmann::json& j, const CandidateSolution& v);
void from_json(const nlohmann::json& j, CandidateSolution& v);
void to_json(nlohmann::json& j, const TreeNode& v);
void from_json(const nlohmann::json& j, TreeNode& v);
void to_json(nlohmann::json& j, const RolloutNote& v);
void from_json(const nlohmann::json& j, RolloutNote& v);
void to_json(nlohmann::json& j, const SearchTree& v);
void from_json(const nlohmann::json& j, SearchTree& v);
void to_json(nlohmann::json& j, const LeafStats& v);
void from_json(const nlohmann::json& j, LeafStats& v);
void to_json(nlohmann::json& j, const SearchConfig& v);
void from_json(const nlohmann::json& j, SearchConfig& v);
void to_json(nlohmann::json& j, const RewardScore& v);
void from_json(const nlohmann::json& j, RewardScore& v);
void to_json(nlohmann::json& j, const LabeledEntry& v);
void from_json(const nlohmann::json& j, LabeledEntry& v);
void to_json(nlohmann::json& j, const LabeledDataset& v);
void from_json(const nlohmann::json& j, LabeledDataset& v);
void to_json(nlohmann::json& j, const PreferencePair& v);
void from_json(const nlohmann::json& j, PreferencePair& v);
void to_json(nlohmann::json& j, const TraceEvent& v);
void from_json(const nlohmann::json& j, TraceEvent& v);

// Reads JSON Lines; blank lines are skipped. Throws Error(IoError) when the
// file cannot be opened and Error(ConfigError) on a malformed line.
std::vector<nlohmann::json> read_jsonl(const std::filesystem::path& path);
void write_jsonl(const std::filesystem::path& path,
                 const std::vector<nlohmann::json>& rows);

template <typename T>
std::vector<T> read_jsonl_as(const std::filesystem::path& path) {
  std::vector<T> out;
  for (const auto& row : read_jsonl(path)) {
    try {
      out.push_back(row.get<T>());
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ConfigError,
                  path.string() + ": bad record: " + e.what());
    }
  }
  return out;
}

template <typename T>
void write_jsonl_from(const std::filesystem::path& path,
                      const std::vector<T>& values) {
  std::vector<nlohmann::json> rows;
  rows.reserve(values.size());
  for (const auto& v : values) rows.emplace_back(v);
  write_jsonl(path, rows);
}

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path,
                     const nlohmann::json& value);

}  // namespace stepsearch
