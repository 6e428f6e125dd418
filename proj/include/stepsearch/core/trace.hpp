#pragma once

#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <json.hpp>

#include "stepsearch/core/types.hpp"

namespace stepsearch {

// Collects the TraceEvent stream of one tree and optionally mirrors it to a
// JSONL file as events arrive.
class TraceLog {
 public:
  TraceLog() = default;
  explicit TraceLog(const std::filesystem::path& path);

  void emit(const std::string& tree_id, TraceEventKind kind,
            nlohmann::json payload);

  const std::vector<TraceEvent>& events() const { return events_; }
  void write(const std::filesystem::path& path) const;

 private:
  std::mutex mutex_;
  std::vector<TraceEvent> events_;
  std::ofstream sink_;
};

}  // namespace stepsearch
