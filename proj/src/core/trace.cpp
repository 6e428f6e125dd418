#include "stepsearch/core/trace.hpp"

#include "stepsearch/core/error.hpp"
#include "stepsearch/core/json_io.hpp"

namespace stepsearch {

TraceLog::TraceLog(const std::filesystem::path& path)
    : sink_(path, std::ios::binary | std::ios::trunc) {
  if (!sink_) throw Error(ErrorKind::IoError, "cannot write " + path.string());
}

void TraceLog::emit(const std::string& tree_id, TraceEventKind kind,
                    nlohmann::json payload) {
  std::lock_guard lock(mutex_);
  TraceEvent ev;
  ev.timestamp = events_.size();
  ev.tree_id = tree_id;
  ev.event = kind;
  ev.payload = std::move(payload);
  if (sink_.is_open()) {
    sink_ << nlohmann::json(ev).dump() << '\n';
    sink_.flush();
  }
  events_.push_back(std::move(ev));
}

void TraceLog::write(const std::filesystem::path& path) const {
  write_jsonl_from(path, events_);
}

}  // namespace stepsearch
