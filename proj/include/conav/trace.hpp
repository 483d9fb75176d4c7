#pragma once

#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include "conav/scenario.hpp"

namespace conav {

struct TraceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// JSON Lines episode trace. First line is a header carrying the scenario,
// effective config and code version; every envelope, history record and
// reflection event follows as one record with a `kind` discriminator.
class TraceWriter {
 public:
  TraceWriter() = default;  // in-memory only
  explicit TraceWriter(const std::string& path);

  void header(const json& scenario, const json& config,
              const std::string& scenario_hash);
  void record(json j);  // must carry "kind"

  const std::vector<json>& records() const { return records_; }
  void flush();

 private:
  std::optional<std::ofstream> file_;
  std::vector<json> records_;
};

struct Trace {
  json header;
  std::vector<json> records;  // everything after the header

  std::vector<json> of_kind(const std::string& kind) const;
  Scenario scenario() const;  // scenario embedded in the header
};

Trace read_trace(const std::string& path);
Trace trace_from_records(const std::vector<json>& all);

}  // namespace conav
