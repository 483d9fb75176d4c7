#include "conav/trace.hpp"

#include "conav/version.hpp"

namespace conav {

TraceWriter::TraceWriter(const std::string& path) {
  file_.emplace(path);
  if (!*file_) throw TraceError("cannot open trace file for writing: " + path);
}

void TraceWriter::header(const json& scenario, const json& config,
                         const std::string& scenario_hash) {
  json j;
  j["kind"] = "header";
  j["scenario_hash"] = scenario_hash;
  j["scenario"] = scenario;
  j["config"] = config;
  j["version"] = kVersion;
  record(std::move(j));
}

void TraceWriter::record(json j) {
  if (!j.contains("kind")) throw TraceError("trace record without kind");
  if (file_) *file_ << j.dump() << "\n";
  records_.push_back(std::move(j));
}

void TraceWriter::flush() {
  if (file_) file_->flush();
}

std::vector<json> Trace::of_kind(const std::string& kind) const {
  std::vector<json> out;
  for (const auto& r : records)
    if (r.at("kind").get<std::string>() == kind) out.push_back(r);
  return out;
}

Scenario Trace::scenario() const {
  return scenario_from_json(header.at("scenario"));
}

Trace trace_from_records(const std::vector<json>& all) {
  if (all.empty()) throw TraceError("empty trace");
  if (all.front().at("kind").get<std::string>() != "header")
    throw TraceError("trace does not start with a header record");
  Trace t;
  t.header = all.front();
  t.records.assign(all.begin() + 1, all.end());
  return t;
}

Trace read_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw TraceError("cannot open trace file: " + path);
  std::vector<json> all;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      all.push_back(json::parse(line));
    } catch (const json::exception& e) {
      throw TraceError("trace line " + std::to_string(line_no) +
                       " is not valid JSON: " + e.what());
    }
  }
  return trace_from_records(all);
}

}  // namespace conav
