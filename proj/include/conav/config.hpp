#pragma once

#include <string>
#include <vector>

#include "conav/llm_backend.hpp"
#include "conav/orchestrator.hpp"

namespace conav {

// Effective run configuration. Precedence: CLI flag > config file >
// built-in default; unknown file keys are rejected.
struct RunConfig {
  std::vector<std::string> scenario_paths;
  std::string backend = "scripted";  // "scripted" | "remote"
  std::string planner_backend;       // per-role overrides; empty = global
  std::string observer_backend;
  std::string controller_backend;
  EpisodeConfig episode;
  RemoteConfig remote;
  std::string trace_path;
  std::string trace_dir;
  std::string report_dir;
  std::string bank_path;
  int repeat = 5;
  int jobs = 1;
  uint64_t seed_base = 0;

  void apply_file(const std::string& path);  // throws ConfigError
  void apply_json(const json& j);
  void validate() const;
  json to_json() const;

  // Builds the backend set for the configured selection; remote roles share
  // one client. The audit hook is attached by the caller.
  Backends build_backends(std::shared_ptr<HttpChatClient>* client_out) const;
};

}  // namespace conav
