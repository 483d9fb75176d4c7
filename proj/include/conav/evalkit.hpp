#pragma once

#include <optional>
#include <string>
#include <vector>

#include <functional>

#include "conav/orchestrator.hpp"
#include "conav/trace.hpp"

namespace conav {

struct SplRow {
  int success = 0;   // S_i in {0, 1}
  double length = 0.0;      // L_i, meters actually traveled
  double optimal = 0.0;     // L_i*, shortest-path meters
};

struct EmptyInputError : std::runtime_error {
  EmptyInputError() : std::runtime_error("spl over empty input") {}
};

// SPL = (1/N) * sum_i S_i * L_i* / max(L_i, L_i*).
double spl(const std::vector<SplRow>& rows);

struct ReflectCounts {
  int checks = 0;
  int flagged = 0;
  int confirmed = 0;
  int rollbacks = 0;          // sub-tasks with at least one intervention
  int rollback_success = 0;   // of those, completed ones
  int retrievals = 0;
  int retrievals_relevant = 0;
};

struct EpisodeMetrics {
  int nl = 0;          // executed world steps
  double ne = 0.0;     // final distance to last target
  int success = 0;     // in-order completion and DONE
  int oracle_success = 0;
  double length = 0.0;    // L, meters traveled
  double optimal = 0.0;   // L*, in-order shortest path meters
  std::vector<bool> key_decisions;
  ReflectCounts reflect;
  std::string status;  // "DONE" | "FAILED"
  std::string failure_cause;
};

struct TraceCorrupt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Scores a finished episode against ground truth. `radius` is the success
// radius used for both in-order sub-task satisfaction and the oracle check.
EpisodeMetrics score_episode(const Trace& trace, const Scenario& scenario,
                             double radius = 1.0);

struct ReflectionAggregate {
  std::optional<double> edr;  // percent
  std::optional<double> ra;
  std::optional<double> rsr;
  std::optional<double> mra;
};

ReflectionAggregate reflection_metrics(const std::vector<EpisodeMetrics>& rows);

struct BenchRow {
  std::string scenario_name;
  std::string scenario_hash;
  int repeat = 0;
  EpisodeMetrics metrics;
};

struct BenchReport {
  std::vector<BenchRow> rows;
  int repeats = 0;
  AblationFlags ablate;
  json config_echo;

  double nl_mean = 0.0;
  double ne_mean = 0.0;
  double sr_pct = 0.0;
  double osr_pct = 0.0;
  double spl_pct = 0.0;
  std::optional<double> kpa_pct;
  ReflectionAggregate reflection;

  json to_json() const;
  std::string to_text() const;  // aligned table
};

struct BenchOptions {
  EpisodeConfig config;
  int repeats = 5;
  uint64_t seed_base = 0;
  int jobs = 1;
  std::string trace_dir;  // when set, per-episode traces are written here
  const ExperienceBank* initial_bank = nullptr;
};

struct NamedScenario {
  std::string name;
  Scenario scenario;
};

// Builds a fresh backend set per episode (scripted backends carry
// per-episode state).
using BackendFactory = std::function<Backends()>;

// Runs repeats x scenarios episodes (distinct noise seeds per repeat, same
// start), scores each and aggregates. Episodes see the initial bank only;
// distilled entries are merged into `out_bank` afterwards in episode order.
BenchReport run_bench(const std::vector<NamedScenario>& scenarios,
                      const BackendFactory& make_backends,
                      const BenchOptions& options,
                      ExperienceBank* out_bank = nullptr);

// Validates that a trace's envelope stream replays through the transition
// table; throws IllegalTransition or TraceCorrupt on violation.
void replay_transitions(const Trace& trace);

// Re-simulates the trace's action sequence and checks the recorded pose
// trajectory; returns false on divergence.
bool replay_matches(const Trace& trace);

}  // namespace conav
