#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "conav/scenario.hpp"
#include "conav/types.hpp"
#include "conav/world.hpp"

namespace conav {

// Sparse bag-of-tokens vector over lowercased alphanumeric tokens.
using FeatureVector = std::map<std::string, int>;

FeatureVector encode(const std::string& text);
FeatureVector encode(const std::vector<std::string>& texts);
void merge_into(FeatureVector& dst, const FeatureVector& src);
double cosine(const FeatureVector& a, const FeatureVector& b);

enum class CauseCategory {
  Misperception,
  SpatialMisjudgment,
  Oscillation,
  Stagnation,
  Other
};

std::string to_string(CauseCategory c);
CauseCategory cause_from_string(const std::string& s);

// Marker used for a_corr when no corrective action ended the segment.
inline constexpr const char* kNoCorrection = "NoCorrection";

struct ReflectiveTuple {
  std::vector<std::string> f_err_tokens;  // failure-prone scene tokens
  Action a_err = Action::MoveForward;
  CauseCategory cause = CauseCategory::Other;
  std::string cause_text;
  std::string a_corr = kNoCorrection;  // action name or marker
};

struct TrajectoryContext {
  std::vector<Pose> poses;
  std::vector<Action> actions;
  std::vector<std::string> observations;  // per-step digests
};

struct ExperienceEntry {
  std::string id;
  FeatureVector features;
  TrajectoryContext context;
  ReflectiveTuple reflective;

  void validate() const;  // throws CorruptBank on invariant violation
};

struct RetrievalHit {
  const ExperienceEntry* entry = nullptr;
  double score = 0.0;
};

struct EmptyBankError : std::runtime_error {
  EmptyBankError() : std::runtime_error("experience bank is empty") {}
};
struct CorruptBankError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class ExperienceBank {
 public:
  void store(ExperienceEntry entry);  // id-unique insert; duplicate replaces
  size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }
  const std::vector<ExperienceEntry>& entries() const { return entries_; }

  // Entries ranked by cosine similarity descending, ties by id ascending.
  std::vector<RetrievalHit> retrieve(const FeatureVector& query,
                                     size_t top_k) const;

  json to_json() const;
  static ExperienceBank from_json(const json& j);
  void persist(const std::string& path) const;
  static ExperienceBank load(const std::string& path);

  bool operator==(const ExperienceBank& o) const;

  static constexpr int kSchemaVersion = 1;

 private:
  std::vector<ExperienceEntry> entries_;  // kept sorted by id
};

// ---------------------------------------------------------------------------
// Synchronous history archive (one record per executed world step).

struct ReflectionEvent {
  std::string stage;   // "local" | "global"
  std::string flag;    // "conflict" | "risk" | "mismatch" | "deadlock" |
                       // "subtask_done"
  std::string reason;
  std::optional<std::string> matched_id;
  std::optional<double> similarity;
  std::optional<std::string> action;       // proposed action, if any
  std::optional<std::string> replacement;  // substituted action, if any
  int subtask = 0;  // active sub-task index when the event fired

  json to_json() const;
  static ReflectionEvent from_json(const json& j);
};

struct HistoryRecord {
  int t = 0;
  Pose pose;                 // pose at which the action was taken
  Action action = Action::Stop;
  StepOutcome outcome = StepOutcome::Stopped;
  std::string observation;   // digest of the environment description
  int map_ref = -1;          // step index of the map snapshot
  std::vector<ReflectionEvent> reflection_events;
  int subtask = 1;           // active sub-task index (1-based)

  json to_json() const;
  static HistoryRecord from_json(const json& j);
};

struct OutOfOrderError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class History {
 public:
  // Appends; record.t must be 0 for the first record, last t + 1 after.
  void log(HistoryRecord record);
  const std::vector<HistoryRecord>& records() const { return records_; }
  size_t size() const { return records_.size(); }
  bool empty() const { return records_.empty(); }

  // The most recent `n` records (fewer when the history is shorter).
  std::vector<HistoryRecord> window(size_t n) const;

 private:
  std::vector<HistoryRecord> records_;
};

}  // namespace conav
