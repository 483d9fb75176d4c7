#include "conav/reflection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <sstream>

namespace conav {

std::string to_string(VerdictFlag f) {
  switch (f) {
    case VerdictFlag::Pass: return "pass";
    case VerdictFlag::Conflict: return "conflict";
    case VerdictFlag::Risk: return "risk";
  }
  throw std::logic_error("unknown VerdictFlag");
}

std::string to_string(SegmentLabel l) {
  switch (l) {
    case SegmentLabel::Progress: return "progress";
    case SegmentLabel::Stagnation: return "stagnation";
    case SegmentLabel::Oscillation: return "oscillation";
    case SegmentLabel::Failure: return "failure";
  }
  throw std::logic_error("unknown SegmentLabel");
}

std::tuple<long long, long long, int, std::string> LocalReflector::key(
    const Pose& pose, const std::string& tag) {
  return {std::llround(pose.x * 1e6), std::llround(pose.y * 1e6), pose.heading,
          tag};
}

bool LocalReflector::known_mismatch(const Pose& pose, Action action) const {
  return mismatches_.count(key(pose, to_string(action))) > 0;
}

StepOutcome expected_outcome(Action action, const EnvDescription& env) {
  switch (action) {
    case Action::TurnLeft90:
    case Action::TurnRight90:
      return StepOutcome::Turned;
    case Action::Stop:
      return StepOutcome::Stopped;
    case Action::MoveForward:
      return env.traversable(ViewDir::Front) ? StepOutcome::Moved
                                             : StepOutcome::Blocked;
  }
  throw std::logic_error("unknown Action");
}

LocalVerdict LocalReflector::local_check(Action action,
                                         const EnvDescription& env,
                                         const AgentMap& map,
                                         const SubTask& subtask,
                                         const ExperienceBank& bank) {
  ++checks_;
  const Pose* pose =
      map.geo.trajectory.empty() ? nullptr : &map.geo.trajectory.back();

  LocalVerdict verdict;

  if (action == Action::MoveForward) {
    bool front_ok = env.traversable(ViewDir::Front) &&
                    env.front_free_range() >= delta_ - 1e-9;
    if (pose && known_mismatch(*pose, action)) front_ok = false;
    if (!front_ok) {
      verdict.flag = VerdictFlag::Conflict;
      verdict.reason = "forward move conflicts with front traversability";
      return verdict;
    }
  }

  if (!bank.empty()) {
    ++retrievals_;
    std::vector<std::string> scene{subtask.target};
    for (const auto& n : env.salient_names()) scene.push_back(n);
    auto hits = bank.retrieve(encode(scene), 1);
    const auto& top = hits.front();
    verdict.retrieved_id = top.entry->id;
    verdict.retrieved_score = top.score;
    if (top.score > tau_risk_) {
      bool already = pose && risk_vetoed_.count(key(*pose, top.entry->id)) > 0;
      if (!already) {
        if (pose) risk_vetoed_.insert(key(*pose, top.entry->id));
        verdict.flag = VerdictFlag::Risk;
        verdict.reason = "scene matches stored failure case";
        verdict.matched_id = top.entry->id;
        verdict.similarity = top.score;
        return verdict;
      }
    }
  }
  return verdict;
}

Action LocalReflector::micro_plan(const LocalVerdict& verdict,
                                  const EnvDescription& env, Action original,
                                  const ExperienceBank& bank) {
  if (verdict.flag == VerdictFlag::Pass)
    throw std::logic_error("micro_plan called with a passing verdict");

  if (verdict.flag == VerdictFlag::Risk && verdict.matched_id) {
    for (const auto& e : bank.entries()) {
      if (e.id != *verdict.matched_id) continue;
      if (e.reflective.a_err == original &&
          e.reflective.a_corr != kNoCorrection &&
          e.reflective.a_corr != to_string(original)) {
        try {
          return action_from_string(e.reflective.a_corr);
        } catch (const std::invalid_argument&) {
          break;  // a_corr is a pattern, not a single action
        }
      }
      break;
    }
    // stored correction not applicable: handle like a conflict
  }

  if (original == Action::MoveForward) {
    if (env.traversable(ViewDir::Right)) return Action::TurnRight90;
    if (env.traversable(ViewDir::Left)) return Action::TurnLeft90;
    if (env.traversable(ViewDir::Back)) return Action::TurnRight90;
    throw NoAlternativeError();
  }
  // Vetoed rotation: pick the first substitute that is not the original.
  if (original != Action::TurnRight90 && env.traversable(ViewDir::Right))
    return Action::TurnRight90;
  if (original != Action::TurnLeft90 && env.traversable(ViewDir::Left))
    return Action::TurnLeft90;
  if (env.traversable(ViewDir::Front)) return Action::MoveForward;
  throw NoAlternativeError();
}

bool LocalReflector::mismatch(StepOutcome expected, StepOutcome actual) {
  return expected == StepOutcome::Moved && actual == StepOutcome::Blocked;
}

void LocalReflector::record_mismatch(const Pose& pose, Action action) {
  mismatches_.insert(key(pose, to_string(action)));
}

EnvDescription LocalReflector::sanitize(const EnvDescription& env,
                                        const Pose& pose) const {
  if (!known_mismatch(pose, Action::MoveForward)) return env;
  EnvDescription out = env;
  out.traversable_dirs.erase(ViewDir::Front);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

bool same_xy(const Pose& a, const Pose& b) {
  return std::llround(a.x * 1e6) == std::llround(b.x * 1e6) &&
         std::llround(a.y * 1e6) == std::llround(b.y * 1e6);
}

bool alternating_turns(const HistoryRecord& a, const HistoryRecord& b) {
  return is_turn(a.action) && is_turn(b.action) && a.action != b.action;
}

bool has_mismatch(const std::vector<HistoryRecord>& recs, int from, int to) {
  for (int i = from; i <= to; ++i)
    for (const auto& ev : recs[i].reflection_events)
      if (ev.flag == "mismatch") return true;
  return false;
}

// Salient-name part of an observation digest (everything before '|').
std::string digest_names(const std::string& digest) {
  auto bar = digest.find('|');
  return digest.substr(0, bar == std::string::npos ? digest.size() : bar);
}

std::string most_frequent_action(const std::vector<HistoryRecord>& recs,
                                 int from, int to) {
  std::map<Action, int> counts;
  for (int i = from; i <= to; ++i) ++counts[recs[i].action];
  const std::array<Action, 4> order = {Action::MoveForward, Action::TurnRight90,
                                       Action::TurnLeft90, Action::Stop};
  Action best = order[0];
  int best_n = -1;
  for (auto a : order) {
    auto it = counts.find(a);
    int n = it == counts.end() ? 0 : it->second;
    if (n > best_n) {
      best = a;
      best_n = n;
    }
  }
  return to_string(best);
}

}  // namespace

EpisodeAnalysis global_reflect(const History& history, const SubTaskPlan& plan,
                               const std::string& instruction,
                               const GlobalReflectConfig& cfg) {
  EpisodeAnalysis out;
  const auto& recs = history.records();
  if (recs.empty()) return out;
  const int n = static_cast<int>(recs.size());

  // Chunk boundaries at sub-task completion points.
  std::vector<int> hard_cuts;  // index of last record of each chunk
  for (int i = 0; i < n; ++i)
    for (const auto& ev : recs[i].reflection_events)
      if (ev.flag == "subtask_done") hard_cuts.push_back(i);
  if (hard_cuts.empty() || hard_cuts.back() != n - 1) hard_cuts.push_back(n - 1);

  // Within each chunk, carve out stagnation and oscillation runs.
  int chunk_start = 0;
  for (int cut : hard_cuts) {
    int i = chunk_start;
    while (i <= cut) {
      int stag_end = i;
      while (stag_end + 1 <= cut && same_xy(recs[stag_end + 1].pose, recs[i].pose))
        ++stag_end;
      int stag_len = stag_end - i + 1;

      int osc_end = i;
      while (osc_end + 1 <= cut &&
             alternating_turns(recs[osc_end], recs[osc_end + 1]))
        ++osc_end;
      int osc_len = osc_end - i + 1;

      if (stag_len >= cfg.stagnation_window && stag_len >= osc_len) {
        out.segments.push_back({recs[i].t, recs[stag_end].t,
                                SegmentLabel::Stagnation});
        i = stag_end + 1;
      } else if (osc_len >= cfg.oscillation_window) {
        out.segments.push_back({recs[i].t, recs[osc_end].t,
                                SegmentLabel::Oscillation});
        i = osc_end + 1;
      } else {
        // grow a progress segment until the next special run begins
        int j = i;
        while (j + 1 <= cut) {
          int k = j + 1;
          int s_end = k;
          while (s_end + 1 <= cut && same_xy(recs[s_end + 1].pose, recs[k].pose))
            ++s_end;
          if (s_end - k + 1 >= cfg.stagnation_window) break;
          int o_end = k;
          while (o_end + 1 <= cut &&
                 alternating_turns(recs[o_end], recs[o_end + 1]))
            ++o_end;
          if (o_end - k + 1 >= cfg.oscillation_window) break;
          ++j;
        }
        out.segments.push_back({recs[i].t, recs[j].t, SegmentLabel::Progress});
        i = j + 1;
      }
    }
    chunk_start = cut + 1;
  }

  if (cfg.episode_failed && !out.segments.empty() &&
      out.segments.back().label == SegmentLabel::Progress)
    out.segments.back().label = SegmentLabel::Failure;

  // Distill one experience entry per non-progress segment.
  for (const auto& seg : out.segments) {
    if (seg.label == SegmentLabel::Progress) continue;
    int from = seg.start_t - recs[0].t;
    int to = seg.end_t - recs[0].t;

    FeatureVector scene_tokens;
    for (int i = from; i <= to; ++i)
      merge_into(scene_tokens, encode(digest_names(recs[i].observation)));

    ReflectiveTuple tuple;
    std::vector<std::pair<int, std::string>> ranked;
    for (const auto& [tok, cnt] : scene_tokens) ranked.push_back({-cnt, tok});
    std::sort(ranked.begin(), ranked.end());
    for (size_t k = 0; k < ranked.size() && k < 8; ++k)
      tuple.f_err_tokens.push_back(ranked[k].second);

    bool seg_mismatch = has_mismatch(recs, from, to);
    switch (seg.label) {
      case SegmentLabel::Stagnation:
        tuple.cause = seg_mismatch ? CauseCategory::Misperception
                                   : CauseCategory::Stagnation;
        tuple.cause_text = seg_mismatch
                               ? "movement repeatedly blocked although "
                                 "percepts reported the way clear"
                               : "no displacement over the segment";
        break;
      case SegmentLabel::Oscillation:
        tuple.cause = CauseCategory::Oscillation;
        tuple.cause_text = "alternating turns without progress";
        break;
      default:
        tuple.cause = seg_mismatch ? CauseCategory::Misperception
                                   : CauseCategory::Other;
        tuple.cause_text = "episode failed during this segment";
        break;
    }
    if (tuple.f_err_tokens.empty())
      tuple.f_err_tokens.push_back(to_string(tuple.cause));

    tuple.a_err = action_from_string(most_frequent_action(recs, from, to));
    if (to + 1 < n && to_string(recs[to + 1].action) != to_string(tuple.a_err))
      tuple.a_corr = to_string(recs[to + 1].action);
    else
      tuple.a_corr = kNoCorrection;

    ExperienceEntry entry;
    entry.id = cfg.episode_id + "-seg" + std::to_string(seg.start_t);
    int subtask_idx = recs[from].subtask;
    std::string target;
    if (subtask_idx >= 1 &&
        subtask_idx <= static_cast<int>(plan.subtasks.size()))
      target = plan.subtasks[subtask_idx - 1].target;
    entry.features = encode(instruction);
    merge_into(entry.features, encode(target));
    merge_into(entry.features, scene_tokens);
    merge_into(entry.features, encode(to_string(tuple.cause)));
    for (int i = from; i <= to; ++i) {
      entry.context.poses.push_back(recs[i].pose);
      entry.context.actions.push_back(recs[i].action);
      entry.context.observations.push_back(recs[i].observation);
    }
    entry.reflective = tuple;
    out.distilled.push_back(std::move(entry));
  }
  return out;
}

}  // namespace conav
