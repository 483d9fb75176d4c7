#include "conav/memory.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>

namespace conav {

FeatureVector encode(const std::string& text) {
  FeatureVector v;
  std::string token;
  for (char ch : text) {
    if (std::isalnum(static_cast<unsigned char>(ch))) {
      token += static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
    } else if (!token.empty()) {
      ++v[token];
      token.clear();
    }
  }
  if (!token.empty()) ++v[token];
  return v;
}

FeatureVector encode(const std::vector<std::string>& texts) {
  FeatureVector v;
  for (const auto& t : texts) merge_into(v, encode(t));
  return v;
}

void merge_into(FeatureVector& dst, const FeatureVector& src) {
  for (const auto& [tok, n] : src) dst[tok] += n;
}

double cosine(const FeatureVector& a, const FeatureVector& b) {
  if (a.empty() || b.empty()) return 0.0;
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [tok, n] : a) {
    na += static_cast<double>(n) * n;
    auto it = b.find(tok);
    if (it != b.end()) dot += static_cast<double>(n) * it->second;
  }
  for (const auto& [tok, n] : b) nb += static_cast<double>(n) * n;
  if (dot == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

std::string to_string(CauseCategory c) {
  switch (c) {
    case CauseCategory::Misperception: return "misperception";
    case CauseCategory::SpatialMisjudgment: return "spatial-misjudgment";
    case CauseCategory::Oscillation: return "oscillation";
    case CauseCategory::Stagnation: return "stagnation";
    case CauseCategory::Other: return "other";
  }
  throw std::logic_error("unknown CauseCategory");
}

CauseCategory cause_from_string(const std::string& s) {
  if (s == "misperception") return CauseCategory::Misperception;
  if (s == "spatial-misjudgment") return CauseCategory::SpatialMisjudgment;
  if (s == "oscillation") return CauseCategory::Oscillation;
  if (s == "stagnation") return CauseCategory::Stagnation;
  if (s == "other") return CauseCategory::Other;
  throw CorruptBankError("unknown cause category '" + s + "'");
}

void ExperienceEntry::validate() const {
  if (id.empty()) throw CorruptBankError("entry with empty id");
  if (features.empty())
    throw CorruptBankError("entry '" + id + "' has empty feature vector");
  for (const auto& [tok, n] : features)
    if (n < 1)
      throw CorruptBankError("entry '" + id + "' has non-positive count");
  if (reflective.f_err_tokens.empty())
    throw CorruptBankError("entry '" + id + "' has empty F_err");
  if (reflective.a_corr.empty())
    throw CorruptBankError("entry '" + id + "' has empty a_corr");
  if (reflective.a_corr == to_string(reflective.a_err) &&
      reflective.cause != CauseCategory::Other)
    throw CorruptBankError("entry '" + id +
                           "': a_err equals a_corr for non-other cause");
}

void ExperienceBank::store(ExperienceEntry entry) {
  entry.validate();
  auto it = std::lower_bound(
      entries_.begin(), entries_.end(), entry.id,
      [](const ExperienceEntry& e, const std::string& id) { return e.id < id; });
  if (it != entries_.end() && it->id == entry.id) {
    *it = std::move(entry);
  } else {
    entries_.insert(it, std::move(entry));
  }
}

std::vector<RetrievalHit> ExperienceBank::retrieve(const FeatureVector& query,
                                                   size_t top_k) const {
  if (top_k < 1) throw std::invalid_argument("top_k must be >= 1");
  if (entries_.empty()) throw EmptyBankError();
  std::vector<RetrievalHit> hits;
  hits.reserve(entries_.size());
  for (const auto& e : entries_) hits.push_back({&e, cosine(query, e.features)});
  std::stable_sort(hits.begin(), hits.end(),
                   [](const RetrievalHit& a, const RetrievalHit& b) {
                     if (a.score != b.score) return a.score > b.score;
                     return a.entry->id < b.entry->id;
                   });
  if (hits.size() > top_k) hits.resize(top_k);
  return hits;
}

namespace {

json tuple_to_json(const ReflectiveTuple& t) {
  json j;
  j["f_err_tokens"] = t.f_err_tokens;
  j["a_err"] = to_string(t.a_err);
  j["cause"] = json{{"category", to_string(t.cause)}, {"text", t.cause_text}};
  j["a_corr"] = t.a_corr;
  return j;
}

ReflectiveTuple tuple_from_json(const json& j) {
  ReflectiveTuple t;
  t.f_err_tokens = j.at("f_err_tokens").get<std::vector<std::string>>();
  t.a_err = action_from_string(j.at("a_err").get<std::string>());
  t.cause = cause_from_string(j.at("cause").at("category").get<std::string>());
  t.cause_text = j.at("cause").at("text").get<std::string>();
  t.a_corr = j.at("a_corr").get<std::string>();
  return t;
}

json entry_to_json(const ExperienceEntry& e) {
  json j;
  j["id"] = e.id;
  json toks = json::object();
  for (const auto& [tok, n] : e.features) toks[tok] = n;
  j["tokens"] = toks;
  json poses = json::array();
  for (const auto& p : e.context.poses)
    poses.push_back(json::array({p.x, p.y, p.heading}));
  json actions = json::array();
  for (auto a : e.context.actions) actions.push_back(to_string(a));
  j["context"] = json{{"poses", poses},
                      {"actions", actions},
                      {"observations", e.context.observations}};
  j["reflective"] = tuple_to_json(e.reflective);
  return j;
}

ExperienceEntry entry_from_json(const json& j) {
  ExperienceEntry e;
  e.id = j.at("id").get<std::string>();
  for (const auto& [tok, n] : j.at("tokens").items())
    e.features[tok] = n.get<int>();
  const auto& ctx = j.at("context");
  for (const auto& p : ctx.at("poses"))
    e.context.poses.push_back(
        Pose{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<int>()});
  for (const auto& a : ctx.at("actions"))
    e.context.actions.push_back(action_from_string(a.get<std::string>()));
  e.context.observations =
      ctx.at("observations").get<std::vector<std::string>>();
  e.reflective = tuple_from_json(j.at("reflective"));
  return e;
}

}  // namespace

json ExperienceBank::to_json() const {
  json j;
  j["version"] = kSchemaVersion;
  json arr = json::array();
  for (const auto& e : entries_) arr.push_back(entry_to_json(e));
  j["entries"] = arr;
  return j;
}

ExperienceBank ExperienceBank::from_json(const json& j) {
  ExperienceBank bank;
  try {
    int version = j.at("version").get<int>();
    if (version != kSchemaVersion)
      throw CorruptBankError("unsupported bank schema version " +
                             std::to_string(version));
    for (const auto& ej : j.at("entries")) bank.store(entry_from_json(ej));
  } catch (const json::exception& e) {
    throw CorruptBankError(std::string("malformed bank: ") + e.what());
  }
  return bank;
}

void ExperienceBank::persist(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw CorruptBankError("cannot write bank file: " + path);
  out << to_json().dump(2) << "\n";
}

ExperienceBank ExperienceBank::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CorruptBankError("cannot open bank file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CorruptBankError(std::string("bank is not valid JSON: ") + e.what());
  }
  return from_json(j);
}

bool ExperienceBank::operator==(const ExperienceBank& o) const {
  return to_json() == o.to_json();
}

// ---------------------------------------------------------------------------

json ReflectionEvent::to_json() const {
  json j;
  j["stage"] = stage;
  j["flag"] = flag;
  j["reason"] = reason;
  j["matched_id"] = matched_id ? json(*matched_id) : json(nullptr);
  j["similarity"] = similarity ? json(*similarity) : json(nullptr);
  if (action) j["action"] = *action;
  if (replacement) j["replacement"] = *replacement;
  j["subtask"] = subtask;
  return j;
}

ReflectionEvent ReflectionEvent::from_json(const json& j) {
  ReflectionEvent e;
  e.stage = j.at("stage").get<std::string>();
  e.flag = j.at("flag").get<std::string>();
  e.reason = j.at("reason").get<std::string>();
  if (j.contains("matched_id") && !j.at("matched_id").is_null())
    e.matched_id = j.at("matched_id").get<std::string>();
  if (j.contains("similarity") && !j.at("similarity").is_null())
    e.similarity = j.at("similarity").get<double>();
  if (j.contains("action")) e.action = j.at("action").get<std::string>();
  if (j.contains("replacement"))
    e.replacement = j.at("replacement").get<std::string>();
  e.subtask = j.value("subtask", 0);
  return e;
}

json HistoryRecord::to_json() const {
  json j;
  j["t"] = t;
  j["pose"] = json::array({pose.x, pose.y, pose.heading});
  j["action"] = to_string(action);
  j["outcome"] = to_string(outcome);
  j["observation"] = observation;
  j["map_ref"] = map_ref;
  json evs = json::array();
  for (const auto& e : reflection_events) evs.push_back(e.to_json());
  j["reflection_events"] = evs;
  j["subtask"] = subtask;
  return j;
}

HistoryRecord HistoryRecord::from_json(const json& j) {
  HistoryRecord r;
  r.t = j.at("t").get<int>();
  const auto& p = j.at("pose");
  r.pose = Pose{p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<int>()};
  r.action = action_from_string(j.at("action").get<std::string>());
  r.outcome = outcome_from_string(j.at("outcome").get<std::string>());
  r.observation = j.at("observation").get<std::string>();
  r.map_ref = j.at("map_ref").get<int>();
  for (const auto& e : j.at("reflection_events"))
    r.reflection_events.push_back(ReflectionEvent::from_json(e));
  r.subtask = j.value("subtask", 1);
  return r;
}

void History::log(HistoryRecord record) {
  int expected = records_.empty() ? 0 : records_.back().t + 1;
  if (record.t != expected)
    throw OutOfOrderError("history expects t=" + std::to_string(expected) +
                          ", got t=" + std::to_string(record.t));
  records_.push_back(std::move(record));
}

std::vector<HistoryRecord> History::window(size_t n) const {
  size_t from = records_.size() > n ? records_.size() - n : 0;
  return {records_.begin() + static_cast<long>(from), records_.end()};
}

}  // namespace conav
