#include "conav/llm_backend.hpp"

#include <httplib.h>

#include <chrono>
#include <cstdlib>
#include <thread>

namespace conav {

json RemoteConfig::to_json() const {
  return json{{"base_url", base_url},       {"model", model_name},
              {"api_key_env", api_key_env}, {"timeout_s", timeout_s},
              {"max_retries", max_retries}, {"temperature", temperature},
              {"backoff_base_s", backoff_base_s}};
}

RemoteConfig RemoteConfig::from_json(const json& j) {
  RemoteConfig c;
  c.base_url = j.value("base_url", c.base_url);
  c.model_name = j.value("model", c.model_name);
  c.api_key_env = j.value("api_key_env", c.api_key_env);
  c.timeout_s = j.value("timeout_s", c.timeout_s);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.temperature = j.value("temperature", c.temperature);
  c.backoff_base_s = j.value("backoff_base_s", c.backoff_base_s);
  c.validate();
  return c;
}

void RemoteConfig::validate() const {
  if (timeout_s <= 0) throw ConfigError("remote timeout must be positive");
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
  if (backoff_base_s < 0) throw ConfigError("backoff_base_s must be >= 0");
}

HttpChatClient::HttpChatClient(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  // Split an optional path prefix off the base URL; httplib wants
  // scheme://host:port only.
  std::string url = cfg_.base_url;
  size_t scheme = url.find("://");
  size_t slash =
      scheme == std::string::npos ? url.find('/') : url.find('/', scheme + 3);
  if (slash == std::string::npos) {
    host_ = url;
    path_ = "/chat/completions";
  } else {
    host_ = url.substr(0, slash);
    std::string prefix = url.substr(slash);
    if (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
    path_ = prefix + "/chat/completions";
  }
}

std::string HttpChatClient::complete(const std::string& system_text,
                                     const std::string& user_text) {
  json body;
  body["model"] = cfg_.model_name;
  body["messages"] = json::array({json{{"role", "system"}, {"content", system_text}},
                                  json{{"role", "user"}, {"content", user_text}}});
  body["temperature"] = cfg_.temperature;
  std::string payload = body.dump();

  if (audit)
    audit(json{{"kind", "llm"},
               {"direction", "request"},
               {"system", system_text},
               {"user", user_text}});

  const char* key = nullptr;
  if (!cfg_.api_key_env.empty()) key = std::getenv(cfg_.api_key_env.c_str());

  std::string last_error;
  last_attempts_ = 0;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      // exponential backoff with a small deterministic jitter
      double delay = cfg_.backoff_base_s * (1 << (attempt - 1));
      delay += cfg_.backoff_base_s * ((attempt * 37) % 100) / 1000.0;
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
    }
    ++last_attempts_;

    httplib::Client cli(host_);
    cli.set_connection_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    cli.set_read_timeout(std::chrono::duration<double>(cfg_.timeout_s));
    httplib::Headers headers;
    if (key) headers.emplace("Authorization", std::string("Bearer ") + key);

    auto res = cli.Post(path_, headers, payload, "application/json");
    if (!res) {
      last_error = "transport: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403)
      throw AuthError("authentication rejected with status " +
                      std::to_string(res->status));
    if (res->status >= 500) {
      last_error = "server status " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200)
      throw BackendUnavailable("unexpected status " +
                               std::to_string(res->status));
    try {
      json reply = json::parse(res->body);
      std::string text = reply.at("choices").at(0).at("message").at("content")
                             .get<std::string>();
      if (audit)
        audit(json{{"kind", "llm"}, {"direction", "reply"}, {"content", text}});
      return text;
    } catch (const json::exception& e) {
      throw BackendUnavailable(std::string("unparseable completion body: ") +
                               e.what());
    }
  }
  throw BackendUnavailable("backend unreachable after " +
                           std::to_string(last_attempts_) +
                           " attempts (" + last_error + ")");
}

std::string PromptTemplate::render(
    const std::map<std::string, std::string>& values) const {
  std::string out = system_text;
  for (const auto& [name, value] : values) {
    std::string needle = "{" + name + "}";
    size_t pos = 0;
    while ((pos = out.find(needle, pos)) != std::string::npos) {
      out.replace(pos, needle.size(), value);
      pos += value.size();
    }
  }
  size_t open = out.find('{');
  while (open != std::string::npos) {
    size_t close = out.find('}', open);
    if (close != std::string::npos && close - open <= 24) {
      std::string leftover = out.substr(open + 1, close - open - 1);
      if (!leftover.empty() &&
          leftover.find_first_not_of(
              "abcdefghijklmnopqrstuvwxyz_") == std::string::npos)
        throw SchemaViolation("unbound placeholder {" + leftover + "}");
    }
    open = out.find('{', open + 1);
  }
  return out;
}

PromptTemplate default_template(const std::string& role) {
  PromptTemplate t;
  t.role = role;
  if (role == "plan") {
    t.system_text =
        "You are the task planning agent of an indoor navigation robot. "
        "Decompose the instruction into an ordered list of landmark-centric "
        "sub-tasks. Known landmarks: {lexicon}. Reply with a fenced JSON "
        "block: {\"subtasks\": [{\"index\": 1, \"target\": \"<landmark>\", "
        "\"description\": \"<short text>\"}]}.";
  } else if (role == "verify") {
    t.system_text =
        "You are the task planning agent in verification mode. Judge whether "
        "the active sub-task is complete given the environment description "
        "and recent history. Reply with a fenced JSON block: "
        "{\"done\": true|false, \"progress\": <0..1>}.";
  } else if (role == "observe") {
    t.system_text =
        "You are the observation agent. Distill the four-direction percepts "
        "into a task-oriented description. Mark entries relevant to the "
        "sub-task, keep bearings and distances, and list traversable "
        "directions. Reply with a fenced JSON block: {\"summaries\": "
        "{\"front\": \"..\", \"right\": \"..\", \"back\": \"..\", \"left\": "
        "\"..\"}, \"salient\": [{\"name\": \"..\", \"bearing\": 0, "
        "\"distance\": 0, \"task_relevant\": true}], \"traversable\": "
        "[\"Front\"]}.";
  } else if (role == "decide") {
    t.system_text =
        "You are the control execution agent. Choose exactly one action from "
        "MoveForward, TurnRight90, TurnLeft90, Stop for the current sub-task. "
        "Reply with a fenced JSON block: {\"action\": \"<name>\", "
        "\"justification\": \"<short text>\"}.";
  } else {
    throw ConfigError("unknown prompt role '" + role + "'");
  }
  return t;
}

json extract_structured(const std::string& raw) {
  size_t fence = raw.find("```");
  while (fence != std::string::npos) {
    size_t start = raw.find('\n', fence);
    size_t body_start;
    // allow ``` { ... } ``` on one line and ```json\n{...}\n```
    size_t brace = raw.find('{', fence + 3);
    size_t end = raw.find("```", fence + 3);
    if (end == std::string::npos) break;
    if (brace != std::string::npos && brace < end) {
      body_start = brace;
      std::string body = raw.substr(body_start, end - body_start);
      try {
        return json::parse(body);
      } catch (const json::exception&) {
        // fall through to the next fence
      }
    }
    (void)start;
    fence = raw.find("```", end + 3);
  }
  // bare JSON body
  std::string trimmed = raw;
  size_t first = trimmed.find_first_not_of(" \t\r\n");
  size_t last = trimmed.find_last_not_of(" \t\r\n");
  if (first != std::string::npos && trimmed[first] == '{') {
    try {
      return json::parse(trimmed.substr(first, last - first + 1));
    } catch (const json::exception&) {
    }
  }
  throw MalformedReply("reply carries no parseable JSON block");
}

SubTaskPlan parse_plan_reply(const json& j, const std::string& instruction) {
  if (!j.contains("subtasks") || !j.at("subtasks").is_array())
    throw SchemaViolation("plan reply lacks a subtasks array");
  SubTaskPlan plan;
  plan.instruction = instruction;
  int idx = 1;
  for (const auto& sj : j.at("subtasks")) {
    if (!sj.is_object()) throw SchemaViolation("subtask must be an object");
    if (!sj.contains("target") || !sj.at("target").is_string())
      throw SchemaViolation("subtask lacks a string target");
    SubTask st;
    st.index = idx;
    st.target = sj.at("target").get<std::string>();
    st.description = sj.value("description", "Reach the " + st.target);
    if (st.target.empty() || st.description.empty())
      throw SchemaViolation("subtask references no text");
    st.status = idx == 1 ? SubTaskStatus::Active : SubTaskStatus::Pending;
    plan.subtasks.push_back(std::move(st));
    ++idx;
  }
  if (plan.subtasks.empty()) throw SchemaViolation("plan reply has no subtasks");
  return plan;
}

VerifyResult parse_verify_reply(const json& j) {
  if (!j.contains("done") || !j.at("done").is_boolean())
    throw SchemaViolation("verify reply lacks a boolean done");
  if (!j.contains("progress") || !j.at("progress").is_number())
    throw SchemaViolation("verify reply lacks a numeric progress");
  double phi = j.at("progress").get<double>();
  if (phi < 0.0 || phi > 1.0)
    throw SchemaViolation("progress out of [0, 1]");
  return VerifyResult{j.at("done").get<bool>(), phi};
}

EnvDescription parse_observe_reply(const json& j,
                                   const std::array<PerceptTuple, 4>& views) {
  EnvDescription env;
  env.raw_views = views;
  if (!j.contains("summaries") || !j.at("summaries").is_object())
    throw SchemaViolation("observe reply lacks summaries");
  const auto& sj = j.at("summaries");
  const std::array<const char*, 4> keys = {"front", "right", "back", "left"};
  for (int i = 0; i < 4; ++i) {
    if (!sj.contains(keys[i]) || !sj.at(keys[i]).is_string())
      throw SchemaViolation(std::string("summaries lack ") + keys[i]);
    env.summaries[i] = sj.at(keys[i]).get<std::string>();
  }

  // salient entries must name entities that exist in the raw views
  std::set<std::string> known;
  for (const auto& v : views) {
    for (const auto& e : v.obstacles) known.insert(e.name);
    for (const auto& e : v.landmarks) known.insert(e.name);
  }
  if (!j.contains("salient") || !j.at("salient").is_array())
    throw SchemaViolation("observe reply lacks a salient array");
  for (const auto& ej : j.at("salient")) {
    if (!ej.contains("name") || !ej.at("name").is_string() ||
        !ej.contains("bearing") || !ej.at("bearing").is_number() ||
        !ej.contains("distance") || !ej.at("distance").is_number() ||
        !ej.contains("task_relevant") || !ej.at("task_relevant").is_boolean())
      throw SchemaViolation("salient entry has bad fields");
    SalientEntry e{ej.at("name").get<std::string>(),
                   ej.at("bearing").get<double>(),
                   ej.at("distance").get<double>(),
                   ej.at("task_relevant").get<bool>()};
    if (!known.count(e.name))
      throw SchemaViolation("salient entry names unknown entity '" + e.name +
                            "'");
    env.salient.push_back(std::move(e));
  }

  if (!j.contains("traversable") || !j.at("traversable").is_array())
    throw SchemaViolation("observe reply lacks a traversable array");
  for (const auto& tv : j.at("traversable")) {
    if (!tv.is_string()) throw SchemaViolation("traversable entry not a string");
    ViewDir v;
    try {
      v = view_from_string(tv.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw SchemaViolation(e.what());
    }
    if (!views[static_cast<int>(v)].traversability.walkable)
      throw SchemaViolation("traversable direction contradicts raw percepts");
    env.traversable_dirs.insert(v);
  }
  return env;
}

Decision parse_decide_reply(const json& j) {
  if (!j.contains("action") || !j.at("action").is_string())
    throw SchemaViolation("decide reply lacks a string action");
  Decision d;
  try {
    d.action = action_from_string(j.at("action").get<std::string>());
  } catch (const std::invalid_argument& e) {
    throw SchemaViolation(e.what());
  }
  d.justification = j.value("justification", "");
  if (j.contains("candidate_refs")) {
    if (!j.at("candidate_refs").is_array())
      throw SchemaViolation("candidate_refs must be an array");
    for (const auto& c : j.at("candidate_refs")) {
      if (!c.is_number_integer())
        throw SchemaViolation("candidate_refs must hold integers");
      d.candidate_refs.push_back(c.get<NodeId>());
    }
  }
  return d;
}

json complete_structured(HttpChatClient& client, const std::string& system_text,
                         const std::string& user_text,
                         const std::function<void(const json&)>& validate) {
  std::string raw = client.complete(system_text, user_text);
  try {
    json j = extract_structured(raw);
    validate(j);
    return j;
  } catch (const std::runtime_error& first) {
    // one reprompt with the validation error appended
    std::string retry_text = user_text +
                             "\n\nThe previous reply was rejected: " +
                             first.what() +
                             "\nReply again with exactly the requested JSON.";
    std::string raw2 = client.complete(system_text, retry_text);
    json j = extract_structured(raw2);  // MalformedReply propagates
    validate(j);                        // SchemaViolation propagates
    return j;
  }
}

// ---------------------------------------------------------------------------

namespace {

std::string fenced(const json& j) {
  return "```json\n" + j.dump(2) + "\n```";
}

std::string history_digest(const std::vector<HistoryRecord>& window,
                           int max_items) {
  json arr = json::array();
  int from = std::max(0, static_cast<int>(window.size()) - max_items);
  for (size_t i = from; i < window.size(); ++i) {
    const auto& r = window[i];
    arr.push_back(json{{"t", r.t},
                       {"action", to_string(r.action)},
                       {"outcome", to_string(r.outcome)},
                       {"observation", r.observation}});
  }
  return arr.dump();
}

}  // namespace

SubTaskPlan RemotePlanner::plan(const std::string& instruction,
                                const PlanContext& ctx) {
  PromptTemplate t = default_template("plan");
  json lex = json::array();
  for (const auto& n : ctx.lexicon) lex.push_back(n);
  std::string system_text = t.render({{"lexicon", lex.dump()}});
  json context{{"instruction", instruction}, {"lexicon", lex}};
  std::string user_text = "Instruction: " + instruction + "\n" + fenced(context);

  SubTaskPlan plan;
  json j = complete_structured(*client_, system_text, user_text,
                               [&](const json& reply) {
                                 plan = parse_plan_reply(reply, instruction);
                               });
  (void)j;
  if (plan.subtasks.empty()) throw PlanEmptyError();
  return plan;
}

VerifyResult RemotePlanner::verify(
    const SubTask& subtask, const EnvDescription& env,
    const std::vector<HistoryRecord>& window, const Pose& pose, double tau,
    const VerifyContext& /*ctx*/,
    const std::vector<const ExperienceEntry*>& retrieved_advisory) {
  PromptTemplate t = default_template("verify");
  std::string system_text = t.render({});
  json advisory = json::array();
  for (const auto* e : retrieved_advisory)
    advisory.push_back(json{{"id", e->id},
                            {"cause", to_string(e->reflective.cause)},
                            {"a_corr", e->reflective.a_corr}});
  json context{{"subtask", subtask.target.empty() ? subtask.description
                                                  : subtask.target},
               {"tau", tau},
               {"pose", json::array({pose.x, pose.y, pose.heading})},
               {"env", env.to_json()},
               {"history", json::parse(history_digest(window, t.max_history))},
               {"advisory", advisory}};
  std::string user_text = fenced(context);

  VerifyResult out;
  complete_structured(*client_, system_text, user_text, [&](const json& reply) {
    out = parse_verify_reply(reply);
  });
  return out;
}

EnvDescription RemoteObserver::observe(const std::array<PerceptTuple, 4>& views,
                                       const SubTask& subtask) {
  PromptTemplate t = default_template("observe");
  std::string system_text = t.render({});
  json percepts = json::array();
  for (const auto& v : views) percepts.push_back(percept_to_json(v));
  json context{{"subtask", subtask.target.empty() ? subtask.description
                                                  : subtask.target},
               {"percepts", percepts}};
  std::string user_text = fenced(context);

  EnvDescription out;
  complete_structured(*client_, system_text, user_text, [&](const json& reply) {
    out = parse_observe_reply(reply, views);
  });
  return out;
}

Decision RemoteController::decide(const SubTask& subtask,
                                  const EnvDescription& env,
                                  const AgentMap& map,
                                  const std::vector<HistoryRecord>& window,
                                  const SubTaskPlan& plan,
                                  const DecideContext& /*ctx*/) {
  PromptTemplate t = default_template("decide");
  std::string system_text = t.render({});
  json context{{"subtask", subtask.target.empty() ? subtask.description
                                                  : subtask.target},
               {"env", env.to_json()},
               {"map", map.snapshot()},
               {"plan", plan.to_json()},
               {"history", json::parse(history_digest(window, t.max_history))}};
  std::string user_text = fenced(context);

  Decision out;
  complete_structured(*client_, system_text, user_text, [&](const json& reply) {
    out = parse_decide_reply(reply);
  });
  return out;
}

Backends remote_backends(std::shared_ptr<HttpChatClient> client) {
  return Backends{std::make_shared<RemotePlanner>(client),
                  std::make_shared<RemoteObserver>(client),
                  std::make_shared<RemoteController>(client)};
}

}  // namespace conav
