#pragma once

#include <functional>
#include <memory>
#include <string>

#include "conav/agents.hpp"
#include "conav/orchestrator.hpp"

namespace conav {

struct RemoteConfig {
  std::string base_url = "http://127.0.0.1:8089";
  std::string model_name = "stub-model";
  std::string api_key_env = "CONAV_API_KEY";
  double timeout_s = 30.0;
  int max_retries = 2;
  double temperature = 0.0;
  double backoff_base_s = 1.0;

  json to_json() const;
  static RemoteConfig from_json(const json& j);
  void validate() const;
};

struct AuthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct MalformedReply : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct SchemaViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Chat-completions style HTTP client. Retries 5xx and transport failures
// with exponential backoff; 401/403 fail immediately.
class HttpChatClient {
 public:
  explicit HttpChatClient(RemoteConfig cfg);

  // Returns the first reply text of the completion.
  std::string complete(const std::string& system_text,
                       const std::string& user_text);

  int last_attempts() const { return last_attempts_; }

  // Audit hook: called with {direction, content} for every request/reply.
  std::function<void(json)> audit;

 private:
  RemoteConfig cfg_;
  std::string host_;   // scheme://host:port
  std::string path_;   // request path
  int last_attempts_ = 0;
};

struct PromptTemplate {
  std::string role;  // "plan" | "observe" | "verify" | "decide"
  std::string system_text;
  int max_history = 10;

  // Replaces {name} placeholders; throws SchemaViolation when a placeholder
  // stays unbound.
  std::string render(const std::map<std::string, std::string>& values) const;
};

PromptTemplate default_template(const std::string& role);

// First fenced JSON block of a reply (bare JSON bodies also accepted).
// Throws MalformedReply when nothing parses.
json extract_structured(const std::string& raw);

// Schema firewalls: reply JSON -> role contract output. Each throws
// SchemaViolation on bad field names, types or out-of-range values.
SubTaskPlan parse_plan_reply(const json& j, const std::string& instruction);
VerifyResult parse_verify_reply(const json& j);
EnvDescription parse_observe_reply(const json& j,
                                   const std::array<PerceptTuple, 4>& views);
Decision parse_decide_reply(const json& j);

// Remote realizations of the agent role contracts. Every prompt and raw
// reply goes through the client's audit hook.
class RemotePlanner : public PlannerBackend {
 public:
  explicit RemotePlanner(std::shared_ptr<HttpChatClient> client)
      : client_(std::move(client)) {}
  SubTaskPlan plan(const std::string& instruction,
                   const PlanContext& ctx) override;
  VerifyResult verify(const SubTask& subtask, const EnvDescription& env,
                      const std::vector<HistoryRecord>& window,
                      const Pose& pose, double tau, const VerifyContext& ctx,
                      const std::vector<const ExperienceEntry*>&
                          retrieved_advisory) override;

 private:
  std::shared_ptr<HttpChatClient> client_;
};

class RemoteObserver : public ObserverBackend {
 public:
  explicit RemoteObserver(std::shared_ptr<HttpChatClient> client)
      : client_(std::move(client)) {}
  EnvDescription observe(const std::array<PerceptTuple, 4>& views,
                         const SubTask& subtask) override;

 private:
  std::shared_ptr<HttpChatClient> client_;
};

class RemoteController : public ControllerBackend {
 public:
  explicit RemoteController(std::shared_ptr<HttpChatClient> client)
      : client_(std::move(client)) {}
  Decision decide(const SubTask& subtask, const EnvDescription& env,
                  const AgentMap& map, const std::vector<HistoryRecord>& window,
                  const SubTaskPlan& plan, const DecideContext& ctx) override;

 private:
  std::shared_ptr<HttpChatClient> client_;
};

Backends remote_backends(std::shared_ptr<HttpChatClient> client);

// One round of completion + parse with a single reprompt on validation
// failure, as the role glue uses it.
json complete_structured(HttpChatClient& client, const std::string& system_text,
                         const std::string& user_text,
                         const std::function<void(const json&)>& validate);

}  // namespace conav
