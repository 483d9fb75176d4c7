#include "conav/config.hpp"

#include <fstream>
#include <set>

namespace conav {

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed,
                    const std::string& where) {
  for (const auto& [key, _] : j.items())
    if (!allowed.count(key))
      throw ConfigError("unknown config key '" + key + "' in " + where);
}

}  // namespace

void RunConfig::apply_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  apply_json(j);
}

void RunConfig::apply_json(const json& j) {
  reject_unknown(j, {"scenario",          "scenarios",       "agents",
                     "seed",              "tau",             "tau_from_radius",
                     "tau_risk",          "delta",           "budget_multiplier",
                     "evaluate_every_n",  "history_window",  "view_range_cells",
                     "radius",            "noise",           "ablate",
                     "full_maps",         "stagnation_window",
                     "oscillation_window", "trace",          "trace_dir",
                     "report",            "bank",            "repeat",
                     "jobs",              "seed_base",       "remote"},
                 "config root");
  if (j.contains("scenario"))
    scenario_paths = {j.at("scenario").get<std::string>()};
  if (j.contains("scenarios"))
    scenario_paths = j.at("scenarios").get<std::vector<std::string>>();
  if (j.contains("agents")) {
    const json& a = j.at("agents");
    reject_unknown(a, {"backend", "planner", "observer", "controller"},
                   "agents");
    backend = a.value("backend", backend);
    planner_backend = a.value("planner", planner_backend);
    observer_backend = a.value("observer", observer_backend);
    controller_backend = a.value("controller", controller_backend);
  }
  if (j.contains("seed")) episode.noise.seed = j.at("seed").get<uint64_t>();
  if (j.contains("tau")) episode.tau = j.at("tau").get<double>();
  if (j.contains("tau_from_radius"))
    episode.tau_from_radius = j.at("tau_from_radius").get<bool>();
  if (j.contains("tau_risk")) episode.tau_risk = j.at("tau_risk").get<double>();
  if (j.contains("delta")) episode.delta = j.at("delta").get<double>();
  if (j.contains("budget_multiplier"))
    episode.budget_multiplier = j.at("budget_multiplier").get<double>();
  if (j.contains("evaluate_every_n"))
    episode.evaluate_every_n = j.at("evaluate_every_n").get<int>();
  if (j.contains("history_window"))
    episode.history_window = j.at("history_window").get<int>();
  if (j.contains("view_range_cells"))
    episode.view_range_cells = j.at("view_range_cells").get<int>();
  if (j.contains("radius")) episode.radius = j.at("radius").get<double>();
  if (j.contains("noise")) {
    const json& nj = j.at("noise");
    reject_unknown(nj, {"glass_blind", "distance_noise", "seed"}, "noise");
    episode.noise.glass_blind =
        nj.value("glass_blind", episode.noise.glass_blind);
    episode.noise.distance_noise =
        nj.value("distance_noise", episode.noise.distance_noise);
    episode.noise.seed = nj.value("seed", episode.noise.seed);
  }
  if (j.contains("ablate"))
    for (const auto& f : j.at("ablate"))
      episode.ablate.set(f.get<std::string>());
  if (j.contains("full_maps")) episode.full_maps = j.at("full_maps").get<bool>();
  if (j.contains("stagnation_window"))
    episode.stagnation_window = j.at("stagnation_window").get<int>();
  if (j.contains("oscillation_window"))
    episode.oscillation_window = j.at("oscillation_window").get<int>();
  if (j.contains("trace")) trace_path = j.at("trace").get<std::string>();
  if (j.contains("trace_dir")) trace_dir = j.at("trace_dir").get<std::string>();
  if (j.contains("report")) report_dir = j.at("report").get<std::string>();
  if (j.contains("bank")) bank_path = j.at("bank").get<std::string>();
  if (j.contains("repeat")) repeat = j.at("repeat").get<int>();
  if (j.contains("jobs")) jobs = j.at("jobs").get<int>();
  if (j.contains("seed_base")) seed_base = j.at("seed_base").get<uint64_t>();
  if (j.contains("remote")) remote = RemoteConfig::from_json(j.at("remote"));
}

void RunConfig::validate() const {
  episode.validate();
  remote.validate();
  if (backend != "scripted" && backend != "remote")
    throw ConfigError("agents.backend must be 'scripted' or 'remote'");
  for (const std::string& role :
       {planner_backend, observer_backend, controller_backend})
    if (!role.empty() && role != "scripted" && role != "remote")
      throw ConfigError("per-role backend must be 'scripted' or 'remote'");
  if (repeat < 1) throw ConfigError("repeat must be >= 1");
  if (jobs < 1) throw ConfigError("jobs must be >= 1");
}

json RunConfig::to_json() const {
  json j = episode.to_json();
  j["agents"] = json{{"backend", backend},
                     {"planner", planner_backend.empty() ? backend
                                                         : planner_backend},
                     {"observer", observer_backend.empty() ? backend
                                                           : observer_backend},
                     {"controller", controller_backend.empty()
                                        ? backend
                                        : controller_backend}};
  j["repeat"] = repeat;
  j["jobs"] = jobs;
  j["seed_base"] = seed_base;
  if (backend == "remote" || planner_backend == "remote" ||
      observer_backend == "remote" || controller_backend == "remote")
    j["remote"] = remote.to_json();
  return j;
}

Backends RunConfig::build_backends(
    std::shared_ptr<HttpChatClient>* client_out) const {
  auto role = [&](const std::string& override_) {
    return override_.empty() ? backend : override_;
  };
  bool any_remote = role(planner_backend) == "remote" ||
                    role(observer_backend) == "remote" ||
                    role(controller_backend) == "remote";
  std::shared_ptr<HttpChatClient> client;
  if (any_remote) client = std::make_shared<HttpChatClient>(remote);
  if (client_out) *client_out = client;

  Backends scripted = scripted_backends();
  Backends out;
  out.planner = role(planner_backend) == "remote"
                    ? std::shared_ptr<PlannerBackend>(
                          std::make_shared<RemotePlanner>(client))
                    : scripted.planner;
  out.observer = role(observer_backend) == "remote"
                     ? std::shared_ptr<ObserverBackend>(
                           std::make_shared<RemoteObserver>(client))
                     : scripted.observer;
  out.controller = role(controller_backend) == "remote"
                       ? std::shared_ptr<ControllerBackend>(
                             std::make_shared<RemoteController>(client))
                       : scripted.controller;
  return out;
}

}  // namespace conav
