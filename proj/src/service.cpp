#include "squadplan/service.hpp"

#include <algorithm>
#include <variant>

#include <fmt/format.h>

#include "httplib.h"

namespace squadplan {

using nlohmann::json;

struct PlannerService::Bundle {
  DatasetBundle data;
  Models models;
};

struct PlannerService::Session {
  std::mutex mutex;
  std::string id;
  std::string bundle;
  std::uint64_t seed = 0;
  std::unique_ptr<Mdp> mdp;
  MdpState state;
  std::vector<SessionStep> history;
  double total_points = 0.0;
};

ApiResponse api_error(int status, std::string code, std::string message, json details) {
  return {status, {{"code", std::move(code)}, {"message", std::move(message)}, {"details", std::move(details)}}};
}

namespace {

json lineup_json(const Lineup& lineup, const Season& season) { return lineup_ids(lineup, season); }

json injuries_json(const std::vector<RealizedInjury>& injuries, const Season& season) {
  json out = json::array();
  for (const auto& inj : injuries)
    out.push_back({{"player", season.player(inj.player).id}, {"days", inj.days}, {"games_out", inj.games_out}});
  return out;
}

std::string constraint_of(const std::string& message) {
  if (message.find("listed twice") != std::string::npos) return "duplicate";
  if (message.find("injured") != std::string::npos) return "unavailable";
  if (message.find("players, expected") != std::string::npos) return "size";
  if (message.find("shape") != std::string::npos) return "formation";
  return "lineup";
}

// Reads {"players": [ids]}; unknown ids are reported rather than thrown.
std::variant<Lineup, ApiResponse> parse_lineup(const json& body, const Season& season) {
  if (!body.is_object() || !body.contains("players") || !body["players"].is_array())
    return api_error(400, "bad_request", "body must be an object with a 'players' array of player ids");
  std::vector<PlayerIndex> ids;
  json unknown = json::array();
  for (const auto& v : body["players"]) {
    if (!v.is_string()) return api_error(400, "bad_request", "player ids must be strings");
    const auto idx = season.index_of(v.get<std::string>());
    if (idx)
      ids.push_back(*idx);
    else
      unknown.push_back({{"constraint", "unknown_player"},
                         {"player", v},
                         {"message", fmt::format("club '{}' has no player '{}'", season.club(), v.get<std::string>())}});
  }
  if (!unknown.empty()) return api_error(422, "invalid_lineup", "lineup names players outside the squad", unknown);
  return Lineup(std::move(ids));
}

json violations_json(const std::vector<std::string>& messages) {
  json out = json::array();
  for (const auto& m : messages) out.push_back({{"constraint", constraint_of(m)}, {"message", m}});
  return out;
}

}  // namespace

PlannerService::PlannerService() = default;
PlannerService::~PlannerService() = default;

void PlannerService::add_bundle(const std::string& id, DatasetBundle bundle, Models models) {
  std::unique_lock lock(mutex_);
  bundles_[id] = std::make_shared<Bundle>(Bundle{std::move(bundle), std::move(models)});
}

std::shared_ptr<PlannerService::Session> PlannerService::find(const std::string& id) {
  std::shared_lock lock(mutex_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

namespace {

json state_view(const Mdp& mdp, const MdpState& s, const std::string& id, std::uint64_t seed,
                double total) {
  json j = state_to_json(mdp, s);
  j["session_id"] = id;
  j["seed"] = seed;
  j["total_points"] = total;
  return j;
}

}  // namespace

ApiResponse PlannerService::create_session(const json& body) {
  if (!body.is_object()) return api_error(400, "bad_request", "body must be a JSON object");
  std::shared_ptr<Bundle> bundle;
  std::string bundle_id;
  {
    std::shared_lock lock(mutex_);
    if (body.contains("bundle")) {
      if (!body["bundle"].is_string()) return api_error(400, "bad_request", "'bundle' must be a string");
      bundle_id = body["bundle"].get<std::string>();
    } else if (bundles_.size() == 1) {
      bundle_id = bundles_.begin()->first;
    } else {
      return api_error(400, "bad_request", "'bundle' is required when several bundles are loaded");
    }
    auto it = bundles_.find(bundle_id);
    if (it == bundles_.end())
      return api_error(404, "unknown_bundle", fmt::format("no bundle '{}'", bundle_id), {{"bundle", bundle_id}});
    bundle = it->second;
  }
  if (!body.contains("club") || !body["club"].is_string())
    return api_error(400, "bad_request", "'club' is required and must be a string");
  const std::string club = body["club"].get<std::string>();
  const auto clubs = bundle->data.clubs();
  if (std::find(clubs.begin(), clubs.end(), club) == clubs.end())
    return api_error(404, "unknown_club", fmt::format("bundle '{}' has no club '{}'", bundle_id, club),
                     {{"club", club}});

  auto session = std::make_shared<Session>();
  Models models = bundle->models;
  try {
    if (body.contains("seed")) session->seed = body["seed"].get<std::uint64_t>();
    if (body.contains("risk_multiplier")) models.risk_multiplier = body["risk_multiplier"].get<double>();
  } catch (const json::exception&) {
    return api_error(400, "bad_request", "'seed' must be a non-negative integer and 'risk_multiplier' a number");
  }
  if (!(models.risk_multiplier >= 0.0))
    return api_error(400, "bad_request", "'risk_multiplier' must be non-negative");
  try {
    session->mdp = std::make_unique<Mdp>(bundle->data.season(club), std::move(models));
    session->state = session->mdp->initial_state();
  } catch (const Error& e) {
    return api_error(422, "invalid_bundle", e.what());
  }
  session->bundle = bundle_id;
  {
    std::unique_lock lock(mutex_);
    session->id = fmt::format("s{}", next_id_++);
    sessions_[session->id] = session;
  }
  std::lock_guard guard(session->mutex);
  return {201, state_view(*session->mdp, session->state, session->id, session->seed, 0.0)};
}

ApiResponse PlannerService::state(const std::string& id) {
  auto session = find(id);
  if (!session) return api_error(404, "unknown_session", fmt::format("no session '{}'", id));
  std::lock_guard guard(session->mutex);
  return {200, state_view(*session->mdp, session->state, session->id, session->seed, session->total_points)};
}

ApiResponse PlannerService::recommendation(const std::string& id, std::optional<int> budget) {
  auto session = find(id);
  if (!session) return api_error(404, "unknown_session", fmt::format("no session '{}'", id));
  if (budget && *budget < 1) return api_error(400, "bad_request", "budget must be a positive integer");
  std::lock_guard guard(session->mutex);
  const Mdp& mdp = *session->mdp;
  const MdpState& s = session->state;
  if (mdp.is_terminal(s)) return api_error(409, "season_over", "the season has no games left");

  SearchConfig cfg;
  cfg.iterations = budget.value_or(default_budget);
  cfg.seed = search_seed(session->seed, s.fixture);
  const SearchResult r = mcts_search(mdp, s, cfg);
  const Season& season = mdp.season();

  json actions = json::array();
  for (const auto& a : r.root_actions)
    actions.push_back({{"lineup", lineup_json(a.lineup, season)},
                       {"visits", a.visits},
                       {"mean_value", a.mean_value},
                       {"immediate_ep", a.immediate_ep}});
  json explanations = json::array();
  const InjuryModel& model = mdp.models().injury;
  for (PlayerIndex i : r.action.players) {
    const PlayerStatus& st = s.players[i];
    json e = {{"player", season.player(i).id}, {"injury_prob", st.injury_prob}};
    json contributions = json::array();
    if (model.kind == InjuryModelKind::calibrated_classifier) {
      const Explanation ex = explain_prediction(model, st.factors, 3);
      e["base"] = ex.base;
      for (const auto& c : ex.contributions)
        contributions.push_back({{"feature", c.feature}, {"contribution", c.contribution}, {"value", c.value}});
    }
    e["contributions"] = std::move(contributions);
    explanations.push_back(std::move(e));
  }
  return {200,
          {{"gameweek", s.fixture + 1},
           {"lineup", lineup_json(r.action, season)},
           {"expected_points", mdp.reward(s, r.action)},
           {"forced", r.forced},
           {"budget", cfg.iterations},
           {"root_value", r.root_value},
           {"actions", std::move(actions)},
           {"explanations", std::move(explanations)}}};
}

ApiResponse PlannerService::evaluate_lineup(const std::string& id, const json& body) {
  auto session = find(id);
  if (!session) return api_error(404, "unknown_session", fmt::format("no session '{}'", id));
  std::lock_guard guard(session->mutex);
  const Mdp& mdp = *session->mdp;
  if (mdp.is_terminal(session->state)) return api_error(409, "season_over", "the season has no games left");
  auto parsed = parse_lineup(body, mdp.season());
  if (auto* err = std::get_if<ApiResponse>(&parsed)) return *err;
  const Lineup& lineup = std::get<Lineup>(parsed);
  const auto problems = mdp.lineup_violations(session->state, lineup);
  json j = {{"valid", problems.empty()}, {"violations", violations_json(problems)}};
  j["expected_points"] = lineup.size() == kLineupSize ? json(mdp.reward(session->state, lineup)) : json(nullptr);
  double risk = 0.0;
  for (PlayerIndex i : lineup.players) risk += session->state.players[i].injury_prob;
  j["expected_injuries"] = risk;
  return {200, std::move(j)};
}

ApiResponse PlannerService::submit_lineup(const std::string& id, const json& body) {
  auto session = find(id);
  if (!session) return api_error(404, "unknown_session", fmt::format("no session '{}'", id));
  std::lock_guard guard(session->mutex);
  const Mdp& mdp = *session->mdp;
  if (mdp.is_terminal(session->state)) return api_error(409, "season_over", "the season has no games left");
  auto parsed = parse_lineup(body, mdp.season());
  if (auto* err = std::get_if<ApiResponse>(&parsed)) return *err;
  const Lineup& lineup = std::get<Lineup>(parsed);
  const auto problems = mdp.lineup_violations(session->state, lineup);
  if (!problems.empty())
    return api_error(422, "invalid_lineup", "lineup breaks the selection rules", violations_json(problems));

  // Same draws as a simulated season with this seed.
  TransitionOutcome out = mdp.transition(session->state, lineup, season_draws(session->seed));
  SessionStep step{static_cast<int>(session->state.fixture) + 1, lineup, out.reward, out.injuries};
  session->state = std::move(out.next);
  session->total_points += step.reward;
  session->history.push_back(step);
  return {200,
          {{"gameweek", step.gameweek},
           {"reward", step.reward},
           {"injuries", injuries_json(step.injuries, mdp.season())},
           {"state", state_view(mdp, session->state, session->id, session->seed, session->total_points)}}};
}

ApiResponse PlannerService::history(const std::string& id) {
  auto session = find(id);
  if (!session) return api_error(404, "unknown_session", fmt::format("no session '{}'", id));
  std::lock_guard guard(session->mutex);
  const Season& season = session->mdp->season();
  json steps = json::array();
  for (const auto& h : session->history)
    steps.push_back({{"gameweek", h.gameweek},
                     {"lineup", lineup_json(h.lineup, season)},
                     {"reward", h.reward},
                     {"injuries", injuries_json(h.injuries, season)}});
  return {200, {{"session_id", session->id}, {"total_points", session->total_points}, {"history", std::move(steps)}}};
}

namespace {

void reply(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body.dump(), "application/json");
}

// Parses a JSON request body, or fills `res` with the error and returns nullopt.
std::optional<json> read_body(const httplib::Request& req, httplib::Response& res) {
  const std::string type = req.get_header_value("Content-Type");
  if (type.rfind("application/json", 0) != 0) {
    reply(res, api_error(415, "unsupported_media_type", "request bodies must be application/json",
                         {{"content_type", type}}));
    return std::nullopt;
  }
  try {
    return json::parse(req.body.empty() ? "{}" : req.body);
  } catch (const json::parse_error& e) {
    reply(res, api_error(400, "bad_request", fmt::format("malformed JSON: {}", e.what())));
    return std::nullopt;
  }
}

}  // namespace

void PlannerService::mount(httplib::Server& server) {
  server.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = read_body(req, res)) reply(res, create_session(*body));
  });
  server.Get(R"(/v1/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, state(req.matches[1]));
  });
  server.Get(R"(/v1/sessions/([^/]+)/history)", [this](const httplib::Request& req, httplib::Response& res) {
    reply(res, history(req.matches[1]));
  });
  server.Get(R"(/v1/sessions/([^/]+)/recommendation)", [this](const httplib::Request& req, httplib::Response& res) {
    std::optional<int> budget;
    if (req.has_param("budget")) {
      const std::string text = req.get_param_value("budget");
      try {
        std::size_t used = 0;
        budget = std::stoi(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
      } catch (const std::exception&) {
        reply(res, api_error(400, "bad_request", fmt::format("budget '{}' is not an integer", text)));
        return;
      }
    }
    reply(res, recommendation(req.matches[1], budget));
  });
  server.Post(R"(/v1/sessions/([^/]+)/lineup)", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = read_body(req, res)) reply(res, submit_lineup(req.matches[1], *body));
  });
  server.Post(R"(/v1/sessions/([^/]+)/evaluate)", [this](const httplib::Request& req, httplib::Response& res) {
    if (auto body = read_body(req, res)) reply(res, evaluate_lineup(req.matches[1], *body));
  });
  server.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      reply(res, api_error(404, "not_found", fmt::format("no route for {} {}", req.method, req.path)));
  });
  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      reply(res, api_error(500, "internal", e.what()));
    } catch (...) {
      reply(res, api_error(500, "internal", "unknown failure"));
    }
  });
}

bool serve(PlannerService& service, const std::string& host, int port) {
  httplib::Server server;
  service.mount(server);
  return server.listen(host, port);
}

}  // namespace squadplan
