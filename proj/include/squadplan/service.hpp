#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <string>

#include "json.hpp"

#include "squadplan/experiments.hpp"

namespace httplib {
class Server;
}

namespace squadplan {

struct ApiResponse {
  int status = 200;
  nlohmann::json body;
};

/// Error body {code, message, details}.
ApiResponse api_error(int status, std::string code, std::string message, nlohmann::json details = nullptr);

struct SessionStep {
  int gameweek = 0;
  Lineup lineup;
  double reward = 0.0;
  std::vector<RealizedInjury> injuries;
};

/// In-memory planner sessions over loaded bundles. Each handler returns the
/// HTTP status and JSON body, so the routes in mount() stay thin.
class PlannerService {
 public:
  PlannerService();
  ~PlannerService();

  void add_bundle(const std::string& id, DatasetBundle bundle, Models models);
  int default_budget = 1000;

  ApiResponse create_session(const nlohmann::json& body);
  ApiResponse state(const std::string& session);
  ApiResponse recommendation(const std::string& session, std::optional<int> budget);
  ApiResponse submit_lineup(const std::string& session, const nlohmann::json& body);
  /// Checks a draft lineup and prices it without playing the game.
  ApiResponse evaluate_lineup(const std::string& session, const nlohmann::json& body);
  ApiResponse history(const std::string& session);

  /// Registers the /v1 routes.
  void mount(httplib::Server& server);

 private:
  struct Bundle;
  struct Session;

  std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Bundle>> bundles_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;

  std::shared_ptr<Session> find(const std::string& id);
};

/// Blocks serving the API until the process stops. Returns false when the
/// address cannot be bound.
bool serve(PlannerService& service, const std::string& host, int port);

}  // namespace squadplan
