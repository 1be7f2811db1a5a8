#pragma once

#include <map>
#include <span>
#include <vector>

#include "json.hpp"

#include "squadplan/core.hpp"

namespace squadplan {

inline constexpr int kDefaultMaxGoals = 10;

/// Player-level Maher model: each side's goals are Poisson with
/// log rate = beta0 + beta1 * own value + beta2 * opponent value + beta_home * home.
struct MatchModel {
  double beta0 = 0.0;
  double beta1 = 0.0;
  double beta2 = 0.0;
  double beta_home = 0.0;
  int max_goals = kDefaultMaxGoals;
  int iterations = 0;

  double goal_rate(double own_value, double opp_value, bool home) const;
  bool operator==(const MatchModel&) const = default;
};

struct OutcomeProbs {
  double win = 0.0;
  double draw = 0.0;
  double loss = 0.0;
};

struct GameRecord {
  double home_value = 0.0;
  double away_value = 0.0;
  int home_goals = 0;
  int away_goals = 0;
};

double team_value(const Lineup& lineup, std::span<const Player> squad);

struct MatchTrainOptions {
  double tolerance = 1e-8;
  int max_iterations = 200;
};

MatchModel train_match_model(std::span<const GameRecord> games, const MatchTrainOptions& options = {});

/// grid[i][j] = P(own scores i, opponent scores j), truncated and renormalised.
std::vector<std::vector<double>> scoreline_grid(const MatchModel& model, double v_own, double v_opp, bool home);

OutcomeProbs outcome_probs_from_rates(double lambda_own, double lambda_opp, int max_goals);
OutcomeProbs outcome_probs(const MatchModel& model, double v_own, double v_opp, bool home);

inline double expected_points(const OutcomeProbs& p) { return 3.0 * p.win + p.draw; }
double expected_points(const MatchModel& model, double v_own, const Fixture& fixture);
double expected_points(const MatchModel& model, const Lineup& lineup, const Fixture& fixture,
                       std::span<const Player> squad);

enum class MatchResult { win, draw, loss };
MatchResult result_of(int own_goals, int opp_goals);
double outcome_log_loss(std::span<const OutcomeProbs> predictions, std::span<const MatchResult> results);

// Team-identity Maher model, the reference point for the player-level model.
struct ClubGame {
  ClubId home;
  ClubId away;
  int home_goals = 0;
  int away_goals = 0;
};

struct TeamMatchModel {
  double intercept = 0.0;
  double home = 0.0;
  std::map<ClubId, double> attack;
  std::map<ClubId, double> defence;
  int max_goals = kDefaultMaxGoals;

  OutcomeProbs outcome(const ClubId& home_club, const ClubId& away_club) const;
};

TeamMatchModel train_team_match_model(std::span<const ClubGame> games, const MatchTrainOptions& options = {});

nlohmann::json to_json(const MatchModel& model);
MatchModel match_model_from_json(const nlohmann::json& j);

}  // namespace squadplan
