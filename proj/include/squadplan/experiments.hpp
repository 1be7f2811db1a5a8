#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "squadplan/ingest.hpp"
#include "squadplan/mdp.hpp"
#include "squadplan/search.hpp"
#include "squadplan/stats.hpp"

namespace squadplan {

enum class Strategy { mcts, greedy, replay };

std::string_view to_string(Strategy s);
Strategy parse_strategy(std::string_view text);

/// Fits the injury classifier (or baseline), the length distribution and the
/// match model on a bundle's recorded history.
Models train_models(const DatasetBundle& bundle, InjuryModelKind kind = InjuryModelKind::calibrated_classifier);

/// Transition randomness of a simulated season: draws keyed by (fixture, player).
InjuryDraws season_draws(std::uint64_t seed);
/// Seed of the search run before gameweek `fixture` (0-based) of season `seed`.
std::uint64_t search_seed(std::uint64_t seed, std::size_t fixture);

struct SimulationConfig {
  SearchConfig search;
  double risk_multiplier = 1.0;
};

struct GameweekRecord {
  int gameweek = 0;  // 1-based
  int day = 0;
  ClubId opponent;
  bool home = true;
  Lineup lineup;
  double reward = 0.0;
  std::vector<RealizedInjury> injuries;
  std::vector<double> injury_probs;  // every squad member, before the game
  std::vector<int> unavailable;      // games still to miss, before the game
  bool fallback = false;
};

struct SeasonResult {
  ClubId club;
  Strategy strategy = Strategy::greedy;
  std::uint64_t seed = 0;
  double risk_multiplier = 1.0;
  double total_expected_points = 0.0;
  int squad_injuries = 0;
  int optimal_team_injuries = 0;
  double wage_inefficiency = 0.0;
  int fallback_gameweeks = 0;
  std::vector<GameweekRecord> per_gameweek;
};

/// Plays a whole season. `replay` needs one recorded lineup per fixture.
SeasonResult simulate_season(const Mdp& mdp, Strategy strategy, const SimulationConfig& config, std::uint64_t seed,
                             const std::vector<std::optional<Lineup>>* recorded = nullptr);

SeasonResult simulate_season(const DatasetBundle& bundle, const ClubId& club, Strategy strategy, const Models& models,
                             const SimulationConfig& config, std::uint64_t seed);

/// The skill-top eleven filling the preferred formation at full health.
Lineup optimal_team(const Season& season);
int optimal_team_injuries(const SeasonResult& result, const Season& season);

/// Weekly wage times injured days / 7 over all realized injuries.
double wage_inefficiency(const SeasonResult& result, const Season& season);

/// Mean share of common players, in percent of eleven.
double team_similarity(std::span<const Lineup> a, std::span<const Lineup> b);

/// Runs seasons for every seed on a bounded worker pool. Output order follows `seeds`.
std::vector<SeasonResult> simulate_many(const Mdp& mdp, Strategy strategy, const SimulationConfig& config,
                                        std::span<const std::uint64_t> seeds, int jobs);

/// Applies `task` to 0..n-1 on up to `jobs` threads.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;
  double se = 0.0;
};

MetricSummary summarize(std::span<const double> values);

struct StrategySummary {
  Strategy strategy = Strategy::greedy;
  int seasons = 0;
  MetricSummary points;
  MetricSummary squad_injuries;
  MetricSummary optimal_team_injuries;
  MetricSummary wage_inefficiency;
};

StrategySummary summarize(Strategy strategy, std::span<const SeasonResult> results);

struct Comparison {
  ClubId club;
  double risk_multiplier = 1.0;
  StrategySummary reference;  // greedy
  StrategySummary candidate;  // mcts
  double points_change_percent = 0.0;  // (candidate - reference) / reference * 100
  double points_change_se = 0.0;
  double optimal_injury_reduction_percent = 0.0;
  double optimal_injury_reduction_se = 0.0;
  double squad_injury_reduction_percent = 0.0;
  double wage_reduction_percent = 0.0;
  double points_std_reduction_percent = 0.0;
  double similarity_percent = 0.0;  // mean over paired seasons
  WelchResult optimal_injuries_test;  // candidate vs reference
  WelchResult squad_injuries_test;
  WelchResult points_test;
};

Comparison compare_strategies(std::span<const SeasonResult> reference, std::span<const SeasonResult> candidate);

struct ClubInjuryCount {
  ClubId club;
  double expected = 0.0;
  int actual = 0;
};

struct InjuryCountValidation {
  std::vector<ClubInjuryCount> clubs;
  double pearson_r = 0.0;
  double mean_abs_percent_diff = 0.0;
};

/// Per-club sum of predicted Theta over recorded appearances against the
/// recorded injury count.
InjuryCountValidation injury_count_validation(const InjuryModel& model, const DatasetBundle& bundle);

struct CaseStudyRow {
  int gameweek = 0;
  std::vector<double> theta;    // per strategy, before the game
  std::vector<double> rolling;  // trailing mean of theta
  std::vector<bool> played;
  std::vector<bool> available;
};

struct CaseStudy {
  PlayerId player;
  std::vector<Strategy> strategies;
  std::size_t window = 5;
  std::vector<CaseStudyRow> rows;
};

CaseStudy player_case_study(const Season& season, std::span<const SeasonResult> results, const PlayerId& player,
                            std::size_t window = 5);

// Reports
nlohmann::json to_json(const SeasonResult& r, const Season& season);
nlohmann::json to_json(const Comparison& c);
std::string comparison_csv(std::span<const Comparison> rows);
std::string case_study_csv(const CaseStudy& study);
std::string injury_validation_csv(const InjuryCountValidation& v);

}  // namespace squadplan
