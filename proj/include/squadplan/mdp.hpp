#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <queue>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "squadplan/core.hpp"
#include "squadplan/injury.hpp"
#include "squadplan/match.hpp"
#include "squadplan/rng.hpp"

namespace squadplan {

struct Models {
  InjuryModel injury;
  LengthDistribution lengths{18.0, 15.0};
  MatchModel match;
  double risk_multiplier = 1.0;  // Theta -> min(1, m * Theta)
  double discount = 1.0;
};

struct RealizedInjury {
  PlayerIndex player = 0;
  int days = 0;
  int games_out = 0;

  bool operator==(const RealizedInjury&) const = default;
};

struct TransitionOutcome {
  MdpState next;
  std::vector<RealizedInjury> injuries;
  double reward = 0.0;
};

/// Randomness for one transition: draws keyed by (scenario, fixture, player).
class InjuryDraws {
 public:
  explicit InjuryDraws(KeyedRng keys, std::uint64_t scenario = 0) : keys_(keys), scenario_(scenario) {}

  double uniform(std::size_t fixture, PlayerIndex p) const { return keys_.uniform(scenario_, fixture, p); }
  double normal(std::size_t fixture, PlayerIndex p) const { return keys_.normal(scenario_, fixture, p); }

 private:
  KeyedRng keys_;
  std::uint64_t scenario_;
};

struct Selection {
  Lineup lineup;
  std::optional<Formation> formation;  // empty when roles had to be ignored
  bool fallback = false;               // preferred formation could not be filled
};

class Mdp {
 public:
  Mdp(Season season, Models models);

  const Season& season() const { return season_; }
  const Models& models() const { return models_; }
  std::size_t horizon() const { return season_.size(); }

  /// Decision context before the first fixture, built from each player's
  /// recorded appearances and injuries.
  MdpState initial_state() const;
  bool is_terminal(const MdpState& s) const { return s.fixture >= season_.size(); }
  const Fixture& fixture(const MdpState& s) const { return season_.fixtures()[s.fixture]; }

  /// Risk factors and Theta for every player at the state's fixture day.
  void refresh(MdpState& s) const;
  double injury_prob(PlayerIndex i, const RiskFactors& f) const;

  double expected_points(double team_value, std::size_t fixture) const;
  double reward(const MdpState& s, const Lineup& lineup) const;
  double team_value(const Lineup& lineup) const;

  /// The formation actions must use: the preferred one, or every legal
  /// formation when none is configured.
  std::vector<Formation> action_formations() const;
  bool feasible(const MdpState& s, const Formation& f) const;

  /// Every lineup of available players matching the action formation(s), in
  /// ascending id order. Throws InfeasibleError naming the short role.
  std::vector<Lineup> enumerate_actions(const MdpState& s) const;

  /// Top players per role by skill (ties: lower id). Throws InfeasibleError.
  Lineup greedy_action(const MdpState& s) const;

  /// Greedy with the mid-season fallback: preferred formation if it can be
  /// filled, else the best legal formation, else the best available players.
  Selection greedy_selection(const MdpState& s) const;

  /// Constraint violations of a submitted lineup; empty when it is valid.
  std::vector<std::string> lineup_violations(const MdpState& s, const Lineup& lineup) const;

  TransitionOutcome transition(const MdpState& s, const Lineup& lineup, const InjuryDraws& draws) const;

  /// Applies a known injury outcome (the expectimax oracle enumerates these).
  MdpState apply(const MdpState& s, const Lineup& lineup, std::span<const RealizedInjury> injuries) const;

  /// Rollout helper: advances without new injuries, only counting down absences.
  void advance_without_injuries(MdpState& s, const Lineup& lineup) const;

 private:
  Season season_;
  Models models_;
  std::vector<double> baseline_rate_;  // per squad index, heuristic model only
  std::array<double, kRiskFeatureCount> weights_{};
};

std::vector<std::size_t> count_by_role(const Season& season, const MdpState& s);

/// Lazily yields lineups of one formation in descending order of
/// sum(skill - rest_weight * Theta), ties broken towards lower ids. The first
/// lineup with rest_weight = 0 is the greedy one.
class RankedLineups {
 public:
  RankedLineups(const Mdp& mdp, const MdpState& s, const Formation& formation, double rest_weight);

  std::optional<Lineup> next();
  std::size_t produced() const { return produced_; }

 private:
  struct RoleStream {
    std::vector<PlayerIndex> players;  // sorted by weight desc, id asc
    std::vector<double> weight;
    int k = 0;
    std::vector<std::vector<int>> combos;
    std::vector<double> sums;
    std::priority_queue<std::pair<double, std::vector<int>>> frontier;  // (sum, negated positions)
    std::set<std::vector<int>> seen;

    bool ensure(std::size_t rank);
  };

  std::array<RoleStream, kRoleCount> roles_;
  std::priority_queue<std::pair<double, std::array<int, kRoleCount>>> frontier_;  // (score, negated ranks)
  std::set<std::array<int, kRoleCount>> seen_;
  std::size_t produced_ = 0;
  bool empty_ = false;

  void push(const std::array<int, kRoleCount>& ranks);
};

nlohmann::json state_to_json(const Mdp& mdp, const MdpState& s);

}  // namespace squadplan
