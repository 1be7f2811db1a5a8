#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "squadplan/mdp.hpp"

namespace squadplan {

struct SearchConfig {
  int iterations = 1000;
  double exploration = 1.4142135623730951;  // sqrt(2)
  double widening_c = 1.0;
  double widening_alpha = 0.5;
  int rollout_stochastic_steps = 3;  // later rollout games draw no new injuries
  double rest_penalty = 0.0;         // points per unit of Theta when ordering new actions
  std::uint64_t seed = 0;
};

void validate(const SearchConfig& config);

/// UCB1 on a mean already scaled to [0, 1]. Unvisited children score +inf.
double ucb1_score(double normalized_mean, int child_visits, int parent_visits, double exploration);

/// Children a decision node may have after n visits: max(1, ceil(c * n^alpha)).
std::size_t allowed_children(int visits, double c, double alpha);

struct ActionStats {
  Lineup lineup;
  int visits = 0;
  double mean_value = 0.0;  // immediate EP plus the backed-up value of what follows
  double immediate_ep = 0.0;
};

struct SearchResult {
  Lineup action;
  bool forced = false;  // preferred formation infeasible, so the fallback lineup was taken
  int iterations = 0;
  double root_value = 0.0;
  std::size_t tree_nodes = 0;
  std::vector<ActionStats> root_actions;  // in the order they were added
};

/// Monte Carlo tree search over lineups. Every node keeps the running mean of
/// the returns that passed through it. The k-th visit of a
/// chance node draws from scenario k of the seeded keyed generator, so
/// sibling actions are compared under common random numbers.
class SearchTree {
 public:
  SearchTree(const Mdp& mdp, MdpState root, SearchConfig config);
  ~SearchTree();
  SearchTree(const SearchTree&) = delete;
  SearchTree& operator=(const SearchTree&) = delete;

  void run(int iterations);
  SearchResult result() const;

  /// Greedy playout from s under the draws of one scenario.
  double rollout(const MdpState& s, const InjuryDraws& draws) const;

  /// Statistics consistency problems; empty when the tree is sound.
  std::vector<std::string> check_invariants() const;
  std::size_t size() const { return decisions_.size() + chances_.size(); }

 private:
  struct Decision;
  struct Chance;

  const Mdp& mdp_;
  SearchConfig config_;
  KeyedRng keys_;
  double rest_weight_ = 0.0;
  std::vector<std::unique_ptr<Decision>> decisions_;
  std::vector<std::unique_ptr<Chance>> chances_;
  int completed_ = 0;

  int select_child(int d);
  bool widen(int d);
  void iterate();
  double chance_mean(const Chance& c) const;
};

SearchResult mcts_search(const Mdp& mdp, const MdpState& s, const SearchConfig& config);

struct OracleResult {
  Lineup action;
  double value = 0.0;
  std::vector<std::pair<Lineup, double>> action_values;  // root Q for every action, in id order
  long long evaluations = 0;
};

/// Exact expectimax over every lineup and every injury combination of the
/// selected players, with injury lengths collapsed to the mean length, up to
/// `depth` games ahead. Throws InstanceTooLargeError past `max_nodes` states.
OracleResult expectimax_oracle(const Mdp& mdp, const MdpState& s, int depth, long long max_nodes = 1'000'000);

}  // namespace squadplan
