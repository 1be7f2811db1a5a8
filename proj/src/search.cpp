#include "squadplan/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace squadplan {

void validate(const SearchConfig& c) {
  if (c.iterations < 1) throw ConfigError("iterations must be at least 1");
  if (!(c.exploration >= 0.0)) throw ConfigError("exploration constant must be non-negative");
  if (!(c.widening_c > 0.0)) throw ConfigError("widening constant must be positive");
  if (!(c.widening_alpha >= 0.0 && c.widening_alpha <= 1.0)) throw ConfigError("widening exponent must be in [0, 1]");
  if (c.rollout_stochastic_steps < 0) throw ConfigError("rollout stochastic steps must be non-negative");
  if (!(c.rest_penalty >= 0.0)) throw ConfigError("rest penalty must be non-negative");
}

double ucb1_score(double normalized_mean, int child_visits, int parent_visits, double exploration) {
  if (child_visits <= 0) return std::numeric_limits<double>::infinity();
  const double n = std::max(parent_visits, 1);
  return normalized_mean + exploration * std::sqrt(std::log(n) / child_visits);
}

std::size_t allowed_children(int visits, double c, double alpha) {
  const double k = std::ceil(c * std::pow(static_cast<double>(std::max(visits, 0)), alpha));
  return std::max<std::size_t>(1, static_cast<std::size_t>(k));
}

// ---------------------------------------------------------------------------

struct SearchTree::Decision {
  MdpState state;
  int visits = 0;
  double value = 0.0;
  double leaf = 0.0;  // rollout value from the first visit
  std::vector<int> children;  // chance nodes
  bool forced = false;
  bool exhausted = false;
  std::unique_ptr<RankedLineups> ranked;
};

struct SearchTree::Chance {
  Lineup action;
  double reward = 0.0;
  int visits = 0;
  double weighted = 0.0;  // sum over outcome children of visits * value
  std::map<std::vector<int>, int> outcomes;
};

SearchTree::SearchTree(const Mdp& mdp, MdpState root, SearchConfig config)
    : mdp_(mdp), config_(config), keys_(KeyedRng(config.seed).derive(0x5EA4C4)) {
  validate(config_);
  if (mdp_.is_terminal(root)) throw InvalidActionError("the season is over");
  if (config_.rest_penalty > 0.0) {
    // Convert points per unit risk into skill units at the current operating point.
    const Selection g = mdp_.greedy_selection(root);
    const double v = mdp_.team_value(g.lineup);
    const double slope = (mdp_.expected_points(v + 0.5, root.fixture) - mdp_.expected_points(v - 0.5, root.fixture));
    rest_weight_ = slope > 1e-9 ? config_.rest_penalty / slope : 0.0;
  }
  auto node = std::make_unique<Decision>();
  node->state = std::move(root);
  decisions_.push_back(std::move(node));
}

SearchTree::~SearchTree() = default;

double SearchTree::chance_mean(const Chance& c) const {
  return c.visits == 0 ? c.reward : c.reward + c.weighted / c.visits;
}

bool SearchTree::widen(int d) {
  Decision& node = *decisions_[static_cast<std::size_t>(d)];
  if (node.exhausted) return false;
  std::optional<Lineup> next;
  if (node.children.empty()) {
    const auto& preferred = mdp_.season().formation().preferred;
    const Selection g = mdp_.greedy_selection(node.state);
    if (g.fallback || !preferred) {
      node.forced = g.fallback;
      node.exhausted = true;  // fallback and free-formation nodes keep the single greedy action
      next = g.lineup;
    } else if (rest_weight_ == 0.0) {
      next = g.lineup;
    } else {
      node.ranked = std::make_unique<RankedLineups>(mdp_, node.state, *preferred, rest_weight_);
      next = node.ranked->next();
    }
  } else {
    if (!node.ranked) {
      node.ranked = std::make_unique<RankedLineups>(mdp_, node.state, *mdp_.season().formation().preferred, 0.0);
      node.ranked->next();  // the greedy lineup is already a child
    }
    next = node.ranked->next();
  }
  if (!next) {
    node.exhausted = true;
    return false;
  }
  auto c = std::make_unique<Chance>();
  c->reward = mdp_.reward(node.state, *next);
  c->action = std::move(*next);
  node.children.push_back(static_cast<int>(chances_.size()));
  chances_.push_back(std::move(c));
  return true;
}

int SearchTree::select_child(int d) {
  Decision& node = *decisions_[static_cast<std::size_t>(d)];
  const std::size_t allowed = allowed_children(node.visits, config_.widening_c, config_.widening_alpha);
  while (node.children.size() < allowed && widen(d)) {
  }
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (int c : node.children) {
    const Chance& ch = *chances_[static_cast<std::size_t>(c)];
    if (ch.visits == 0) return c;
    lo = std::min(lo, chance_mean(ch));
    hi = std::max(hi, chance_mean(ch));
  }
  int best = node.children.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c : node.children) {
    const Chance& ch = *chances_[static_cast<std::size_t>(c)];
    const double q = hi > lo ? (chance_mean(ch) - lo) / (hi - lo) : 0.5;
    const double score = ucb1_score(q, ch.visits, node.visits, config_.exploration);
    if (score > best_score) {
      best_score = score;
      best = c;
    }
  }
  return best;
}

double SearchTree::rollout(const MdpState& start, const InjuryDraws& draws) const {
  double total = 0.0;
  int step = 0;
  if (mdp_.is_terminal(start)) return 0.0;
  MdpState s = start;
  while (!mdp_.is_terminal(s)) {
    const Selection g = mdp_.greedy_selection(s);
    if (step < config_.rollout_stochastic_steps) {
      TransitionOutcome out = mdp_.transition(s, g.lineup, draws);
      total += out.reward;
      s = std::move(out.next);
    } else {
      total += mdp_.reward(s, g.lineup);
      mdp_.advance_without_injuries(s, g.lineup);
    }
    ++step;
  }
  return total;
}

void SearchTree::iterate() {
  // The k-th visit of any chance node draws its game's injuries from scenario
  // k, so sibling actions are compared on paired dice at every depth. The
  // rollout continues the scenario of the last chance node passed.
  std::optional<InjuryDraws> draws;
  std::vector<int> path_d{0};
  std::vector<int> path_c;
  std::vector<std::pair<int, double>> before{{decisions_[0]->visits, decisions_[0]->value}};

  while (true) {
    const int d = path_d.back();
    Decision& node = *decisions_[static_cast<std::size_t>(d)];
    if (mdp_.is_terminal(node.state)) {
      ++node.visits;
      node.value = 0.0;
      break;
    }
    if (d != 0 && node.visits == 0) {
      node.leaf = rollout(node.state, *draws);
      node.value = node.leaf;
      node.visits = 1;
      break;
    }
    const int c = select_child(d);
    Chance& ch = *chances_[static_cast<std::size_t>(c)];
    draws.emplace(keys_, static_cast<std::uint64_t>(ch.visits));
    std::vector<RealizedInjury> injuries;
    const Fixture& f = mdp_.fixture(node.state);
    for (PlayerIndex i : ch.action.players) {
      if (draws->uniform(node.state.fixture, i) < node.state.players[i].injury_prob) {
        const SampledInjury si =
            sample_injury(mdp_.models().lengths, draws->normal(node.state.fixture, i), f, mdp_.season().fixtures());
        injuries.push_back({i, si.days, si.games_out});
      }
    }
    std::vector<int> key;
    for (const auto& inj : injuries) key.insert(key.end(), {inj.player, inj.games_out, inj.days});
    auto [it, inserted] = ch.outcomes.try_emplace(std::move(key), 0);
    if (inserted) {
      auto child = std::make_unique<Decision>();
      child->state = mdp_.apply(node.state, ch.action, injuries);
      it->second = static_cast<int>(decisions_.size());
      decisions_.push_back(std::move(child));
    }
    const Decision& next = *decisions_[static_cast<std::size_t>(it->second)];
    path_c.push_back(c);
    path_d.push_back(it->second);
    before.emplace_back(next.visits, next.value);
  }

  for (std::size_t k = path_c.size(); k-- > 0;) {
    const Decision& child = *decisions_[static_cast<std::size_t>(path_d[k + 1])];
    Chance& ch = *chances_[static_cast<std::size_t>(path_c[k])];
    ch.weighted += child.visits * child.value - before[k + 1].first * before[k + 1].second;
    ++ch.visits;
    Decision& parent = *decisions_[static_cast<std::size_t>(path_d[k])];
    ++parent.visits;
    double sum = k == 0 ? 0.0 : parent.leaf;
    for (int c : parent.children) {
      const Chance& sib = *chances_[static_cast<std::size_t>(c)];
      if (sib.visits > 0) sum += sib.visits * chance_mean(sib);
    }
    parent.value = sum / parent.visits;
  }
}

void SearchTree::run(int iterations) {
  for (int i = 0; i < iterations; ++i) {
    iterate();
    ++completed_;
  }
}

SearchResult SearchTree::result() const {
  const Decision& root = *decisions_[0];
  SearchResult r;
  r.iterations = completed_;
  r.root_value = root.value;
  r.tree_nodes = size();
  const ActionStats* best = nullptr;
  for (int c : root.children) {
    const Chance& ch = *chances_[static_cast<std::size_t>(c)];
    r.root_actions.push_back({ch.action, ch.visits, chance_mean(ch), ch.reward});
  }
  for (const auto& a : r.root_actions) {
    if (!best || a.visits > best->visits ||
        (a.visits == best->visits && (a.mean_value > best->mean_value ||
                                      (a.mean_value == best->mean_value && a.lineup < best->lineup))))
      best = &a;
  }
  if (best) {
    r.action = best->lineup;
  } else {
    r.action = mdp_.greedy_selection(root.state).lineup;
  }
  r.forced = root.forced;
  return r;
}

std::vector<std::string> SearchTree::check_invariants() const {
  std::vector<std::string> problems;
  for (std::size_t d = 0; d < decisions_.size(); ++d) {
    const Decision& node = *decisions_[d];
    if (mdp_.is_terminal(node.state)) continue;
    int sum = 0;
    for (int c : node.children) sum += chances_[static_cast<std::size_t>(c)]->visits;
    const int expected = d == 0 ? sum : (node.visits == 0 ? 0 : sum + 1);
    if (node.visits != expected)
      problems.push_back(fmt::format("decision {} has {} visits, children account for {}", d, node.visits, expected));
    const double cap = 3.0 * static_cast<double>(mdp_.horizon() - node.state.fixture);
    if (node.visits > 0 && (node.value < -1e-9 || node.value > cap + 1e-9))
      problems.push_back(fmt::format("decision {} value {} outside [0, {}]", d, node.value, cap));
  }
  for (std::size_t c = 0; c < chances_.size(); ++c) {
    const Chance& ch = *chances_[c];
    int sum = 0;
    for (const auto& [key, d] : ch.outcomes) sum += decisions_[static_cast<std::size_t>(d)]->visits;
    if (ch.visits != sum)
      problems.push_back(fmt::format("chance {} has {} visits, outcomes account for {}", c, ch.visits, sum));
  }
  if (decisions_[0]->visits != completed_)
    problems.push_back(fmt::format("root has {} visits after {} iterations", decisions_[0]->visits, completed_));
  return problems;
}

SearchResult mcts_search(const Mdp& mdp, const MdpState& s, const SearchConfig& config) {
  SearchTree tree(mdp, s, config);
  tree.run(config.iterations);
  return tree.result();
}

// ---------------------------------------------------------------------------
// Expectimax
// ---------------------------------------------------------------------------

namespace {

struct Expectimax {
  const Mdp& mdp;
  long long max_nodes;
  long long evaluations = 0;
  int mean_days = 0;

  std::vector<Lineup> actions(const MdpState& s) const {
    const Selection g = mdp.greedy_selection(s);
    if (g.fallback || !mdp.season().formation().preferred) return {g.lineup};
    return mdp.enumerate_actions(s);
  }

  double q(const MdpState& s, const Lineup& a, int depth) {
    double total = mdp.reward(s, a);
    if (depth <= 1) return total;
    std::vector<PlayerIndex> risky, certain;
    for (PlayerIndex i : a.players) {
      const double p = s.players[i].injury_prob;
      if (p >= 1.0) certain.push_back(i);
      else if (p > 0.0) risky.push_back(i);
    }
    const Fixture& f = mdp.fixture(s);
    const int games = injury_period_to_game_count(f.timestep, mean_days, mdp.season().fixtures());
    const std::size_t combos = std::size_t{1} << risky.size();
    for (std::size_t mask = 0; mask < combos; ++mask) {
      double prob = 1.0;
      std::vector<RealizedInjury> injuries;
      for (PlayerIndex i : certain) injuries.push_back({i, mean_days, games});
      for (std::size_t b = 0; b < risky.size(); ++b) {
        const double p = s.players[risky[b]].injury_prob;
        if (mask >> b & 1u) {
          prob *= p;
          injuries.push_back({risky[b], mean_days, games});
        } else {
          prob *= 1.0 - p;
        }
      }
      if (prob == 0.0) continue;
      std::sort(injuries.begin(), injuries.end(), [](const auto& x, const auto& y) { return x.player < y.player; });
      total += prob * value(mdp.apply(s, a, injuries), depth - 1);
    }
    return total;
  }

  double value(const MdpState& s, int depth) {
    if (depth <= 0 || mdp.is_terminal(s)) return 0.0;
    if (++evaluations > max_nodes)
      throw InstanceTooLargeError(fmt::format("expectimax exceeded {} states", max_nodes));
    double best = -std::numeric_limits<double>::infinity();
    for (const Lineup& a : actions(s)) best = std::max(best, q(s, a, depth));
    return best;
  }
};

}  // namespace

OracleResult expectimax_oracle(const Mdp& mdp, const MdpState& s, int depth, long long max_nodes) {
  if (depth < 1) throw ConfigError("expectimax depth must be at least 1");
  if (mdp.is_terminal(s)) throw InvalidActionError("the season is over");
  Expectimax ex{mdp, max_nodes};
  ex.mean_days = injury_days_from_normal(mdp.models().lengths, 0.0);

  const auto root_actions = ex.actions(s);
  // Rough size check before any work: root branching raised to the depth.
  int risky = 0;
  for (const auto& st : s.players) risky += (st.injury_prob > 0.0 && st.injury_prob < 1.0) ? 1 : 0;
  const int steps = std::min<int>(depth, static_cast<int>(mdp.horizon() - s.fixture));
  double estimate = 1.0;
  const double branching = static_cast<double>(root_actions.size()) * std::pow(2.0, std::min(risky, 11));
  for (int k = 1; k < steps; ++k) estimate *= branching;
  if (estimate > static_cast<double>(max_nodes))
    throw InstanceTooLargeError(
        fmt::format("expectimax would visit about {:.3g} states, the limit is {}", estimate, max_nodes));

  OracleResult r;
  r.value = -std::numeric_limits<double>::infinity();
  for (const Lineup& a : root_actions) {
    const double v = ex.q(s, a, depth);
    r.action_values.emplace_back(a, v);
    if (v > r.value + 1e-12) {
      r.value = v;
      r.action = a;
    }
  }
  r.evaluations = ex.evaluations + 1;
  return r;
}

}  // namespace squadplan
