#include "squadplan/mdp.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace squadplan {

namespace {

std::string formation_name(const Formation& f) { return fmt::format("{}-{}-{}", f.def, f.mid, f.att); }

std::array<int, kRoleCount> role_counts(const Season& season, const Lineup& lineup) {
  std::array<int, kRoleCount> n{};
  for (PlayerIndex i : lineup.players) ++n[role_slot(season.player(i).role)];
  return n;
}

// All k-subsets of `pool` (kept in pool order), appended to `out`.
void combinations(std::span<const PlayerIndex> pool, int k, std::vector<std::vector<PlayerIndex>>& out) {
  const int n = static_cast<int>(pool.size());
  if (k > n) return;
  std::vector<int> idx(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) idx[static_cast<std::size_t>(i)] = i;
  while (true) {
    std::vector<PlayerIndex> c;
    c.reserve(static_cast<std::size_t>(k));
    for (int i : idx) c.push_back(pool[static_cast<std::size_t>(i)]);
    out.push_back(std::move(c));
    int j = k - 1;
    while (j >= 0 && idx[static_cast<std::size_t>(j)] == n - k + j) --j;
    if (j < 0) return;
    ++idx[static_cast<std::size_t>(j)];
    for (int m = j + 1; m < k; ++m) idx[static_cast<std::size_t>(m)] = idx[static_cast<std::size_t>(m - 1)] + 1;
  }
}

}  // namespace

Mdp::Mdp(Season season, Models models) : season_(std::move(season)), models_(std::move(models)) {
  if (!(models_.risk_multiplier >= 0.0)) throw ConfigError("risk multiplier must be non-negative");
  if (models_.injury.kind == InjuryModelKind::heuristic_baseline) {
    for (const Player& p : season_.squad()) baseline_rate_.push_back(predict_injury_prob(models_.injury, {}, p.id));
  } else {
    if (models_.injury.weights.size() != kRiskFeatureCount)
      throw ConfigError(fmt::format("injury model has {} weights, expected {}", models_.injury.weights.size(),
                                    kRiskFeatureCount));
    std::copy(models_.injury.weights.begin(), models_.injury.weights.end(), weights_.begin());
  }
}

double Mdp::injury_prob(PlayerIndex i, const RiskFactors& f) const {
  double p;
  if (!baseline_rate_.empty()) {
    p = baseline_rate_[i];
  } else {
    const FeatureVector x = to_features(f);
    double z = models_.injury.bias;
    for (std::size_t j = 0; j < kRiskFeatureCount; ++j) z += weights_[j] * x[j];
    p = 1.0 / (1.0 + std::exp(-z));
  }
  return std::clamp(models_.risk_multiplier * p, 0.0, 1.0);
}

void Mdp::refresh(MdpState& s) const {
  if (is_terminal(s)) return;
  const int day = fixture(s).timestep;
  for (std::size_t i = 0; i < s.players.size(); ++i) {
    PlayerStatus& st = s.players[i];
    trim_appearances(st.recent, day);
    st.factors = compute_risk_factors(st.recent, day, st.past_injuries, st.career_days_injured,
                                      season_.player(static_cast<PlayerIndex>(i)).age_years);
    st.injury_prob = injury_prob(static_cast<PlayerIndex>(i), st.factors);
  }
}

MdpState Mdp::initial_state() const {
  MdpState s;
  const auto fixtures = season_.fixtures();
  const int start = fixtures.empty() ? 0 : fixtures.front().timestep;
  for (const Player& p : season_.squad()) {
    PlayerStatus st;
    for (const Appearance& a : p.appearances)
      if (a.day < start) st.recent.push_back(a);
    for (const InjuryRecord& r : p.injury_history) {
      if (r.start_day >= start) continue;
      ++st.past_injuries;
      st.career_days_injured += r.duration_days;
      st.unavailable = std::max(st.unavailable, injury_period_to_game_count(r.start_day, r.duration_days, fixtures));
    }
    s.players.push_back(std::move(st));
  }
  refresh(s);
  return s;
}

double Mdp::team_value(const Lineup& lineup) const { return squadplan::team_value(lineup, season_.squad()); }

double Mdp::expected_points(double value, std::size_t fixture) const {
  return squadplan::expected_points(models_.match, value, season_.fixtures()[fixture]);
}

double Mdp::reward(const MdpState& s, const Lineup& lineup) const {
  return expected_points(team_value(lineup), s.fixture);
}

std::vector<Formation> Mdp::action_formations() const {
  if (season_.formation().preferred) return {*season_.formation().preferred};
  return legal_formations();
}

std::vector<std::size_t> count_by_role(const Season& season, const MdpState& s) {
  std::vector<std::size_t> n(kRoleCount, 0);
  for (std::size_t i = 0; i < s.players.size(); ++i)
    if (s.players[i].unavailable == 0) ++n[role_slot(season.player(static_cast<PlayerIndex>(i)).role)];
  return n;
}

bool Mdp::feasible(const MdpState& s, const Formation& f) const {
  const auto n = count_by_role(season_, s);
  for (Role r : kRoles)
    if (n[role_slot(r)] < static_cast<std::size_t>(f.count(r))) return false;
  return true;
}

namespace {

void require_feasible(const Season& season, const MdpState& s, const Formation& f) {
  const auto n = count_by_role(season, s);
  for (Role r : kRoles) {
    const auto need = static_cast<std::size_t>(f.count(r));
    if (n[role_slot(r)] < need)
      throw InfeasibleError(fmt::format("formation {} needs {} {} but only {} are available", formation_name(f), need,
                                        to_string(r), n[role_slot(r)]));
  }
}

Lineup top_per_role(const Season& season, const MdpState& s, const Formation& f) {
  std::vector<PlayerIndex> picked;
  picked.reserve(kLineupSize);
  for (Role r : kRoles) {
    int need = f.count(r);
    for (PlayerIndex i : season.by_skill(r)) {
      if (need == 0) break;
      if (s.available(i)) {
        picked.push_back(i);
        --need;
      }
    }
  }
  return Lineup(std::move(picked));
}

}  // namespace

std::vector<Lineup> Mdp::enumerate_actions(const MdpState& s) const {
  const auto formations = action_formations();
  const bool preferred = season_.formation().preferred.has_value();
  std::vector<Lineup> out;
  for (const Formation& f : formations) {
    if (preferred) require_feasible(season_, s, f);
    else if (!feasible(s, f)) continue;
    std::array<std::vector<std::vector<PlayerIndex>>, kRoleCount> per_role;
    for (Role r : kRoles) {
      std::vector<PlayerIndex> pool;
      for (std::size_t i = 0; i < s.players.size(); ++i) {
        const auto pi = static_cast<PlayerIndex>(i);
        if (s.available(pi) && season_.player(pi).role == r) pool.push_back(pi);
      }
      combinations(pool, f.count(r), per_role[role_slot(r)]);
    }
    for (const auto& g : per_role[0])
      for (const auto& d : per_role[1])
        for (const auto& m : per_role[2])
          for (const auto& a : per_role[3]) {
            std::vector<PlayerIndex> all;
            all.reserve(kLineupSize);
            all.insert(all.end(), g.begin(), g.end());
            all.insert(all.end(), d.begin(), d.end());
            all.insert(all.end(), m.begin(), m.end());
            all.insert(all.end(), a.begin(), a.end());
            out.emplace_back(std::move(all));
          }
  }
  if (out.empty()) throw InfeasibleError("no legal formation can be filled from the available players");
  std::sort(out.begin(), out.end());
  return out;
}

Lineup Mdp::greedy_action(const MdpState& s) const {
  const auto formations = action_formations();
  if (formations.size() == 1) {
    require_feasible(season_, s, formations.front());
    return top_per_role(season_, s, formations.front());
  }
  const Selection sel = greedy_selection(s);
  if (!sel.formation) throw InfeasibleError("no legal formation can be filled from the available players");
  return sel.lineup;
}

Selection Mdp::greedy_selection(const MdpState& s) const {
  Selection out;
  const auto& preferred = season_.formation().preferred;
  if (preferred && feasible(s, *preferred)) {
    out.lineup = top_per_role(season_, s, *preferred);
    out.formation = preferred;
    return out;
  }
  out.fallback = preferred.has_value();
  double best = -1.0;
  for (const Formation& f : legal_formations()) {
    if (!feasible(s, f)) continue;
    Lineup l = top_per_role(season_, s, f);
    const double v = team_value(l);
    if (v > best) {
      best = v;
      out.lineup = std::move(l);
      out.formation = f;
    }
  }
  if (out.formation) return out;

  // Not even a legal shape: best available players, whatever their role.
  out.fallback = true;
  std::vector<PlayerIndex> avail;
  for (std::size_t i = 0; i < s.players.size(); ++i)
    if (s.available(static_cast<PlayerIndex>(i))) avail.push_back(static_cast<PlayerIndex>(i));
  std::stable_sort(avail.begin(), avail.end(),
                   [&](PlayerIndex a, PlayerIndex b) { return season_.player(a).skill > season_.player(b).skill; });
  if (avail.size() > kLineupSize) avail.resize(kLineupSize);
  out.lineup = Lineup(std::move(avail));
  return out;
}

std::vector<std::string> Mdp::lineup_violations(const MdpState& s, const Lineup& lineup) const {
  std::vector<std::string> v;
  for (std::size_t i = 0; i < lineup.players.size(); ++i) {
    const PlayerIndex p = lineup.players[i];
    if (p >= s.players.size()) {
      v.push_back(fmt::format("player index {} is not in the squad", p));
      return v;
    }
    if (i > 0 && lineup.players[i - 1] == p) v.push_back(fmt::format("player '{}' is listed twice", season_.player(p).id));
    if (!s.available(p))
      v.push_back(fmt::format("player '{}' is injured for {} more game(s)", season_.player(p).id,
                              s.players[p].unavailable));
  }
  const auto n = role_counts(season_, lineup);
  const Formation shape{n[1], n[2], n[3]};
  const auto& preferred = season_.formation().preferred;
  if (preferred && feasible(s, *preferred)) {
    if (lineup.size() != kLineupSize) v.push_back(fmt::format("lineup has {} players, expected 11", lineup.size()));
    if (n[0] != 1 || !(shape == *preferred))
      v.push_back(fmt::format("lineup shape {}-{}-{}-{} does not match the formation {}", n[0], n[1], n[2], n[3],
                              formation_name(*preferred)));
    return v;
  }
  bool any_legal = false;
  for (const Formation& f : legal_formations()) any_legal = any_legal || feasible(s, f);
  if (any_legal) {
    if (lineup.size() != kLineupSize) v.push_back(fmt::format("lineup has {} players, expected 11", lineup.size()));
    if (n[0] != 1 || !shape.is_legal())
      v.push_back(fmt::format("lineup shape {}-{}-{}-{} is not a legal formation", n[0], n[1], n[2], n[3]));
    return v;
  }
  std::size_t available = 0;
  for (const auto& st : s.players) available += st.unavailable == 0 ? 1 : 0;
  const std::size_t want = std::min(available, kLineupSize);
  if (lineup.size() != want) v.push_back(fmt::format("lineup has {} players, expected {}", lineup.size(), want));
  return v;
}

MdpState Mdp::apply(const MdpState& s, const Lineup& lineup, std::span<const RealizedInjury> injuries) const {
  if (is_terminal(s)) throw InvalidActionError("the season is over");
  MdpState next = s;
  for (auto& st : next.players)
    if (st.unavailable > 0) --st.unavailable;
  const Fixture& f = fixture(s);
  for (PlayerIndex i : lineup.players) {
    if (i >= s.players.size()) throw InvalidActionError(fmt::format("player index {} is not in the squad", i));
    const Player& p = season_.player(i);
    next.players[i].recent.push_back({f.timestep, p.mean_distance_km, p.mean_dribbles, false});
  }
  for (const RealizedInjury& inj : injuries) {
    PlayerStatus& st = next.players.at(inj.player);
    st.unavailable = inj.games_out;
    ++st.past_injuries;
    st.career_days_injured += inj.days;
    if (!st.recent.empty() && st.recent.back().day == f.timestep) st.recent.back().injured = true;
  }
  next.fixture = s.fixture + 1;
  refresh(next);
  return next;
}

TransitionOutcome Mdp::transition(const MdpState& s, const Lineup& lineup, const InjuryDraws& draws) const {
  if (is_terminal(s)) throw InvalidActionError("the season is over");
  for (PlayerIndex i : lineup.players) {
    if (i >= s.players.size()) throw InvalidActionError(fmt::format("player index {} is not in the squad", i));
    if (!s.available(i))
      throw InvalidActionError(fmt::format("player '{}' is injured and cannot play", season_.player(i).id));
  }
  TransitionOutcome out;
  out.reward = reward(s, lineup);
  const Fixture& f = fixture(s);
  for (PlayerIndex i : lineup.players) {
    if (draws.uniform(s.fixture, i) < s.players[i].injury_prob) {
      const SampledInjury si = sample_injury(models_.lengths, draws.normal(s.fixture, i), f, season_.fixtures());
      out.injuries.push_back({i, si.days, si.games_out});
    }
  }
  out.next = apply(s, lineup, out.injuries);
  return out;
}

void Mdp::advance_without_injuries(MdpState& s, const Lineup&) const {
  for (auto& st : s.players)
    if (st.unavailable > 0) --st.unavailable;
  ++s.fixture;
}

// ---------------------------------------------------------------------------
// Ranked lineups
// ---------------------------------------------------------------------------

namespace {

template <class T>
std::vector<int> negate(const std::vector<T>& v) {
  std::vector<int> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = -static_cast<int>(v[i]);
  return out;
}

}  // namespace

bool RankedLineups::RoleStream::ensure(std::size_t rank) {
  const int n = static_cast<int>(players.size());
  while (combos.size() <= rank) {
    if (frontier.empty()) return false;
    auto [sum, neg] = frontier.top();
    frontier.pop();
    std::vector<int> pos(neg.size());
    for (std::size_t i = 0; i < neg.size(); ++i) pos[i] = -neg[i];
    for (int j = 0; j < k; ++j) {
      const auto uj = static_cast<std::size_t>(j);
      const int moved = pos[uj] + 1;
      if (moved >= n) continue;
      if (j + 1 < k && moved == pos[uj + 1]) continue;
      std::vector<int> succ = pos;
      succ[uj] = moved;
      if (!seen.insert(succ).second) continue;
      double s = 0.0;
      for (int p : succ) s += weight[static_cast<std::size_t>(p)];
      frontier.emplace(s, negate(succ));
    }
    combos.push_back(std::move(pos));
    sums.push_back(sum);
  }
  return true;
}

RankedLineups::RankedLineups(const Mdp& mdp, const MdpState& s, const Formation& formation, double rest_weight) {
  const Season& season = mdp.season();
  for (Role r : kRoles) {
    RoleStream& rs = roles_[role_slot(r)];
    rs.k = formation.count(r);
    std::vector<std::pair<double, PlayerIndex>> cand;
    for (std::size_t i = 0; i < s.players.size(); ++i) {
      const auto pi = static_cast<PlayerIndex>(i);
      if (!s.available(pi) || season.player(pi).role != r) continue;
      cand.emplace_back(season.player(pi).skill - rest_weight * s.players[i].injury_prob, pi);
    }
    std::stable_sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first > b.first;
      return a.second < b.second;
    });
    for (const auto& [w, p] : cand) {
      rs.weight.push_back(w);
      rs.players.push_back(p);
    }
    if (static_cast<int>(cand.size()) < rs.k) {
      empty_ = true;
      continue;
    }
    std::vector<int> first(static_cast<std::size_t>(rs.k));
    double sum = 0.0;
    for (int j = 0; j < rs.k; ++j) {
      first[static_cast<std::size_t>(j)] = j;
      sum += rs.weight[static_cast<std::size_t>(j)];
    }
    rs.seen.insert(first);
    rs.frontier.emplace(sum, negate(first));
  }
  if (!empty_) push({0, 0, 0, 0});
}

void RankedLineups::push(const std::array<int, kRoleCount>& ranks) {
  double score = 0.0;
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    if (!roles_[r].ensure(static_cast<std::size_t>(ranks[r]))) return;
    score += roles_[r].sums[static_cast<std::size_t>(ranks[r])];
  }
  if (!seen_.insert(ranks).second) return;
  std::array<int, kRoleCount> neg{};
  for (std::size_t r = 0; r < kRoleCount; ++r) neg[r] = -ranks[r];
  frontier_.emplace(score, neg);
}

std::optional<Lineup> RankedLineups::next() {
  if (empty_ || frontier_.empty()) return std::nullopt;
  auto [score, neg] = frontier_.top();
  frontier_.pop();
  std::array<int, kRoleCount> ranks{};
  std::vector<PlayerIndex> players;
  players.reserve(kLineupSize);
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    ranks[r] = -neg[r];
    for (int p : roles_[r].combos[static_cast<std::size_t>(ranks[r])])
      players.push_back(roles_[r].players[static_cast<std::size_t>(p)]);
  }
  for (std::size_t r = 0; r < kRoleCount; ++r) {
    auto succ = ranks;
    ++succ[r];
    push(succ);
  }
  ++produced_;
  return Lineup(std::move(players));
}

// ---------------------------------------------------------------------------

nlohmann::json state_to_json(const Mdp& mdp, const MdpState& s) {
  const Season& season = mdp.season();
  nlohmann::json j;
  j["club"] = season.club();
  j["gameweek"] = s.fixture + 1;
  j["games_total"] = season.size();
  j["done"] = mdp.is_terminal(s);
  if (!mdp.is_terminal(s)) {
    const Fixture& f = mdp.fixture(s);
    j["fixture"] = {{"index", f.index},
                    {"timestep", f.timestep},
                    {"opponent_id", f.opponent_id},
                    {"opponent_strength", f.opponent_strength},
                    {"is_home", f.is_home}};
  }
  nlohmann::json players = nlohmann::json::array();
  for (std::size_t i = 0; i < s.players.size(); ++i) {
    const Player& p = season.player(static_cast<PlayerIndex>(i));
    const PlayerStatus& st = s.players[i];
    nlohmann::json factors;
    const FeatureVector x = to_features(st.factors);
    for (std::size_t k = 0; k < kRiskFeatureCount; ++k) factors[std::string(kRiskFeatureNames[k])] = x[k];
    players.push_back({{"id", p.id},
                       {"name", p.name},
                       {"role", std::string(to_string(p.role))},
                       {"skill", p.skill},
                       {"available", st.unavailable == 0},
                       {"games_out", st.unavailable},
                       {"injury_prob", st.injury_prob},
                       {"risk_factors", factors}});
  }
  j["players"] = std::move(players);
  return j;
}

}  // namespace squadplan
