#include "squadplan/core.hpp"

#include <algorithm>
#include <cmath>

namespace squadplan {

std::string_view to_string(Role role) {
  switch (role) {
    case Role::GK: return "GK";
    case Role::DEF: return "DEF";
    case Role::MID: return "MID";
    case Role::ATT: return "ATT";
  }
  return "?";
}

Role parse_role(std::string_view text) {
  for (Role r : kRoles) {
    if (text == to_string(r)) return r;
  }
  throw ParseError("unknown role '" + std::string(text) + "' (expected GK, DEF, MID or ATT)");
}

int Formation::count(Role r) const {
  switch (r) {
    case Role::GK: return 1;
    case Role::DEF: return def;
    case Role::MID: return mid;
    case Role::ATT: return att;
  }
  return 0;
}

bool Formation::is_legal() const {
  return def >= kMinDef && def <= kMaxDef && mid >= kMinMid && mid <= kMaxMid && att >= kMinAtt &&
         att <= kMaxAtt && 1 + def + mid + att == static_cast<int>(kLineupSize);
}

std::vector<Formation> legal_formations() {
  std::vector<Formation> out;
  for (int d = kMinDef; d <= kMaxDef; ++d)
    for (int m = kMinMid; m <= kMaxMid; ++m)
      for (int a = kMinAtt; a <= kMaxAtt; ++a)
        if (Formation f{d, m, a}; f.is_legal()) out.push_back(f);
  return out;
}

Season::Season(ClubId club, std::vector<Fixture> fixtures, std::vector<Player> squad,
               FormationConstraint formation)
    : club_(std::move(club)), fixtures_(std::move(fixtures)), squad_(std::move(squad)),
      formation_(formation) {
  std::sort(squad_.begin(), squad_.end(), [](const Player& a, const Player& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < squad_.size(); ++i) {
    if (squad_[i].id == squad_[i - 1].id) throw ConfigError("duplicate player id '" + squad_[i].id + "'");
  }
  if (squad_.size() > 0xFFFF) throw ConfigError("squad too large");
  for (std::size_t i = 1; i < fixtures_.size(); ++i) {
    if (fixtures_[i].timestep <= fixtures_[i - 1].timestep)
      throw ConfigError("fixture timesteps must strictly increase (fixture " +
                        std::to_string(fixtures_[i].index) + ")");
  }
  if (formation_.preferred && !formation_.preferred->is_legal())
    throw ConfigError("preferred formation violates the role bounds");
  for (std::size_t i = 0; i < squad_.size(); ++i) {
    const Player& p = squad_[i];
    if (!std::isfinite(p.skill) || p.skill < 0.0)
      throw ConfigError("player '" + p.id + "' has a non-finite or negative skill");
    by_skill_[role_slot(p.role)].push_back(static_cast<PlayerIndex>(i));
  }
  for (auto& order : by_skill_) {
    std::stable_sort(order.begin(), order.end(), [&](PlayerIndex a, PlayerIndex b) {
      return squad_[a].skill > squad_[b].skill;
    });
  }
}

std::optional<PlayerIndex> Season::index_of(std::string_view id) const {
  auto it = std::lower_bound(squad_.begin(), squad_.end(), id,
                             [](const Player& p, std::string_view key) { return p.id < key; });
  if (it == squad_.end() || it->id != id) return std::nullopt;
  return static_cast<PlayerIndex>(it - squad_.begin());
}

Lineup::Lineup(std::vector<PlayerIndex> p) : players(std::move(p)) {
  std::sort(players.begin(), players.end());
}

bool Lineup::contains(PlayerIndex i) const {
  return std::binary_search(players.begin(), players.end(), i);
}

std::vector<PlayerId> lineup_ids(const Lineup& lineup, const Season& season) {
  std::vector<PlayerId> ids;
  ids.reserve(lineup.size());
  for (PlayerIndex i : lineup.players) ids.push_back(season.player(i).id);
  return ids;
}

int injury_period_to_game_count(int start_day, int duration_days, std::span<const Fixture> fixtures) {
  if (duration_days <= 0) return 0;
  const long end = static_cast<long>(start_day) + duration_days;
  auto first = std::upper_bound(fixtures.begin(), fixtures.end(), start_day,
                                [](int day, const Fixture& f) { return day < f.timestep; });
  auto last = std::upper_bound(first, fixtures.end(), end,
                               [](long day, const Fixture& f) { return day < f.timestep; });
  return static_cast<int>(last - first);
}

UnavailabilityVector decrement_unavailability(UnavailabilityVector l) {
  for (int& games : l)
    if (games > 0) --games;
  return l;
}

std::span<const Fixture> MdpState::remaining(const Season& season) const {
  auto all = season.fixtures();
  return all.subspan(std::min(fixture, all.size()));
}

UnavailabilityVector MdpState::unavailability() const {
  UnavailabilityVector out;
  out.reserve(players.size());
  for (const auto& p : players) out.push_back(p.unavailable);
  return out;
}

std::vector<double> MdpState::injury_probs() const {
  std::vector<double> out;
  out.reserve(players.size());
  for (const auto& p : players) out.push_back(p.injury_prob);
  return out;
}

}  // namespace squadplan
