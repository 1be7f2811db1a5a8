#pragma once

#include <fmt/format.h>

#include "squadplan/mdp.hpp"

namespace testing {

// Two fixtures, thirteen players. The best attacker is injured with
// probability 0.5 whenever he plays and then misses the rest of the season.
// The first game is against a far stronger side, so resting him first pays.
inline squadplan::Mdp star_toy() {
  using namespace squadplan;
  std::vector<Player> squad;
  auto add = [&](std::string id, Role r, double skill) {
    Player p;
    p.id = std::move(id);
    p.name = p.id;
    p.club = "T";
    p.role = r;
    p.skill = skill;
    p.mean_distance_km = 10.0;
    p.mean_dribbles = 1.0;
    squad.push_back(std::move(p));
  };
  add("gk", Role::GK, 2.0);
  for (int i = 0; i < 4; ++i) add(fmt::format("def{}", i), Role::DEF, 3.0 - 0.1 * i);
  const double mids[] = {3.0, 2.9, 2.8, 2.7, 1.0};
  for (int i = 0; i < 5; ++i) add(fmt::format("mid{}", i), Role::MID, mids[i]);
  add("att0", Role::ATT, 6.0);
  add("att1", Role::ATT, 3.0);
  add("att2", Role::ATT, 2.5);

  std::vector<Fixture> fixtures = {{1, 0, "giants", 70.0, false}, {2, 4, "rivals", 32.0, true}};
  Models m;
  m.injury.kind = InjuryModelKind::heuristic_baseline;
  for (const auto& p : squad) m.injury.player_rates[p.id] = 0.0;
  m.injury.player_rates["att0"] = 0.5;
  m.lengths = {8.0, 1e-9};  // fixed length: two games on a 4-day calendar
  m.match.beta0 = 0.16;
  m.match.beta1 = 0.08;
  m.match.beta2 = -0.08;
  m.match.beta_home = 0.2;
  return Mdp(Season("T", std::move(fixtures), std::move(squad), {Formation{4, 4, 2}}), std::move(m));
}

}  // namespace testing
