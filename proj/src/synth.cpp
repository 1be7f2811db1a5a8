#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "squadplan/ingest.hpp"
#include "squadplan/rng.hpp"

namespace squadplan {

double InjuryHazard::probability(const RiskFactors& f) const {
  const FeatureVector x = to_features(f);
  double z = intercept;
  for (std::size_t i = 0; i < kRiskFeatureCount; ++i) z += coefficients[i] * x[i];
  return 1.0 / (1.0 + std::exp(-z));
}

InjuryModel InjuryHazard::as_model() const {
  InjuryModel m;
  m.kind = InjuryModelKind::calibrated_classifier;
  m.feature_names.assign(kRiskFeatureNames.begin(), kRiskFeatureNames.end());
  m.weights.assign(coefficients.begin(), coefficients.end());
  m.bias = intercept;
  m.feature_means.assign(kRiskFeatureCount, 0.0);
  return m;
}

namespace {

constexpr std::array<const char*, 24> kFirstNames = {
    "Alex", "Ben",   "Carlos", "Dan",   "Eden",  "Felix", "Gabriel", "Harry", "Ivan",  "Jamal", "Kai",   "Luca",
    "Mason", "Nico", "Oscar",  "Pablo", "Quinn", "Rafa",  "Sami",    "Theo",  "Umar",  "Victor", "Will", "Yann"};
constexpr std::array<const char*, 24> kLastNames = {
    "Adams",  "Barros", "Costa",  "Dalton", "Evans",   "Fischer", "Garcia", "Hughes",
    "Ibarra", "Jensen", "Keller", "Lopez",  "Moreau",  "Novak",   "Okafor", "Pereira",
    "Quinn",  "Rossi",  "Silva",  "Turner", "Ulloa",   "Vidal",   "Walker", "Young"};

constexpr std::array<Formation, 6> kClubFormations = {Formation{4, 4, 2}, Formation{4, 3, 3}, Formation{4, 5, 1},
                                                      Formation{3, 5, 2}, Formation{5, 3, 2}, Formation{4, 4, 2}};

struct RoleProfile {
  double skill_median;
  double distance_km;
  double dribbles;
};

constexpr RoleProfile role_profile(Role r) {
  switch (r) {
    case Role::GK: return {2.2, 5.4, 0.05};
    case Role::DEF: return {3.0, 10.2, 0.6};
    case Role::MID: return {3.4, 11.1, 1.3};
    case Role::ATT: return {3.9, 9.9, 2.2};
  }
  return {3.0, 10.0, 1.0};
}

struct Round {
  int day = 0;
  std::vector<std::pair<int, int>> games;  // (home club, away club)
};

// Circle-method double round-robin; second half mirrors the first with venues swapped.
std::vector<std::vector<std::pair<int, int>>> double_round_robin(int n) {
  const int m = n % 2 == 0 ? n : n + 1;
  std::vector<std::vector<std::pair<int, int>>> first;
  for (int r = 0; r < m - 1; ++r) {
    std::vector<std::pair<int, int>> round;
    for (int i = 0; i < m / 2; ++i) {
      int a = (r + i) % (m - 1);
      int b = (m - 1 - i + r) % (m - 1);
      if (i == 0) b = m - 1;
      if (a >= n || b >= n) continue;
      if ((i == 0 && r % 2 == 1) || (i > 0 && i % 2 == 1)) std::swap(a, b);
      round.emplace_back(a, b);
    }
    first.push_back(std::move(round));
  }
  auto all = first;
  for (const auto& round : first) {
    std::vector<std::pair<int, int>> mirrored;
    for (auto [h, a] : round) mirrored.emplace_back(a, h);
    all.push_back(std::move(mirrored));
  }
  return all;
}

std::vector<Round> schedule(const std::vector<std::vector<std::pair<int, int>>>& rounds, int first_day,
                            const SynthConfig& cfg, Rng& rng) {
  std::vector<Round> out;
  int day = first_day;
  for (std::size_t r = 0; r < rounds.size(); ++r) {
    if (r > 0) day += rng.uniform_int(cfg.min_gap_days, cfg.max_gap_days);
    out.push_back({day, rounds[r]});
  }
  return out;
}

struct ClubSquad {
  ClubId id;
  Formation formation;
  std::array<std::vector<std::size_t>, kRoleCount> by_skill;  // global player indices
};

// Best eleven from the players passing `usable`; relaxes the formation, then
// the roles, when the preferred shape cannot be filled.
template <class Usable>
std::vector<std::size_t> pick_eleven(const ClubSquad& club, const std::vector<Player>& players, Usable usable) {
  std::array<std::vector<std::size_t>, kRoleCount> pool;
  for (Role r : kRoles)
    for (std::size_t i : club.by_skill[role_slot(r)])
      if (usable(i)) pool[role_slot(r)].push_back(i);

  auto fill = [&](const Formation& f, std::vector<std::size_t>& out) {
    for (Role r : kRoles) {
      const auto need = static_cast<std::size_t>(f.count(r));
      if (pool[role_slot(r)].size() < need) return false;
      out.insert(out.end(), pool[role_slot(r)].begin(), pool[role_slot(r)].begin() + static_cast<std::ptrdiff_t>(need));
    }
    return true;
  };
  std::vector<std::size_t> best;
  if (fill(club.formation, best)) return best;
  best.clear();
  double best_value = -1.0;
  for (const Formation& f : legal_formations()) {
    std::vector<std::size_t> pick;
    if (!fill(f, pick)) continue;
    double v = 0.0;
    for (std::size_t i : pick) v += players[i].skill;
    if (v > best_value) {
      best_value = v;
      best = std::move(pick);
    }
  }
  if (!best.empty()) return best;
  std::vector<std::size_t> any;
  for (const auto& p : pool) any.insert(any.end(), p.begin(), p.end());
  std::stable_sort(any.begin(), any.end(), [&](std::size_t a, std::size_t b) { return players[a].skill > players[b].skill; });
  if (any.size() > kLineupSize) any.resize(kLineupSize);
  return any;
}

struct LeaguePlay {
  double rotation_rate = 0.0;
  bool noisy_workload = false;
  std::uint64_t tag = 0;
};

struct PlayTally {
  double hazard_sum = 0.0;
  int appearances = 0;
  int injuries = 0;
};

// Plays every round for every club, appending appearances and injuries to
// `players` and, when `results` is given, the final scores.
PlayTally play_rounds(std::vector<Player>& players, const std::vector<ClubSquad>& clubs,
                      const std::vector<Round>& rounds, const SynthTruth& truth, const KeyedRng& keys,
                      const LeaguePlay& how, std::vector<HistoricalResult>* results) {
  PlayTally tally;
  std::vector<int> out_until(players.size(), std::numeric_limits<int>::min());
  std::vector<int> past(players.size(), 0), days_out(players.size(), 0);
  for (std::size_t i = 0; i < players.size(); ++i) {
    for (const auto& rec : players[i].injury_history) {
      out_until[i] = std::max(out_until[i], rec.start_day + rec.duration_days);
      ++past[i];
      days_out[i] += rec.duration_days;
    }
  }
  const KeyedRng rest_keys = keys.derive(how.tag * 4 + 1);
  const KeyedRng injury_keys = keys.derive(how.tag * 4 + 2);
  const KeyedRng work_keys = keys.derive(how.tag * 4 + 3);
  const KeyedRng goal_keys = keys.derive(how.tag * 4 + 4);

  for (std::size_t r = 0; r < rounds.size(); ++r) {
    const int day = rounds[r].day;
    std::vector<std::vector<std::size_t>> lineups(clubs.size());
    std::vector<double> values(clubs.size(), 0.0);
    for (const auto& [home, away] : rounds[r].games) {
      for (int c : {home, away}) {
        const auto& club = clubs[static_cast<std::size_t>(c)];
        auto available = [&](std::size_t i) { return day > out_until[i]; };
        auto rested = [&](std::size_t i) { return how.rotation_rate > 0.0 && rest_keys.uniform(r, i) < how.rotation_rate; };
        auto lineup = pick_eleven(club, players, [&](std::size_t i) { return available(i) && !rested(i); });
        if (lineup.size() < kLineupSize) lineup = pick_eleven(club, players, available);
        for (std::size_t i : lineup) values[static_cast<std::size_t>(c)] += players[i].skill;
        lineups[static_cast<std::size_t>(c)] = std::move(lineup);
      }
    }
    for (const auto& [home, away] : rounds[r].games) {
      for (int c : {home, away}) {
        for (std::size_t i : lineups[static_cast<std::size_t>(c)]) {
          Player& p = players[i];
          const RiskFactors f = compute_risk_factors(p.appearances, day, past[i], days_out[i], p.age_years);
          const double hazard = truth.hazard.probability(f);
          const bool injured = injury_keys.uniform(r, i) < hazard;
          Appearance a{day, p.mean_distance_km, p.mean_dribbles, injured};
          if (how.noisy_workload) {
            a.distance_km = std::max(0.0, p.mean_distance_km + 1.0 * work_keys.normal(r, i, 0));
            a.dribbles = std::max(0.0, p.mean_dribbles + 0.6 * work_keys.normal(r, i, 1));
          }
          p.appearances.push_back(a);
          tally.hazard_sum += hazard;
          ++tally.appearances;
          if (injured) {
            ++tally.injuries;
            const int length = injury_days_from_normal(truth.lengths, injury_keys.normal(r, i, 7));
            p.injury_history.push_back({day, length});
            out_until[i] = day + length;
            ++past[i];
            days_out[i] += length;
          }
        }
      }
      if (results) {
        const auto h = static_cast<std::size_t>(home), a = static_cast<std::size_t>(away);
        Rng goals(goal_keys.bits(r, h, a));
        HistoricalResult res;
        res.day = day;
        res.home_club = clubs[h].id;
        res.away_club = clubs[a].id;
        res.home_value = values[h];
        res.away_value = values[a];
        res.home_goals = goals.poisson(truth.match.goal_rate(values[h], values[a], true));
        res.away_goals = goals.poisson(truth.match.goal_rate(values[a], values[h], false));
        results->push_back(std::move(res));
      }
    }
  }
  return tally;
}

std::string two_digits(int v, int width) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%0*d", width, v);
  return buf;
}

double logit(double p) { return std::log(p / (1.0 - p)); }

}  // namespace

SynthResult synth_league_with_truth(const SynthConfig& cfg) {
  if (cfg.n_clubs < 2) throw ConfigError("synthetic league needs at least 2 clubs");
  if (cfg.squad_size < 14)
    throw ConfigError("squad_size " + std::to_string(cfg.squad_size) +
                      " is too small to fill a formation with spares (need at least 14)");
  if (cfg.squad_size > 99) throw ConfigError("squad_size above 99 is not supported");
  if (!(cfg.base_injury_rate > 0.0 && cfg.base_injury_rate < 1.0))
    throw ConfigError("base_injury_rate must lie strictly between 0 and 1");
  if (cfg.min_gap_days < 1 || cfg.max_gap_days < cfg.min_gap_days) throw ConfigError("invalid fixture gap range");
  if (cfg.history_seasons < 0) throw ConfigError("history_seasons must be non-negative");

  SynthTruth truth;
  truth.lengths = {18.0, 15.0};
  // acute, chronic, ratio, past injuries, career days, recent distance, recent dribbles, age
  // Acute load dominates, so rotating a tired starter can pay for itself.
  truth.hazard.coefficients = {0.35, 0.0, 0.15, 0.10, 0.002, 0.03, 0.12, 0.0};

  Rng rng(splitmix64(cfg.seed ^ 0x1234ABCDULL));
  const KeyedRng keys(cfg.seed);
  const int width = cfg.n_clubs >= 100 ? 3 : 2;

  DatasetBundle bundle;
  std::vector<ClubSquad> clubs;
  for (int c = 0; c < cfg.n_clubs; ++c) {
    ClubSquad club;
    club.id = "C" + two_digits(c + 1, width);
    club.formation = kClubFormations[static_cast<std::size_t>(rng.uniform_int(0, kClubFormations.size() - 1))];
    const double quality = rng.normal(0.0, 0.22);
    const double intensity = rng.uniform(0.85, 1.15);
    const double proneness = rng.uniform(0.6, 2.4);

    std::array<int, kRoleCount> counts = {1, club.formation.def, club.formation.mid, club.formation.att};
    int spares = cfg.squad_size - static_cast<int>(kLineupSize);
    counts[role_slot(Role::GK)] += 1;
    --spares;
    constexpr std::array<Role, 5> cycle = {Role::DEF, Role::MID, Role::ATT, Role::MID, Role::DEF};
    for (int s = 0; s < spares; ++s) ++counts[role_slot(cycle[static_cast<std::size_t>(s) % cycle.size()])];

    int number = 1;
    for (Role r : kRoles) {
      const RoleProfile prof = role_profile(r);
      for (int k = 0; k < counts[role_slot(r)]; ++k) {
        Player p;
        p.id = club.id + "-P" + two_digits(number++, 2);
        p.name = std::string(kFirstNames[static_cast<std::size_t>(rng.uniform_int(0, kFirstNames.size() - 1))]) + " " +
                 kLastNames[static_cast<std::size_t>(rng.uniform_int(0, kLastNames.size() - 1))];
        p.club = club.id;
        p.role = r;
        p.skill = std::exp(std::log(prof.skill_median) + quality + 0.3 * rng.normal());
        p.mean_distance_km = std::max(0.0, rng.normal(prof.distance_km, 0.8)) * intensity;
        p.mean_dribbles = std::max(0.0, rng.normal(prof.dribbles, 0.5));
        const double wage = 2000.0 * std::pow(p.skill, 1.6) * std::exp(rng.normal(0.0, 0.25));
        p.wage_weekly = std::round(wage / 100.0) * 100.0;
        bundle.wage_table[p.id] = *p.wage_weekly;
        // career injuries before the recorded seasons
        const int count = rng.poisson(proneness * std::exp(rng.normal(0.0, 0.5)));
        for (int j = 0; j < count; ++j) p.injury_history.push_back({0, injury_days_from_normal(truth.lengths, rng.normal())});
        bundle.players.push_back(std::move(p));
      }
    }
    bundle.formations[club.id] = club.formation;
    clubs.push_back(std::move(club));
  }

  // Season calendars: recorded seasons end well before the planned one starts at day 0.
  const auto pairings = double_round_robin(cfg.n_clubs);
  const std::vector<Round> current = schedule(pairings, 0, cfg, rng);
  std::vector<std::vector<Round>> past_seasons;
  int next_start = 0;
  for (int h = 0; h < cfg.history_seasons; ++h) {
    std::vector<Round> s = schedule(pairings, 0, cfg, rng);
    const int shift = next_start - 90 - s.back().day;
    for (auto& round : s) round.day += shift;
    next_start = s.front().day;
    past_seasons.insert(past_seasons.begin(), std::move(s));
  }
  const int history_start = past_seasons.empty() ? 0 : past_seasons.front().front().day;
  for (auto& p : bundle.players) {
    for (auto& rec : p.injury_history) rec.start_day = history_start - rng.uniform_int(30, 1460);
    std::sort(p.injury_history.begin(), p.injury_history.end(),
              [](const InjuryRecord& a, const InjuryRecord& b) { return a.start_day < b.start_day; });
  }

  for (std::size_t i = 0; i < bundle.players.size(); ++i) {
    const Player& p = bundle.players[i];
    auto& club = *std::find_if(clubs.begin(), clubs.end(), [&](const ClubSquad& c) { return c.id == p.club; });
    club.by_skill[role_slot(p.role)].push_back(i);
  }
  for (auto& club : clubs)
    for (auto& order : club.by_skill)
      std::stable_sort(order.begin(), order.end(),
                       [&](std::size_t a, std::size_t b) { return bundle.players[a].skill > bundle.players[b].skill; });

  // Match model: goal rates around 1.3 per side, sensitive to the value gap.
  truth.match.beta1 = 0.04;
  truth.match.beta2 = -0.04;
  truth.match.beta_home = 0.2;
  truth.match.beta0 = std::log(1.3) - 0.1;

  // Calibrate the hazard intercept so the planned season, played with each
  // club's best eleven throughout, sees injuries at the requested rate.
  const std::vector<Player> base_players = bundle.players;
  LeaguePlay history_play{cfg.rotation_rate, true, 0};
  LeaguePlay pilot_play{0.0, false, 1000};
  truth.hazard.intercept = logit(cfg.base_injury_rate) - 1.5;
  auto run_history = [&](std::vector<Player>& players, std::vector<HistoricalResult>* results) {
    for (std::size_t h = 0; h < past_seasons.size(); ++h) {
      history_play.tag = h + 1;
      play_rounds(players, clubs, past_seasons[h], truth, keys, history_play, results);
    }
  };
  for (int iter = 0; iter < 8; ++iter) {
    std::vector<Player> players = base_players;
    run_history(players, nullptr);
    const PlayTally t = play_rounds(players, clubs, current, truth, keys, pilot_play, nullptr);
    const double rate = t.hazard_sum / std::max(1, t.appearances);
    const double step = logit(cfg.base_injury_rate) - logit(rate);
    truth.hazard.intercept += step;
    if (std::abs(step) < 1e-4) break;
  }
  bundle.players = base_players;
  run_history(bundle.players, &bundle.results);

  for (std::size_t r = 0; r < current.size(); ++r) {
    for (const auto& [h, a] : current[r].games) {
      bundle.fixtures.push_back({static_cast<int>(r) + 1, current[r].day, clubs[static_cast<std::size_t>(h)].id,
                                 clubs[static_cast<std::size_t>(a)].id});
    }
  }
  return {std::move(bundle), truth};
}

DatasetBundle synth_league(std::uint64_t seed, int n_clubs, int squad_size, double base_injury_rate) {
  SynthConfig cfg;
  cfg.seed = seed;
  cfg.n_clubs = n_clubs;
  cfg.squad_size = squad_size;
  cfg.base_injury_rate = base_injury_rate;
  return synth_league_with_truth(cfg).bundle;
}

}  // namespace squadplan
