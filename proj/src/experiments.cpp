#include "squadplan/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include <fmt/format.h>

namespace squadplan {

namespace {

constexpr std::uint64_t kSeasonStream = 0x5EA5;
constexpr std::uint64_t kSearchStream = 0x5EA6;

std::string num(double v) { return fmt::format("{}", v); }

}  // namespace

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::mcts: return "mcts";
    case Strategy::greedy: return "greedy";
    case Strategy::replay: return "replay";
  }
  return "?";
}

Strategy parse_strategy(std::string_view text) {
  if (text == "mcts") return Strategy::mcts;
  if (text == "greedy") return Strategy::greedy;
  if (text == "replay") return Strategy::replay;
  throw ConfigError(fmt::format("unknown strategy '{}' (expected mcts, greedy or replay)", text));
}

Models train_models(const DatasetBundle& bundle, InjuryModelKind kind) {
  Models m;
  const auto rows = injury_training_rows(bundle);
  m.injury = train_injury_model(rows, kind);
  m.lengths = fit_length_distribution(all_injury_records(bundle));
  m.match = train_match_model(match_training_games(bundle));
  return m;
}

InjuryDraws season_draws(std::uint64_t seed) { return InjuryDraws(KeyedRng(seed).derive(kSeasonStream), 0); }

std::uint64_t search_seed(std::uint64_t seed, std::size_t fixture) {
  return KeyedRng(seed).derive(kSearchStream).bits(fixture);
}

// ---------------------------------------------------------------------------

Lineup optimal_team(const Season& season) {
  MdpState healthy;
  healthy.players.resize(season.squad().size());
  Models none;
  none.injury.kind = InjuryModelKind::heuristic_baseline;
  const Mdp mdp(season, none);
  return mdp.greedy_selection(healthy).lineup;
}

int optimal_team_injuries(const SeasonResult& result, const Season& season) {
  const Lineup best = optimal_team(season);
  int n = 0;
  for (const auto& gw : result.per_gameweek)
    for (const auto& inj : gw.injuries) n += best.contains(inj.player) ? 1 : 0;
  return n;
}

double wage_inefficiency(const SeasonResult& result, const Season& season) {
  double total = 0.0;
  for (const auto& gw : result.per_gameweek)
    for (const auto& inj : gw.injuries) {
      const Player& p = season.player(inj.player);
      if (!p.wage_weekly) throw ReferenceError(fmt::format("no wage recorded for player '{}'", p.id));
      total += *p.wage_weekly * inj.days / 7.0;
    }
  return total;
}

double team_similarity(std::span<const Lineup> a, std::span<const Lineup> b) {
  if (a.size() != b.size())
    throw ConfigError(fmt::format("selection lists differ in length ({} vs {})", a.size(), b.size()));
  if (a.empty()) return 100.0;
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    std::size_t shared = 0;
    for (PlayerIndex p : a[i].players) shared += b[i].contains(p) ? 1 : 0;
    total += static_cast<double>(shared) / static_cast<double>(kLineupSize);
  }
  return total / static_cast<double>(a.size()) * 100.0;
}

// ---------------------------------------------------------------------------

SeasonResult simulate_season(const Mdp& base, Strategy strategy, const SimulationConfig& config, std::uint64_t seed,
                             const std::vector<std::optional<Lineup>>* recorded) {
  if (!(config.risk_multiplier >= 0.0)) throw ConfigError("risk multiplier must be non-negative");
  std::optional<Mdp> scaled;
  if (base.models().risk_multiplier != config.risk_multiplier) {
    Models m = base.models();
    m.risk_multiplier = config.risk_multiplier;
    scaled.emplace(base.season(), std::move(m));
  }
  const Mdp& mdp = scaled ? *scaled : base;
  if (strategy == Strategy::replay && (!recorded || recorded->size() != mdp.horizon()))
    throw UnsupportedError("replay needs a recorded lineup for every fixture, and this bundle has none");

  SeasonResult r;
  r.club = mdp.season().club();
  r.strategy = strategy;
  r.seed = seed;
  r.risk_multiplier = config.risk_multiplier;
  const InjuryDraws draws = season_draws(seed);
  MdpState s = mdp.initial_state();
  while (!mdp.is_terminal(s)) {
    GameweekRecord gw;
    const Fixture& f = mdp.fixture(s);
    gw.gameweek = static_cast<int>(s.fixture) + 1;
    gw.day = f.timestep;
    gw.opponent = f.opponent_id;
    gw.home = f.is_home;
    gw.injury_probs = s.injury_probs();
    gw.unavailable = s.unavailability();
    switch (strategy) {
      case Strategy::greedy: {
        Selection sel = mdp.greedy_selection(s);
        gw.lineup = std::move(sel.lineup);
        gw.fallback = sel.fallback;
        break;
      }
      case Strategy::mcts: {
        SearchConfig sc = config.search;
        sc.seed = search_seed(seed, s.fixture);
        SearchResult res = mcts_search(mdp, s, sc);
        gw.lineup = std::move(res.action);
        gw.fallback = res.forced;
        break;
      }
      case Strategy::replay: {
        const auto& want = (*recorded)[s.fixture];
        if (want && mdp.lineup_violations(s, *want).empty()) {
          gw.lineup = *want;
        } else {
          // The recorded eleven is missing or includes a player injured in this simulation.
          gw.lineup = mdp.greedy_selection(s).lineup;
          gw.fallback = true;
        }
        break;
      }
    }
    TransitionOutcome out = mdp.transition(s, gw.lineup, draws);
    gw.reward = out.reward;
    gw.injuries = std::move(out.injuries);
    r.total_expected_points += gw.reward;
    r.squad_injuries += static_cast<int>(gw.injuries.size());
    r.fallback_gameweeks += gw.fallback ? 1 : 0;
    s = std::move(out.next);
    r.per_gameweek.push_back(std::move(gw));
  }
  r.optimal_team_injuries = optimal_team_injuries(r, mdp.season());
  bool wages = true;
  for (const Player& p : mdp.season().squad()) wages = wages && p.wage_weekly.has_value();
  if (wages) r.wage_inefficiency = wage_inefficiency(r, mdp.season());
  return r;
}

SeasonResult simulate_season(const DatasetBundle& bundle, const ClubId& club, Strategy strategy, const Models& models,
                             const SimulationConfig& config, std::uint64_t seed) {
  Models m = models;
  m.risk_multiplier = config.risk_multiplier;
  const Mdp mdp(bundle.season(club), std::move(m));
  std::vector<std::optional<Lineup>> recorded;
  if (strategy == Strategy::replay) {
    bool any = false;
    for (const Fixture& f : mdp.season().fixtures()) {
      recorded.push_back(bundle.recorded_lineup(mdp.season(), f.index));
      any = any || recorded.back().has_value();
    }
    if (!any) throw UnsupportedError(fmt::format("bundle has no recorded lineups for club '{}'", club));
  }
  return simulate_season(mdp, strategy, config, seed, strategy == Strategy::replay ? &recorded : nullptr);
}

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& task) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(jobs, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(failure_mutex);
          if (!failure) failure = std::current_exception();
          next = n;
        }
      }
    });
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

std::vector<SeasonResult> simulate_many(const Mdp& mdp, Strategy strategy, const SimulationConfig& config,
                                        std::span<const std::uint64_t> seeds, int jobs) {
  std::vector<SeasonResult> out(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) { out[i] = simulate_season(mdp, strategy, config, seeds[i]); });
  return out;
}

// ---------------------------------------------------------------------------

MetricSummary summarize(std::span<const double> values) {
  return {mean(values), sample_std(values), standard_error(values)};
}

namespace {

template <class F>
std::vector<double> column(std::span<const SeasonResult> rs, F f) {
  std::vector<double> out;
  out.reserve(rs.size());
  for (const auto& r : rs) out.push_back(f(r));
  return out;
}

std::vector<double> points(std::span<const SeasonResult> rs) {
  return column(rs, [](const SeasonResult& r) { return r.total_expected_points; });
}
std::vector<double> optimal(std::span<const SeasonResult> rs) {
  return column(rs, [](const SeasonResult& r) { return double(r.optimal_team_injuries); });
}
std::vector<double> squad(std::span<const SeasonResult> rs) {
  return column(rs, [](const SeasonResult& r) { return double(r.squad_injuries); });
}

double ratio_se(const MetricSummary& ref, const MetricSummary& cand) {
  if (ref.mean == 0.0) return 0.0;
  return std::sqrt(ref.se * ref.se + cand.se * cand.se) / std::abs(ref.mean) * 100.0;
}

}  // namespace

StrategySummary summarize(Strategy strategy, std::span<const SeasonResult> results) {
  StrategySummary s;
  s.strategy = strategy;
  s.seasons = static_cast<int>(results.size());
  s.points = summarize(points(results));
  s.squad_injuries = summarize(squad(results));
  s.optimal_team_injuries = summarize(optimal(results));
  s.wage_inefficiency = summarize(column(results, [](const SeasonResult& r) { return r.wage_inefficiency; }));
  return s;
}

Comparison compare_strategies(std::span<const SeasonResult> reference, std::span<const SeasonResult> candidate) {
  if (reference.size() < 2 || candidate.size() < 2) throw ConfigError("comparisons need at least two seasons each");
  Comparison c;
  c.club = reference.front().club;
  c.risk_multiplier = reference.front().risk_multiplier;
  c.reference = summarize(reference.front().strategy, reference);
  c.candidate = summarize(candidate.front().strategy, candidate);
  c.points_change_percent = -reduction_percent(c.reference.points.mean, c.candidate.points.mean);
  c.points_change_se = ratio_se(c.reference.points, c.candidate.points);
  c.optimal_injury_reduction_percent =
      reduction_percent(c.reference.optimal_team_injuries.mean, c.candidate.optimal_team_injuries.mean);
  c.optimal_injury_reduction_se = ratio_se(c.reference.optimal_team_injuries, c.candidate.optimal_team_injuries);
  c.squad_injury_reduction_percent =
      reduction_percent(c.reference.squad_injuries.mean, c.candidate.squad_injuries.mean);
  c.wage_reduction_percent = reduction_percent(c.reference.wage_inefficiency.mean, c.candidate.wage_inefficiency.mean);
  c.points_std_reduction_percent = reduction_percent(c.reference.points.std, c.candidate.points.std);
  c.optimal_injuries_test = welch_t_test(optimal(candidate), optimal(reference));
  c.squad_injuries_test = welch_t_test(squad(candidate), squad(reference));
  c.points_test = welch_t_test(points(candidate), points(reference));
  const std::size_t paired = std::min(reference.size(), candidate.size());
  double sim = 0.0;
  for (std::size_t i = 0; i < paired; ++i) {
    std::vector<Lineup> a, b;
    for (const auto& gw : reference[i].per_gameweek) a.push_back(gw.lineup);
    for (const auto& gw : candidate[i].per_gameweek) b.push_back(gw.lineup);
    sim += team_similarity(a, b);
  }
  c.similarity_percent = sim / static_cast<double>(paired);
  return c;
}

// ---------------------------------------------------------------------------

InjuryCountValidation injury_count_validation(const InjuryModel& model, const DatasetBundle& bundle) {
  InjuryCountValidation v;
  std::vector<double> expected, actual;
  double pct = 0.0;
  for (const ClubId& club : bundle.clubs()) {
    ClubInjuryCount c{club, 0.0, 0};
    for (const auto& row : injury_training_rows(bundle, club)) {
      c.expected += predict_injury_prob(model, row.factors, row.player);
      c.actual += row.injured ? 1 : 0;
    }
    expected.push_back(c.expected);
    actual.push_back(c.actual);
    pct += std::abs(c.expected - c.actual) / std::max(c.actual, 1) * 100.0;
    v.clubs.push_back(std::move(c));
  }
  if (v.clubs.size() >= 2) v.pearson_r = pearson(expected, actual);
  if (!v.clubs.empty()) v.mean_abs_percent_diff = pct / static_cast<double>(v.clubs.size());
  return v;
}

CaseStudy player_case_study(const Season& season, std::span<const SeasonResult> results, const PlayerId& player,
                            std::size_t window) {
  const auto idx = season.index_of(player);
  if (!idx) throw ReferenceError(fmt::format("club '{}' has no player '{}'", season.club(), player));
  if (window == 0) throw ConfigError("rolling window must be at least 1");
  CaseStudy study;
  study.player = player;
  study.window = window;
  std::size_t games = results.empty() ? 0 : results.front().per_gameweek.size();
  std::vector<std::vector<double>> rolled;
  for (const auto& r : results) {
    if (r.per_gameweek.size() != games) throw ConfigError("case study results cover different seasons");
    study.strategies.push_back(r.strategy);
    std::vector<double> theta;
    for (const auto& gw : r.per_gameweek) theta.push_back(gw.injury_probs[*idx]);
    rolled.push_back(rolling_mean(theta, window));
  }
  for (std::size_t g = 0; g < games; ++g) {
    CaseStudyRow row;
    row.gameweek = static_cast<int>(g) + 1;
    for (std::size_t k = 0; k < results.size(); ++k) {
      const auto& gw = results[k].per_gameweek[g];
      row.theta.push_back(gw.injury_probs[*idx]);
      row.rolling.push_back(rolled[k][g]);
      row.played.push_back(gw.lineup.contains(*idx));
      row.available.push_back(gw.unavailable[*idx] == 0);
    }
    study.rows.push_back(std::move(row));
  }
  return study;
}

// ---------------------------------------------------------------------------

nlohmann::json to_json(const SeasonResult& r, const Season& season) {
  nlohmann::json gws = nlohmann::json::array();
  for (const auto& gw : r.per_gameweek) {
    nlohmann::json injuries = nlohmann::json::array();
    for (const auto& inj : gw.injuries)
      injuries.push_back({{"player", season.player(inj.player).id}, {"days", inj.days}, {"games_out", inj.games_out}});
    nlohmann::json theta;
    for (std::size_t i = 0; i < gw.injury_probs.size(); ++i)
      theta[season.player(static_cast<PlayerIndex>(i)).id] = gw.injury_probs[i];
    gws.push_back({{"gameweek", gw.gameweek},
                   {"day", gw.day},
                   {"opponent", gw.opponent},
                   {"home", gw.home},
                   {"lineup", lineup_ids(gw.lineup, season)},
                   {"reward", gw.reward},
                   {"injuries", injuries},
                   {"injury_probs", theta},
                   {"fallback", gw.fallback}});
  }
  return {{"club", r.club},
          {"strategy", std::string(to_string(r.strategy))},
          {"seed", r.seed},
          {"risk_multiplier", r.risk_multiplier},
          {"total_expected_points", r.total_expected_points},
          {"squad_injuries", r.squad_injuries},
          {"optimal_team_injuries", r.optimal_team_injuries},
          {"wage_inefficiency", r.wage_inefficiency},
          {"fallback_gameweeks", r.fallback_gameweeks},
          {"per_gameweek", gws}};
}

namespace {

nlohmann::json to_json(const MetricSummary& m) { return {{"mean", m.mean}, {"std", m.std}, {"se", m.se}}; }

nlohmann::json to_json(const StrategySummary& s) {
  return {{"strategy", std::string(to_string(s.strategy))},
          {"seasons", s.seasons},
          {"expected_points", to_json(s.points)},
          {"squad_injuries", to_json(s.squad_injuries)},
          {"optimal_team_injuries", to_json(s.optimal_team_injuries)},
          {"wage_inefficiency", to_json(s.wage_inefficiency)}};
}

nlohmann::json to_json(const WelchResult& w) {
  return {{"t", w.t}, {"df", w.df}, {"p_two_sided", w.p_two_sided}, {"p_less", w.p_less}};
}

}  // namespace

nlohmann::json to_json(const Comparison& c) {
  return {{"club", c.club},
          {"risk_multiplier", c.risk_multiplier},
          {"reference", to_json(c.reference)},
          {"candidate", to_json(c.candidate)},
          {"points_change_percent", c.points_change_percent},
          {"points_change_se", c.points_change_se},
          {"optimal_injury_reduction_percent", c.optimal_injury_reduction_percent},
          {"optimal_injury_reduction_se", c.optimal_injury_reduction_se},
          {"squad_injury_reduction_percent", c.squad_injury_reduction_percent},
          {"wage_reduction_percent", c.wage_reduction_percent},
          {"points_std_reduction_percent", c.points_std_reduction_percent},
          {"similarity_percent", c.similarity_percent},
          {"optimal_injuries_test", to_json(c.optimal_injuries_test)},
          {"squad_injuries_test", to_json(c.squad_injuries_test)},
          {"points_test", to_json(c.points_test)}};
}

std::string comparison_csv(std::span<const Comparison> rows) {
  std::ostringstream out;
  out << "club,strategy,risk_multiplier,seasons,expected_points,std,se,squad_injuries,optimal_team_injuries,"
         "wage_inefficiency,dec_percent,dec_se,p_value\n";
  for (const auto& c : rows) {
    for (const StrategySummary* s : {&c.reference, &c.candidate}) {
      const bool cand = s == &c.candidate;
      out << c.club << ',' << to_string(s->strategy) << ',' << num(c.risk_multiplier) << ',' << s->seasons << ','
          << num(s->points.mean) << ',' << num(s->points.std) << ',' << num(s->points.se) << ','
          << num(s->squad_injuries.mean) << ',' << num(s->optimal_team_injuries.mean) << ','
          << num(s->wage_inefficiency.mean) << ',' << (cand ? num(c.optimal_injury_reduction_percent) : "") << ','
          << (cand ? num(c.optimal_injury_reduction_se) : "") << ','
          << (cand ? num(c.optimal_injuries_test.p_two_sided) : "") << '\n';
    }
  }
  return out.str();
}

std::string case_study_csv(const CaseStudy& study) {
  std::ostringstream out;
  out << "gameweek";
  for (Strategy s : study.strategies) {
    const auto n = to_string(s);
    out << ',' << n << "_theta," << n << "_rolling," << n << "_played," << n << "_available";
  }
  out << '\n';
  for (const auto& row : study.rows) {
    out << row.gameweek;
    for (std::size_t k = 0; k < study.strategies.size(); ++k)
      out << ',' << num(row.theta[k]) << ',' << num(row.rolling[k]) << ',' << (row.played[k] ? 1 : 0) << ','
          << (row.available[k] ? 1 : 0);
    out << '\n';
  }
  return out.str();
}

std::string injury_validation_csv(const InjuryCountValidation& v) {
  std::ostringstream out;
  out << "club,expected,actual\n";
  for (const auto& c : v.clubs) out << c.club << ',' << num(c.expected) << ',' << c.actual << '\n';
  return out.str();
}

}  // namespace squadplan
