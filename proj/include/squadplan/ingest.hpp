#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "squadplan/core.hpp"
#include "squadplan/injury.hpp"
#include "squadplan/match.hpp"

namespace squadplan {

struct LeagueFixture {
  int index = 1;  // round number
  int timestep = 0;
  ClubId home_club;
  ClubId away_club;

  bool operator==(const LeagueFixture&) const = default;
};

/// A past game with both sides' fielded team values.
struct HistoricalResult {
  int day = 0;
  ClubId home_club;
  ClubId away_club;
  double home_value = 0.0;
  double away_value = 0.0;
  int home_goals = 0;
  int away_goals = 0;

  bool operator==(const HistoricalResult&) const = default;
};

/// A manager's real selection for one of the club's season fixtures.
struct RecordedLineup {
  ClubId club;
  int fixture_index = 1;
  std::vector<PlayerId> players;

  bool operator==(const RecordedLineup&) const = default;
};

struct DatasetBundle {
  std::vector<Player> players;  // every club; carries injury history and appearances
  std::vector<LeagueFixture> fixtures;
  std::map<ClubId, Formation> formations;
  std::map<PlayerId, double> wage_table;
  std::vector<HistoricalResult> results;
  std::vector<RecordedLineup> lineups;

  std::vector<ClubId> clubs() const;
  bool has_club(const ClubId& club) const;

  /// The club's season view: its fixtures (renumbered 1..K in date order),
  /// opponent strengths, and its squad.
  Season season(const ClubId& club) const;

  /// Opponent strength: the club's mean fielded team value over `results`,
  /// or its best-eleven value when it has no recorded games.
  double club_strength(const ClubId& club) const;

  std::optional<Lineup> recorded_lineup(const Season& season, int fixture_index) const;

  bool operator==(const DatasetBundle&) const = default;
};

enum class BundleFormat { csv, json };
BundleFormat parse_bundle_format(std::string_view text);

/// Reads players.csv, injuries.csv, fixtures.csv, formations.csv and the
/// optional wages.csv, appearances.csv, results.csv, lineups.csv from `dir`
/// (or bundle.json for the json format), then validates cross-references.
DatasetBundle load_bundle(const std::filesystem::path& dir, BundleFormat format = BundleFormat::csv);
void write_bundle(const DatasetBundle& bundle, const std::filesystem::path& dir,
                  BundleFormat format = BundleFormat::csv);

/// Throws ReferenceError / ConfigError on a broken bundle.
void validate_bundle(const DatasetBundle& bundle);

nlohmann::json to_json(const DatasetBundle& bundle);
DatasetBundle bundle_from_json(const nlohmann::json& j);

// ---------------------------------------------------------------------------
// Synthetic leagues
// ---------------------------------------------------------------------------

/// Ground-truth logistic injury hazard used to generate synthetic data.
struct InjuryHazard {
  double intercept = 0.0;
  FeatureVector coefficients{};

  double probability(const RiskFactors& f) const;
  /// The same hazard as a calibrated-classifier model.
  InjuryModel as_model() const;
};

struct SynthConfig {
  std::uint64_t seed = 1;
  int n_clubs = 20;
  int squad_size = 25;
  double base_injury_rate = 0.04;
  int history_seasons = 2;
  int min_gap_days = 3;
  int max_gap_days = 7;
  double rotation_rate = 0.15;  // chance a historical starter is rested
};

struct SynthTruth {
  InjuryHazard hazard;
  MatchModel match;
  LengthDistribution lengths;
};

struct SynthResult {
  DatasetBundle bundle;
  SynthTruth truth;
};

SynthResult synth_league_with_truth(const SynthConfig& config);
DatasetBundle synth_league(std::uint64_t seed, int n_clubs, int squad_size, double base_injury_rate);

/// Injury-model training rows: one per historical appearance, features as of
/// that day from strictly earlier appearances and injuries.
std::vector<InjuryExample> injury_training_rows(const DatasetBundle& bundle);
std::vector<InjuryExample> injury_training_rows(const DatasetBundle& bundle, const ClubId& club);
std::vector<GameRecord> match_training_games(const DatasetBundle& bundle);
std::vector<InjuryRecord> all_injury_records(const DatasetBundle& bundle);

}  // namespace squadplan
