#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace squadplan {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input file (carries row/column in the message).
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A record points at an id that does not exist.
class ReferenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingError : public Error {
 public:
  using Error::Error;
};

class FitError : public Error {
 public:
  using Error::Error;
};

/// Not enough available players to fill a formation.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

class InvalidActionError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class InstanceTooLargeError : public Error {
 public:
  using Error::Error;
};

// ---------------------------------------------------------------------------
// Players, fixtures, seasons
// ---------------------------------------------------------------------------

enum class Role : std::uint8_t { GK = 0, DEF = 1, MID = 2, ATT = 3 };
inline constexpr std::size_t kRoleCount = 4;
inline constexpr std::array<Role, kRoleCount> kRoles = {Role::GK, Role::DEF, Role::MID, Role::ATT};

std::string_view to_string(Role role);
Role parse_role(std::string_view text);

inline constexpr std::size_t role_slot(Role r) { return static_cast<std::size_t>(r); }

using PlayerId = std::string;
using ClubId = std::string;
/// Position of a player inside Season::squad. Squads are sorted by id, so
/// ascending index order is ascending id order.
using PlayerIndex = std::uint16_t;

inline constexpr std::size_t kLineupSize = 11;

struct InjuryRecord {
  int start_day = 0;
  int duration_days = 0;

  bool operator==(const InjuryRecord&) const = default;
};

/// One past game played by a player.
struct Appearance {
  int day = 0;
  double distance_km = 0.0;
  double dribbles = 0.0;
  bool injured = false;

  bool operator==(const Appearance&) const = default;
};

struct Player {
  PlayerId id;
  std::string name;
  ClubId club;
  Role role = Role::MID;
  double skill = 0.0;  // accumulated VAEP
  std::optional<double> wage_weekly;
  double mean_distance_km = 0.0;
  double mean_dribbles = 0.0;
  double age_years = 0.0;  // 0 when unknown
  std::vector<InjuryRecord> injury_history;
  std::vector<Appearance> appearances;  // sorted by day

  bool operator==(const Player&) const = default;
};

struct Fixture {
  int index = 1;     // 1-based position in the club's season
  int timestep = 0;  // days since the first fixture
  ClubId opponent_id;
  double opponent_strength = 0.0;
  bool is_home = true;

  bool operator==(const Fixture&) const = default;
};

/// Outfield counts; every formation has exactly one goalkeeper.
struct Formation {
  int def = 4;
  int mid = 4;
  int att = 2;

  int count(Role r) const;
  bool is_legal() const;
  bool operator==(const Formation&) const = default;
};

inline constexpr int kMinDef = 3, kMaxDef = 5;
inline constexpr int kMinMid = 3, kMaxMid = 5;
inline constexpr int kMinAtt = 1, kMaxAtt = 3;

/// All formations allowed by the role bounds, ordered by (def, mid, att).
std::vector<Formation> legal_formations();

struct FormationConstraint {
  std::optional<Formation> preferred;
};

/// A club's season: its ordered fixtures and its squad (sorted by id).
class Season {
 public:
  Season() = default;
  Season(ClubId club, std::vector<Fixture> fixtures, std::vector<Player> squad,
         FormationConstraint formation);

  const ClubId& club() const { return club_; }
  std::span<const Fixture> fixtures() const { return fixtures_; }
  std::span<const Player> squad() const { return squad_; }
  const Player& player(PlayerIndex i) const { return squad_.at(i); }
  std::size_t size() const { return fixtures_.size(); }
  const FormationConstraint& formation() const { return formation_; }

  std::optional<PlayerIndex> index_of(std::string_view id) const;
  /// Players of one role ordered by skill descending, ties by ascending id.
  std::span<const PlayerIndex> by_skill(Role r) const { return by_skill_[role_slot(r)]; }

 private:
  ClubId club_;
  std::vector<Fixture> fixtures_;
  std::vector<Player> squad_;
  FormationConstraint formation_;
  std::array<std::vector<PlayerIndex>, kRoleCount> by_skill_;
};

/// Eleven (or, in a flagged emergency, fewer) squad indices, sorted ascending.
struct Lineup {
  std::vector<PlayerIndex> players;

  Lineup() = default;
  explicit Lineup(std::vector<PlayerIndex> p);

  bool contains(PlayerIndex i) const;
  std::size_t size() const { return players.size(); }
  auto operator<=>(const Lineup&) const = default;
  bool operator==(const Lineup&) const = default;
};

std::vector<PlayerId> lineup_ids(const Lineup& lineup, const Season& season);

using UnavailabilityVector = std::vector<int>;

/// Number of fixtures with start_day < timestep <= start_day + duration_days.
int injury_period_to_game_count(int start_day, int duration_days, std::span<const Fixture> fixtures);

UnavailabilityVector decrement_unavailability(UnavailabilityVector l);

// ---------------------------------------------------------------------------
// Injury risk factors and MDP state
// ---------------------------------------------------------------------------

struct RiskFactors {
  double acute_workload = 0.0;       // km, trailing 7 days
  double chronic_workload = 0.0;     // km/week, trailing 28 days
  double acute_chronic_ratio = 0.0;
  double past_injury_count = 0.0;
  double career_days_injured = 0.0;
  double distance_covered_recent = 0.0;  // trailing 3 appearances
  double dribbles_recent = 0.0;
  double age_years = 0.0;

  bool operator==(const RiskFactors&) const = default;
};

struct PlayerStatus {
  RiskFactors factors;
  double injury_prob = 0.0;
  int unavailable = 0;  // games still to miss
  int past_injuries = 0;
  int career_days_injured = 0;
  std::vector<Appearance> recent;  // trimmed to what the risk windows need

  bool operator==(const PlayerStatus&) const = default;
};

/// Decision context before a game: the fixture position t (0-based; equal to
/// the season length once every game has been played) and per-player status.
struct MdpState {
  std::size_t fixture = 0;
  std::vector<PlayerStatus> players;

  std::span<const Fixture> remaining(const Season& season) const;
  UnavailabilityVector unavailability() const;
  std::vector<double> injury_probs() const;
  bool available(PlayerIndex i) const { return players[i].unavailable == 0; }

  bool operator==(const MdpState&) const = default;
};

}  // namespace squadplan
