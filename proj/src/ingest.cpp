#include "squadplan/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace squadplan {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Bundle views
// ---------------------------------------------------------------------------

std::vector<ClubId> DatasetBundle::clubs() const {
  std::set<ClubId> ids;
  for (const auto& p : players) ids.insert(p.club);
  return {ids.begin(), ids.end()};
}

bool DatasetBundle::has_club(const ClubId& club) const {
  return std::any_of(players.begin(), players.end(), [&](const Player& p) { return p.club == club; });
}

double DatasetBundle::club_strength(const ClubId& club) const {
  double total = 0.0;
  int games = 0;
  for (const auto& r : results) {
    if (r.home_club == club) {
      total += r.home_value;
      ++games;
    } else if (r.away_club == club) {
      total += r.away_value;
      ++games;
    }
  }
  if (games > 0) return total / games;

  std::array<std::vector<double>, kRoleCount> skills;
  for (const auto& p : players)
    if (p.club == club) skills[role_slot(p.role)].push_back(p.skill);
  for (auto& s : skills) std::sort(s.begin(), s.end(), std::greater<>());
  auto it = formations.find(club);
  const Formation f = it == formations.end() ? Formation{} : it->second;
  double value = 0.0;
  for (Role r : kRoles) {
    const auto& s = skills[role_slot(r)];
    const auto n = std::min<std::size_t>(s.size(), static_cast<std::size_t>(f.count(r)));
    for (std::size_t i = 0; i < n; ++i) value += s[i];
  }
  return value;
}

Season DatasetBundle::season(const ClubId& club) const {
  if (!has_club(club)) throw ReferenceError("unknown club '" + club + "'");
  std::vector<LeagueFixture> mine;
  for (const auto& f : fixtures)
    if (f.home_club == club || f.away_club == club) mine.push_back(f);
  std::stable_sort(mine.begin(), mine.end(),
                   [](const LeagueFixture& a, const LeagueFixture& b) { return a.timestep < b.timestep; });
  std::vector<Fixture> out;
  for (std::size_t i = 0; i < mine.size(); ++i) {
    Fixture f;
    f.index = static_cast<int>(i) + 1;
    f.timestep = mine[i].timestep;
    f.is_home = mine[i].home_club == club;
    f.opponent_id = f.is_home ? mine[i].away_club : mine[i].home_club;
    f.opponent_strength = club_strength(f.opponent_id);
    out.push_back(std::move(f));
  }
  std::vector<Player> squad;
  for (const auto& p : players)
    if (p.club == club) squad.push_back(p);
  FormationConstraint constraint;
  if (auto it = formations.find(club); it != formations.end()) constraint.preferred = it->second;
  return Season(club, std::move(out), std::move(squad), constraint);
}

std::optional<Lineup> DatasetBundle::recorded_lineup(const Season& season, int fixture_index) const {
  for (const auto& l : lineups) {
    if (l.club != season.club() || l.fixture_index != fixture_index) continue;
    std::vector<PlayerIndex> idx;
    for (const auto& id : l.players) {
      auto i = season.index_of(id);
      if (!i) throw ReferenceError("recorded lineup names unknown player '" + id + "'");
      idx.push_back(*i);
    }
    return Lineup(std::move(idx));
  }
  return std::nullopt;
}

BundleFormat parse_bundle_format(std::string_view text) {
  if (text == "csv") return BundleFormat::csv;
  if (text == "json") return BundleFormat::json;
  throw ConfigError("unknown bundle format '" + std::string(text) + "' (expected csv or json)");
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

namespace {

struct CsvRow {
  int line = 0;
  std::vector<std::string> cells;
};

struct CsvTable {
  std::string file;
  std::vector<std::string> header;
  std::vector<CsvRow> rows;
};

std::vector<std::string> split_csv_line(const std::string& line, const std::string& file, int lineno) {
  std::vector<std::string> out;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += ch;
      }
    } else if (ch == '"' && cell.empty()) {
      quoted = true;
    } else if (ch == ',') {
      out.push_back(std::move(cell));
      cell.clear();
    } else {
      cell += ch;
    }
  }
  if (quoted) throw ParseError(file + ":" + std::to_string(lineno) + ": unterminated quoted field");
  out.push_back(std::move(cell));
  return out;
}

std::string join(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
  return s;
}

CsvTable read_csv(const fs::path& path, const std::vector<std::string>& expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open " + path.string());
  CsvTable t;
  t.file = path.filename().string();
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (line.empty()) continue;
    auto cells = split_csv_line(line, t.file, lineno);
    if (!have_header) {
      if (cells != expected)
        throw ParseError(t.file + ":" + std::to_string(lineno) + ": expected header '" + join(expected) + "', got '" +
                         line + "'");
      t.header = std::move(cells);
      have_header = true;
      continue;
    }
    if (cells.size() != expected.size())
      throw ParseError(t.file + ":" + std::to_string(lineno) + ": expected " + std::to_string(expected.size()) +
                       " columns, got " + std::to_string(cells.size()));
    t.rows.push_back({lineno, std::move(cells)});
  }
  if (!have_header) throw ParseError(t.file + ": missing header row");
  return t;
}

class RowReader {
 public:
  RowReader(const CsvTable& t, const CsvRow& r) : t_(t), r_(r) {}

  const std::string& text(std::size_t col) const { return r_.cells[col]; }

  std::string nonempty(std::size_t col) const {
    if (r_.cells[col].empty()) fail(col, "value is required");
    return r_.cells[col];
  }

  double real(std::size_t col) const {
    const std::string& s = r_.cells[col];
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v))
      fail(col, "expected a number, got '" + s + "'");
    return v;
  }

  int integer(std::size_t col) const {
    const std::string& s = r_.cells[col];
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (s.empty() || ec != std::errc() || ptr != s.data() + s.size())
      fail(col, "expected an integer, got '" + s + "'");
    return v;
  }

  bool flag(std::size_t col) const {
    const std::string& s = r_.cells[col];
    if (s == "1" || s == "true") return true;
    if (s == "0" || s == "false") return false;
    fail(col, "expected 0 or 1, got '" + s + "'");
  }

  [[noreturn]] void fail(std::size_t col, const std::string& what) const {
    throw ParseError(t_.file + ":" + std::to_string(r_.line) + ": column '" + t_.header[col] + "': " + what);
  }

 private:
  const CsvTable& t_;
  const CsvRow& r_;
};

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

const std::vector<std::string> kPlayersHeader = {"id", "name", "club", "role", "skill", "wage_weekly", "mean_distance_km",
                                                 "mean_dribbles"};
const std::vector<std::string> kInjuriesHeader = {"player_id", "start_day", "duration_days"};
const std::vector<std::string> kFixturesHeader = {"index", "timestep_day", "home_club", "away_club"};
const std::vector<std::string> kFormationsHeader = {"club", "def", "mid", "att"};
const std::vector<std::string> kWagesHeader = {"player_id", "wage_weekly"};
const std::vector<std::string> kAppearancesHeader = {"player_id", "day", "distance_km", "dribbles", "injured"};
const std::vector<std::string> kResultsHeader = {"day",        "home_club",  "away_club", "home_value",
                                                 "away_value", "home_goals", "away_goals"};
const std::vector<std::string> kLineupsHeader = {"club", "fixture_index", "player_id"};

Player* find_player(DatasetBundle& b, std::map<PlayerId, std::size_t>& index, const PlayerId& id,
                    const std::string& where) {
  auto it = index.find(id);
  if (it == index.end()) throw ReferenceError(where + ": unknown player id '" + id + "'");
  return &b.players[it->second];
}

void sort_logs(DatasetBundle& b) {
  for (auto& p : b.players) {
    std::stable_sort(p.appearances.begin(), p.appearances.end(),
                     [](const Appearance& x, const Appearance& y) { return x.day < y.day; });
  }
}

DatasetBundle load_csv(const fs::path& dir) {
  DatasetBundle b;
  std::map<PlayerId, std::size_t> index;

  const CsvTable players = read_csv(dir / "players.csv", kPlayersHeader);
  for (const auto& row : players.rows) {
    RowReader r(players, row);
    Player p;
    p.id = r.nonempty(0);
    p.name = r.text(1);
    p.club = r.nonempty(2);
    try {
      p.role = parse_role(r.text(3));
    } catch (const ParseError& e) {
      r.fail(3, e.what());
    }
    p.skill = r.real(4);
    if (p.skill < 0.0) r.fail(4, "skill must be non-negative");
    if (!r.text(5).empty()) {
      p.wage_weekly = r.real(5);
      if (*p.wage_weekly < 0.0) r.fail(5, "wage must be non-negative");
    }
    p.mean_distance_km = r.real(6);
    p.mean_dribbles = r.real(7);
    if (p.mean_distance_km < 0.0) r.fail(6, "must be non-negative");
    if (p.mean_dribbles < 0.0) r.fail(7, "must be non-negative");
    if (!index.emplace(p.id, b.players.size()).second) r.fail(0, "duplicate player id '" + p.id + "'");
    if (p.wage_weekly) b.wage_table[p.id] = *p.wage_weekly;
    b.players.push_back(std::move(p));
  }

  const CsvTable injuries = read_csv(dir / "injuries.csv", kInjuriesHeader);
  for (const auto& row : injuries.rows) {
    RowReader r(injuries, row);
    Player* p = find_player(b, index, r.nonempty(0), injuries.file + ":" + std::to_string(row.line));
    InjuryRecord rec{r.integer(1), r.integer(2)};
    if (rec.duration_days < 0) r.fail(2, "duration must be non-negative");
    p->injury_history.push_back(rec);
  }

  const CsvTable fixtures = read_csv(dir / "fixtures.csv", kFixturesHeader);
  for (const auto& row : fixtures.rows) {
    RowReader r(fixtures, row);
    LeagueFixture f{r.integer(0), r.integer(1), r.nonempty(2), r.nonempty(3)};
    if (f.index < 1) r.fail(0, "index must be at least 1");
    if (f.timestep < 0) r.fail(1, "timestep must be non-negative");
    b.fixtures.push_back(std::move(f));
  }

  const CsvTable formations = read_csv(dir / "formations.csv", kFormationsHeader);
  for (const auto& row : formations.rows) {
    RowReader r(formations, row);
    const ClubId club = r.nonempty(0);
    if (!b.formations.emplace(club, Formation{r.integer(1), r.integer(2), r.integer(3)}).second)
      r.fail(0, "duplicate formation for club '" + club + "'");
  }

  if (fs::exists(dir / "wages.csv")) {
    const CsvTable wages = read_csv(dir / "wages.csv", kWagesHeader);
    for (const auto& row : wages.rows) {
      RowReader r(wages, row);
      Player* p = find_player(b, index, r.nonempty(0), wages.file + ":" + std::to_string(row.line));
      const double w = r.real(1);
      if (w < 0.0) r.fail(1, "wage must be non-negative");
      p->wage_weekly = w;
      b.wage_table[p->id] = w;
    }
  }
  if (fs::exists(dir / "appearances.csv")) {
    const CsvTable apps = read_csv(dir / "appearances.csv", kAppearancesHeader);
    for (const auto& row : apps.rows) {
      RowReader r(apps, row);
      Player* p = find_player(b, index, r.nonempty(0), apps.file + ":" + std::to_string(row.line));
      Appearance a{r.integer(1), r.real(2), r.real(3), r.flag(4)};
      if (a.distance_km < 0.0) r.fail(2, "must be non-negative");
      if (a.dribbles < 0.0) r.fail(3, "must be non-negative");
      p->appearances.push_back(a);
    }
  }
  if (fs::exists(dir / "results.csv")) {
    const CsvTable results = read_csv(dir / "results.csv", kResultsHeader);
    for (const auto& row : results.rows) {
      RowReader r(results, row);
      HistoricalResult h{r.integer(0), r.nonempty(1), r.nonempty(2), r.real(3), r.real(4), r.integer(5), r.integer(6)};
      if (h.home_goals < 0) r.fail(5, "goals must be non-negative");
      if (h.away_goals < 0) r.fail(6, "goals must be non-negative");
      b.results.push_back(std::move(h));
    }
  }
  if (fs::exists(dir / "lineups.csv")) {
    const CsvTable lineups = read_csv(dir / "lineups.csv", kLineupsHeader);
    for (const auto& row : lineups.rows) {
      RowReader r(lineups, row);
      const ClubId club = r.nonempty(0);
      const int fixture = r.integer(1);
      auto it = std::find_if(b.lineups.begin(), b.lineups.end(), [&](const RecordedLineup& l) {
        return l.club == club && l.fixture_index == fixture;
      });
      if (it == b.lineups.end()) {
        b.lineups.push_back({club, fixture, {}});
        it = b.lineups.end() - 1;
      }
      it->players.push_back(r.nonempty(2));
    }
  }
  sort_logs(b);
  return b;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << text;
}

void write_csv(const DatasetBundle& b, const fs::path& dir) {
  std::ostringstream players, injuries, fixtures, formations, apps, results, lineups;
  players << join(kPlayersHeader) << '\n';
  injuries << join(kInjuriesHeader) << '\n';
  apps << join(kAppearancesHeader) << '\n';
  for (const auto& p : b.players) {
    std::optional<double> wage = p.wage_weekly;
    if (auto it = b.wage_table.find(p.id); it != b.wage_table.end()) wage = it->second;
    players << quote(p.id) << ',' << quote(p.name) << ',' << quote(p.club) << ',' << to_string(p.role) << ','
            << fmt(p.skill) << ',' << (wage ? fmt(*wage) : "") << ',' << fmt(p.mean_distance_km) << ','
            << fmt(p.mean_dribbles) << '\n';
    for (const auto& rec : p.injury_history)
      injuries << quote(p.id) << ',' << rec.start_day << ',' << rec.duration_days << '\n';
    for (const auto& a : p.appearances)
      apps << quote(p.id) << ',' << a.day << ',' << fmt(a.distance_km) << ',' << fmt(a.dribbles) << ','
           << (a.injured ? 1 : 0) << '\n';
  }
  fixtures << join(kFixturesHeader) << '\n';
  for (const auto& f : b.fixtures)
    fixtures << f.index << ',' << f.timestep << ',' << quote(f.home_club) << ',' << quote(f.away_club) << '\n';
  formations << join(kFormationsHeader) << '\n';
  for (const auto& [club, f] : b.formations)
    formations << quote(club) << ',' << f.def << ',' << f.mid << ',' << f.att << '\n';

  fs::create_directories(dir);
  write_text(dir / "players.csv", players.str());
  write_text(dir / "injuries.csv", injuries.str());
  write_text(dir / "fixtures.csv", fixtures.str());
  write_text(dir / "formations.csv", formations.str());
  if (std::any_of(b.players.begin(), b.players.end(), [](const Player& p) { return !p.appearances.empty(); }))
    write_text(dir / "appearances.csv", apps.str());
  if (!b.results.empty()) {
    results << join(kResultsHeader) << '\n';
    for (const auto& r : b.results)
      results << r.day << ',' << quote(r.home_club) << ',' << quote(r.away_club) << ',' << fmt(r.home_value) << ','
              << fmt(r.away_value) << ',' << r.home_goals << ',' << r.away_goals << '\n';
    write_text(dir / "results.csv", results.str());
  }
  if (!b.lineups.empty()) {
    lineups << join(kLineupsHeader) << '\n';
    for (const auto& l : b.lineups)
      for (const auto& id : l.players) lineups << quote(l.club) << ',' << l.fixture_index << ',' << quote(id) << '\n';
    write_text(dir / "lineups.csv", lineups.str());
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// JSON
// ---------------------------------------------------------------------------

json to_json(const DatasetBundle& b) {
  json players = json::array(), injuries = json::array(), apps = json::array();
  for (const auto& p : b.players) {
    std::optional<double> wage = p.wage_weekly;
    if (auto it = b.wage_table.find(p.id); it != b.wage_table.end()) wage = it->second;
    players.push_back({{"id", p.id},
                       {"name", p.name},
                       {"club", p.club},
                       {"role", std::string(to_string(p.role))},
                       {"skill", p.skill},
                       {"wage_weekly", wage ? json(*wage) : json(nullptr)},
                       {"mean_distance_km", p.mean_distance_km},
                       {"mean_dribbles", p.mean_dribbles}});
    for (const auto& r : p.injury_history)
      injuries.push_back({{"player_id", p.id}, {"start_day", r.start_day}, {"duration_days", r.duration_days}});
    for (const auto& a : p.appearances)
      apps.push_back({{"player_id", p.id},
                      {"day", a.day},
                      {"distance_km", a.distance_km},
                      {"dribbles", a.dribbles},
                      {"injured", a.injured}});
  }
  json fixtures = json::array();
  for (const auto& f : b.fixtures)
    fixtures.push_back({{"index", f.index}, {"timestep_day", f.timestep}, {"home_club", f.home_club}, {"away_club", f.away_club}});
  json formations = json::array();
  for (const auto& [club, f] : b.formations)
    formations.push_back({{"club", club}, {"def", f.def}, {"mid", f.mid}, {"att", f.att}});
  json results = json::array();
  for (const auto& r : b.results)
    results.push_back({{"day", r.day},
                       {"home_club", r.home_club},
                       {"away_club", r.away_club},
                       {"home_value", r.home_value},
                       {"away_value", r.away_value},
                       {"home_goals", r.home_goals},
                       {"away_goals", r.away_goals}});
  json lineups = json::array();
  for (const auto& l : b.lineups)
    for (const auto& id : l.players)
      lineups.push_back({{"club", l.club}, {"fixture_index", l.fixture_index}, {"player_id", id}});
  return {{"players", players},       {"injuries", injuries}, {"fixtures", fixtures}, {"formations", formations},
          {"appearances", apps},      {"results", results},   {"lineups", lineups}};
}

DatasetBundle bundle_from_json(const json& j) {
  DatasetBundle b;
  std::map<PlayerId, std::size_t> index;
  auto where = [](const char* table, std::size_t i) { return std::string(table) + "[" + std::to_string(i) + "]"; };
  auto rows = [&](const char* key) -> const json& {
    static const json empty = json::array();
    auto it = j.find(key);
    return it == j.end() ? empty : *it;
  };
  try {
    const json& players = j.at("players");
    for (std::size_t i = 0; i < players.size(); ++i) {
      const json& r = players[i];
      Player p;
      p.id = r.at("id").get<std::string>();
      p.name = r.value("name", "");
      p.club = r.at("club").get<std::string>();
      p.role = parse_role(r.at("role").get<std::string>());
      p.skill = r.at("skill").get<double>();
      if (!std::isfinite(p.skill) || p.skill < 0.0) throw ParseError(where("players", i) + ".skill must be non-negative");
      if (r.contains("wage_weekly") && !r.at("wage_weekly").is_null()) {
        p.wage_weekly = r.at("wage_weekly").get<double>();
        b.wage_table[p.id] = *p.wage_weekly;
      }
      p.mean_distance_km = r.at("mean_distance_km").get<double>();
      p.mean_dribbles = r.at("mean_dribbles").get<double>();
      if (!index.emplace(p.id, b.players.size()).second)
        throw ParseError(where("players", i) + ": duplicate player id '" + p.id + "'");
      b.players.push_back(std::move(p));
    }
    const json& injuries = j.at("injuries");
    for (std::size_t i = 0; i < injuries.size(); ++i) {
      const json& r = injuries[i];
      Player* p = find_player(b, index, r.at("player_id").get<std::string>(), where("injuries", i));
      InjuryRecord rec{r.at("start_day").get<int>(), r.at("duration_days").get<int>()};
      if (rec.duration_days < 0) throw ParseError(where("injuries", i) + ".duration_days must be non-negative");
      p->injury_history.push_back(rec);
    }
    for (const json& r : j.at("fixtures"))
      b.fixtures.push_back({r.at("index").get<int>(), r.at("timestep_day").get<int>(),
                            r.at("home_club").get<std::string>(), r.at("away_club").get<std::string>()});
    for (const json& r : j.at("formations")) {
      const auto club = r.at("club").get<std::string>();
      if (!b.formations.emplace(club, Formation{r.at("def").get<int>(), r.at("mid").get<int>(), r.at("att").get<int>()}).second)
        throw ParseError("duplicate formation for club '" + club + "'");
    }
    const json& wages = rows("wages");
    for (std::size_t i = 0; i < wages.size(); ++i) {
      Player* p = find_player(b, index, wages[i].at("player_id").get<std::string>(), where("wages", i));
      p->wage_weekly = wages[i].at("wage_weekly").get<double>();
      b.wage_table[p->id] = *p->wage_weekly;
    }
    const json& apps = rows("appearances");
    for (std::size_t i = 0; i < apps.size(); ++i) {
      const json& r = apps[i];
      Player* p = find_player(b, index, r.at("player_id").get<std::string>(), where("appearances", i));
      p->appearances.push_back({r.at("day").get<int>(), r.at("distance_km").get<double>(), r.at("dribbles").get<double>(),
                                r.at("injured").get<bool>()});
    }
    for (const json& r : rows("results"))
      b.results.push_back({r.at("day").get<int>(), r.at("home_club").get<std::string>(),
                           r.at("away_club").get<std::string>(), r.at("home_value").get<double>(),
                           r.at("away_value").get<double>(), r.at("home_goals").get<int>(), r.at("away_goals").get<int>()});
    for (const json& r : rows("lineups")) {
      const auto club = r.at("club").get<std::string>();
      const int fixture = r.at("fixture_index").get<int>();
      auto it = std::find_if(b.lineups.begin(), b.lineups.end(),
                             [&](const RecordedLineup& l) { return l.club == club && l.fixture_index == fixture; });
      if (it == b.lineups.end()) {
        b.lineups.push_back({club, fixture, {}});
        it = b.lineups.end() - 1;
      }
      it->players.push_back(r.at("player_id").get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bundle.json: ") + e.what());
  }
  sort_logs(b);
  return b;
}

// ---------------------------------------------------------------------------
// Validation and entry points
// ---------------------------------------------------------------------------

void validate_bundle(const DatasetBundle& b) {
  std::set<PlayerId> ids;
  std::set<ClubId> clubs;
  for (const auto& p : b.players) {
    if (!ids.insert(p.id).second) throw ConfigError("duplicate player id '" + p.id + "'");
    if (!std::isfinite(p.skill) || p.skill < 0.0) throw ConfigError("player '" + p.id + "' has an invalid skill");
    for (const auto& r : p.injury_history)
      if (r.duration_days < 0) throw ConfigError("player '" + p.id + "' has a negative injury duration");
    clubs.insert(p.club);
  }
  for (const auto& [id, wage] : b.wage_table) {
    if (!ids.count(id)) throw ReferenceError("wage entry for unknown player '" + id + "'");
    if (!std::isfinite(wage) || wage < 0.0) throw ConfigError("invalid wage for player '" + id + "'");
  }
  auto known_club = [&](const ClubId& c, const std::string& where) {
    if (!clubs.count(c)) throw ReferenceError(where + " refers to unknown club '" + c + "'");
  };
  std::map<ClubId, int> last_day;
  for (const auto& f : b.fixtures) {
    const std::string where = "fixture " + std::to_string(f.index);
    known_club(f.home_club, where);
    known_club(f.away_club, where);
    if (f.home_club == f.away_club) throw ConfigError(where + " has the same club on both sides");
    if (f.timestep < 0) throw ConfigError(where + " has a negative timestep");
  }
  std::vector<LeagueFixture> ordered = b.fixtures;
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const LeagueFixture& x, const LeagueFixture& y) { return x.timestep < y.timestep; });
  for (const auto& f : ordered) {
    for (const ClubId& c : {f.home_club, f.away_club}) {
      auto it = last_day.find(c);
      if (it != last_day.end() && it->second >= f.timestep)
        throw ConfigError("club '" + c + "' has two fixtures on day " + std::to_string(f.timestep));
      last_day[c] = f.timestep;
    }
  }
  for (const auto& [club, f] : b.formations) {
    known_club(club, "formation");
    if (!f.is_legal())
      throw ConfigError("formation for club '" + club + "' (" + std::to_string(f.def) + "-" + std::to_string(f.mid) +
                        "-" + std::to_string(f.att) + ") violates the role bounds");
  }
  for (const auto& r : b.results) {
    known_club(r.home_club, "result on day " + std::to_string(r.day));
    known_club(r.away_club, "result on day " + std::to_string(r.day));
  }
  for (const auto& l : b.lineups) {
    known_club(l.club, "recorded lineup");
    for (const auto& id : l.players) {
      auto it = std::find_if(b.players.begin(), b.players.end(), [&](const Player& p) { return p.id == id; });
      if (it == b.players.end() || it->club != l.club)
        throw ReferenceError("recorded lineup for club '" + l.club + "' names unknown player '" + id + "'");
    }
  }
}

DatasetBundle load_bundle(const fs::path& dir, BundleFormat format) {
  DatasetBundle b;
  if (format == BundleFormat::csv) {
    b = load_csv(dir);
  } else {
    const fs::path file = fs::is_directory(dir) ? dir / "bundle.json" : dir;
    std::ifstream in(file);
    if (!in) throw ParseError("cannot open " + file.string());
    json j;
    try {
      in >> j;
    } catch (const json::exception& e) {
      throw ParseError(file.filename().string() + ": " + e.what());
    }
    b = bundle_from_json(j);
  }
  validate_bundle(b);
  return b;
}

void write_bundle(const DatasetBundle& b, const fs::path& dir, BundleFormat format) {
  if (format == BundleFormat::csv) {
    write_csv(b, dir);
    return;
  }
  fs::create_directories(dir);
  write_text(dir / "bundle.json", to_json(b).dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// Training views
// ---------------------------------------------------------------------------

std::vector<InjuryExample> injury_training_rows(const DatasetBundle& bundle, const ClubId& club) {
  std::vector<InjuryExample> rows;
  for (const auto& p : bundle.players) {
    if (!club.empty() && p.club != club) continue;
    std::span<const Appearance> log = p.appearances;
    for (std::size_t k = 0; k < log.size(); ++k) {
      rows.push_back({p.id, compute_risk_factors(p, log.first(k), log[k].day), log[k].injured});
    }
  }
  return rows;
}

std::vector<InjuryExample> injury_training_rows(const DatasetBundle& bundle) {
  return injury_training_rows(bundle, ClubId{});
}

std::vector<GameRecord> match_training_games(const DatasetBundle& bundle) {
  std::vector<GameRecord> games;
  games.reserve(bundle.results.size());
  for (const auto& r : bundle.results) games.push_back({r.home_value, r.away_value, r.home_goals, r.away_goals});
  return games;
}

std::vector<InjuryRecord> all_injury_records(const DatasetBundle& bundle) {
  std::vector<InjuryRecord> out;
  for (const auto& p : bundle.players) out.insert(out.end(), p.injury_history.begin(), p.injury_history.end());
  return out;
}

}  // namespace squadplan
