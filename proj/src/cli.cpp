#include "squadplan/cli.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <thread>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "squadplan/experiments.hpp"
#include "squadplan/service.hpp"

namespace squadplan::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string file_digest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ReferenceError(fmt::format("cannot read '{}'", file.string()));
  std::ostringstream s;
  s << in.rdbuf();
  return fmt::format("fnv1a64:{:016x}", fnv1a(s.str()));
}

json to_json(const RunManifest& m) {
  json j;
  j["command"] = m.command;
  j["config"] = m.config;
  j["seed"] = m.seed ? json(*m.seed) : json(nullptr);
  j["inputs"] = m.inputs;
  j["outputs"] = m.outputs;
  j["wall_clock_seconds"] = m.wall_clock_seconds;
  return j;
}

namespace {

class UsageError : public Error {
 public:
  using Error::Error;
};

constexpr const char* kInjuryModelFile = "injury_model.json";
constexpr const char* kLengthsFile = "injury_lengths.json";
constexpr const char* kMatchModelFile = "match_model.json";

// One option that can also come from a config file.
struct Binding {
  std::string key;  // config key, with underscores
  CLI::Option* option;
  std::function<json()> value;
};

struct Command {
  CLI::App* app = nullptr;
  std::vector<Binding> bindings;
  std::vector<std::string> required = {};

  template <class T>
  CLI::Option* add(const std::string& key, T& var, const std::string& help) {
    std::string flag = key;
    std::replace(flag.begin(), flag.end(), '_', '-');
    CLI::Option* o = app->add_option("--" + flag, var, help)->capture_default_str();
    bindings.push_back({key, o, [&var] { return json(var); }});
    return o;
  }

  // Required options may come from the config file, so they are checked after it.
  template <class T>
  CLI::Option* need(const std::string& key, T& var, const std::string& help) {
    required.push_back(key);
    return add(key, var, help + " (required)");
  }

  void check_required() const {
    for (const auto& key : required) {
      const auto it = std::find_if(bindings.begin(), bindings.end(), [&](const Binding& b) { return b.key == key; });
      const json v = it->value();
      if (v.is_null() || (v.is_string() && v.get<std::string>().empty())) {
        std::string flag = key;
        std::replace(flag.begin(), flag.end(), '_', '-');
        throw UsageError(fmt::format("{}: --{} is required", app->get_name(), flag));
      }
    }
  }

  json snapshot() const {
    json j = json::object();
    for (const auto& b : bindings) j[b.key] = b.value();
    return j;
  }

  // Fills options not given on the command line from the file.
  void apply(const json& file) {
    const json& cfg = file.contains("config") && file["config"].is_object() ? file["config"] : file;
    if (!cfg.is_object()) throw UsageError("config file must hold a JSON object");
    for (const auto& [raw, value] : cfg.items()) {
      std::string key = raw;
      std::replace(key.begin(), key.end(), '-', '_');
      auto it = std::find_if(bindings.begin(), bindings.end(), [&](const Binding& b) { return b.key == key; });
      if (it == bindings.end())
        throw UsageError(fmt::format("config key '{}' is not an option of '{}'", raw, app->get_name()));
      if (it->option->count() > 0 || value.is_null()) continue;
      it->option->clear();
      auto add = [&](const json& v) { it->option->add_result(v.is_string() ? v.get<std::string>() : v.dump()); };
      if (value.is_array())
        for (const auto& v : value) add(v);
      else
        add(value);
      it->option->run_callback();
    }
  }
};

struct Timer {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(); }
};

struct Outputs {
  fs::path dir;
  RunManifest manifest;
  Timer timer;

  void write(const std::string& name, const std::string& text) {
    fs::create_directories(dir);
    const fs::path p = dir / name;
    std::ofstream out(p, std::ios::binary);
    if (!out) throw ReferenceError(fmt::format("cannot write '{}'", p.string()));
    out << text;
    manifest.outputs.push_back(p.string());
  }

  void note_inputs(const fs::path& path) {
    if (fs::is_directory(path)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(path))
        if (e.is_regular_file() && e.path().filename().string().rfind("manifest-", 0) != 0) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) manifest.inputs[f.string()] = file_digest(f);
    } else {
      manifest.inputs[path.string()] = file_digest(path);
    }
  }

  void finish() {
    manifest.outputs.push_back((dir / manifest_name()).string());
    manifest.wall_clock_seconds = timer.seconds();
    fs::create_directories(dir);
    std::ofstream out(dir / manifest_name(), std::ios::binary);
    out << to_json(manifest).dump(2) << '\n';
  }

  std::string manifest_name() const { return fmt::format("manifest-{}.json", manifest.command); }
};

json read_json(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw ReferenceError(fmt::format("missing file '{}'", p.string()));
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(fmt::format("'{}' is not valid JSON: {}", p.string(), e.what()));
  }
}

fs::path model_file(const fs::path& dir, const char* name, const char* producer) {
  const fs::path p = dir / name;
  if (!fs::exists(p))
    throw ReferenceError(fmt::format("missing model file '{}'; run '{}' first", p.string(), producer));
  return p;
}

Models load_models(const fs::path& dir, Outputs& out) {
  Models m;
  const fs::path injury = model_file(dir, kInjuryModelFile, "train-injury");
  const fs::path lengths = model_file(dir, kLengthsFile, "train-injury");
  const fs::path match = model_file(dir, kMatchModelFile, "train-match");
  m.injury = injury_model_from_json(read_json(injury));
  m.lengths = length_distribution_from_json(read_json(lengths));
  m.match = match_model_from_json(read_json(match));
  for (const auto& p : {injury, lengths, match}) out.note_inputs(p);
  return m;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

struct DataOptions {
  std::string data;
  std::string format = "csv";

  void add(Command& c) {
    c.need("data", data, "bundle directory");
    c.add("format", format, "bundle format")->check(CLI::IsMember({"csv", "json"}));
  }
  DatasetBundle load(Outputs& out) const {
    DatasetBundle b = load_bundle(data, parse_bundle_format(format));
    out.note_inputs(data);
    return b;
  }
};

struct SearchOptions {
  int iterations = SearchConfig{}.iterations;
  double exploration = SearchConfig{}.exploration;
  double rest_penalty = 0.0;

  void add(Command& c) {
    c.add("iterations", iterations, "MCTS iterations per gameweek");
    c.add("exploration", exploration, "UCB1 exploration constant");
    c.add("rest_penalty", rest_penalty, "widening order penalty on injury probability (0 = pure expected points)");
  }
  SearchConfig config() const {
    SearchConfig s;
    s.iterations = iterations;
    s.exploration = exploration;
    s.rest_penalty = rest_penalty;
    validate(s);
    return s;
  }
};

int jobs_or_cores(int jobs) {
  return jobs > 0 ? jobs : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

std::vector<std::uint64_t> seed_range(std::uint64_t first, int count) {
  if (count < 1) throw ConfigError("--seeds must be at least 1");
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(first + static_cast<std::uint64_t>(i));
  return s;
}

ClubId pick_club(const DatasetBundle& bundle, const std::string& wanted) {
  if (wanted.empty()) {
    const auto clubs = bundle.clubs();
    if (clubs.empty()) throw ReferenceError("bundle has no clubs");
    return clubs.front();
  }
  if (!bundle.has_club(wanted)) throw ReferenceError(fmt::format("bundle has no club '{}'", wanted));
  return wanted;
}

void log(bool quiet, const std::string& line) {
  if (!quiet) std::cerr << line << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"Season lineup planning under injury risk", "squadplan"};
  app.require_subcommand(1);
  app.fallthrough();
  std::string config_path;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config file; command-line flags take precedence");
  app.add_flag("-q,--quiet", quiet, "suppress progress messages");

  // synth
  Command synth{app.add_subcommand("synth", "generate a synthetic league bundle"), {}};
  std::uint64_t synth_seed = 1;
  int clubs = 20, squad_size = 25;
  double injury_rate = 0.04;
  std::string synth_out, synth_format = "csv";
  synth.add("seed", synth_seed, "generator seed");
  synth.add("clubs", clubs, "number of clubs");
  synth.add("squad_size", squad_size, "players per club");
  synth.add("injury_rate", injury_rate, "mean injury probability per appearance");
  synth.need("out", synth_out, "output directory");
  synth.add("format", synth_format, "bundle format")->check(CLI::IsMember({"csv", "json"}));

  // train-injury
  Command ti{app.add_subcommand("train-injury", "fit the injury classifier and the injury-length distribution"), {}};
  DataOptions ti_data;
  ti_data.add(ti);
  std::string ti_model = "calibrated", ti_out;
  ti.add("model", ti_model, "classifier kind")->check(CLI::IsMember({"calibrated", "baseline"}));
  ti.need("out", ti_out, "model directory");

  // train-match
  Command tm{app.add_subcommand("train-match", "fit the Poisson match model"), {}};
  DataOptions tm_data;
  tm_data.add(tm);
  std::string tm_out;
  tm.need("out", tm_out, "model directory");

  // simulate
  Command sim{app.add_subcommand("simulate", "play whole seasons with one selection strategy"), {}};
  DataOptions sim_data;
  sim_data.add(sim);
  SearchOptions sim_search;
  sim_search.add(sim);
  std::string sim_models, sim_club, sim_strategy = "mcts", sim_out;
  std::uint64_t sim_seed = 1;
  int sim_seeds = 1, sim_jobs = 0;
  double sim_risk = 1.0;
  sim.need("models", sim_models, "model directory");
  sim.add("club", sim_club, "club id (default: first club)");
  sim.add("strategy", sim_strategy, "selection strategy")->check(CLI::IsMember({"mcts", "greedy", "replay"}));
  sim.add("seed", sim_seed, "first season seed");
  sim.add("seeds", sim_seeds, "number of consecutive seeds");
  sim.add("risk_multiplier", sim_risk, "scale applied to every injury probability");
  sim.add("jobs", sim_jobs, "worker threads (0 = all cores)");
  sim.need("out", sim_out, "output directory");

  // compare
  Command cmp{app.add_subcommand("compare", "MCTS against greedy over paired seeds"), {}};
  DataOptions cmp_data;
  cmp_data.add(cmp);
  SearchOptions cmp_search;
  cmp_search.add(cmp);
  std::string cmp_models, cmp_out;
  std::vector<std::string> cmp_clubs;
  std::vector<double> cmp_risks = {1.0};
  std::uint64_t cmp_seed = 1;
  int cmp_seeds = 100, cmp_jobs = 0;
  cmp.need("models", cmp_models, "model directory");
  cmp.add("clubs", cmp_clubs, "club ids (default: all)");
  cmp.add("risk_multiplier", cmp_risks, "one or more risk multipliers");
  cmp.add("seed", cmp_seed, "first season seed");
  cmp.add("seeds", cmp_seeds, "paired seasons per strategy");
  cmp.add("jobs", cmp_jobs, "worker threads (0 = all cores)");
  cmp.need("out", cmp_out, "output directory");

  // case-study
  Command cs{app.add_subcommand("case-study", "injury probability of one player across strategies"), {}};
  DataOptions cs_data;
  cs_data.add(cs);
  SearchOptions cs_search;
  cs_search.add(cs);
  std::string cs_models, cs_player, cs_out;
  std::vector<std::string> cs_strategies = {"mcts", "greedy"};
  std::uint64_t cs_seed = 1;
  std::size_t cs_window = 5;
  double cs_risk = 1.0;
  cs.need("models", cs_models, "model directory");
  cs.need("player", cs_player, "player id");
  cs.add("strategies", cs_strategies, "strategies to compare")->check(CLI::IsMember({"mcts", "greedy", "replay"}));
  cs.add("seed", cs_seed, "season seed");
  cs.add("window", cs_window, "rolling mean window in games");
  cs.add("risk_multiplier", cs_risk, "scale applied to every injury probability");
  cs.need("out", cs_out, "output directory");

  // serve
  Command srv{app.add_subcommand("serve", "run the planner HTTP API"), {}};
  DataOptions srv_data;
  srv_data.add(srv);
  std::string srv_models, srv_host = "127.0.0.1";
  int srv_port = 8080, srv_budget = 1000;
  srv.need("models", srv_models, "model directory");
  srv.add("host", srv_host, "bind address");
  srv.add("port", srv_port, "TCP port");
  srv.add("budget", srv_budget, "default MCTS iterations for recommendations");

  std::vector<Command*> commands = {&synth, &ti, &tm, &sim, &cmp, &cs, &srv};

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "squadplan: usage error: " << e.what() << " (see --help)\n";
    return 2;
  }

  Command* active = nullptr;
  for (Command* c : commands)
    if (c->app->parsed()) active = c;

  try {
    if (!config_path.empty()) {
      try {
        active->apply(read_json(config_path));
      } catch (const CLI::ParseError& e) {
        throw UsageError(fmt::format("config file '{}': {}", config_path, e.what()));
      }
    }
    active->check_required();
    Outputs out;
    out.manifest.command = active->app->get_name();
    out.manifest.config = active->snapshot();
    if (!config_path.empty()) out.note_inputs(config_path);

    if (active == &synth) {
      out.dir = synth_out;
      out.manifest.seed = synth_seed;
      const DatasetBundle bundle = synth_league(synth_seed, clubs, squad_size, injury_rate);
      write_bundle(bundle, synth_out, parse_bundle_format(synth_format));
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(synth_out))
        if (e.is_regular_file() && e.path().filename().string().rfind("manifest-", 0) != 0) files.push_back(e.path());
      std::sort(files.begin(), files.end());
      for (const auto& f : files) out.manifest.outputs.push_back(f.string());
      log(quiet, fmt::format("wrote a {}-club league to {}", clubs, synth_out));
    } else if (active == &ti) {
      out.dir = ti_out;
      const DatasetBundle bundle = ti_data.load(out);
      const InjuryModelKind kind =
          ti_model == "baseline" ? InjuryModelKind::heuristic_baseline : InjuryModelKind::calibrated_classifier;
      const InjuryModel model = train_injury_model(injury_training_rows(bundle), kind);
      const LengthDistribution lengths = fit_length_distribution(all_injury_records(bundle));
      out.write(kInjuryModelFile, dump(to_json(model)));
      out.write(kLengthsFile, dump(to_json(lengths)));
      const InjuryCountValidation v = injury_count_validation(model, bundle);
      out.write("injury_validation.csv", injury_validation_csv(v));
      log(quiet, fmt::format("injury model fitted in {} steps; per-club count correlation r = {:.3f}",
                             model.iterations, v.pearson_r));
    } else if (active == &tm) {
      out.dir = tm_out;
      const DatasetBundle bundle = tm_data.load(out);
      const MatchModel model = train_match_model(match_training_games(bundle));
      out.write(kMatchModelFile, dump(to_json(model)));
      log(quiet, "match model fitted");
    } else if (active == &sim) {
      out.dir = sim_out;
      out.manifest.seed = sim_seed;
      const DatasetBundle bundle = sim_data.load(out);
      Models models = load_models(sim_models, out);
      const ClubId club = pick_club(bundle, sim_club);
      const Strategy strategy = parse_strategy(sim_strategy);
      SimulationConfig cfg{sim_search.config(), sim_risk};
      const auto seeds = seed_range(sim_seed, sim_seeds);
      std::vector<SeasonResult> results(seeds.size());
      models.risk_multiplier = sim_risk;
      const Mdp mdp(bundle.season(club), models);
      parallel_for(seeds.size(), jobs_or_cores(sim_jobs), [&](std::size_t i) {
        results[i] = strategy == Strategy::replay ? simulate_season(bundle, club, strategy, models, cfg, seeds[i])
                                                  : simulate_season(mdp, strategy, cfg, seeds[i]);
      });
      json summary = json::array();
      for (const auto& r : results) {
        out.write(fmt::format("season-{}-{}-{}.json", club, sim_strategy, r.seed), dump(to_json(r, mdp.season())));
        summary.push_back({{"seed", r.seed},
                           {"total_expected_points", r.total_expected_points},
                           {"squad_injuries", r.squad_injuries},
                           {"optimal_team_injuries", r.optimal_team_injuries},
                           {"fallback_gameweeks", r.fallback_gameweeks}});
        std::cout << fmt::format("{} {} seed {}: {:.4f} expected points, {} injuries\n", club, sim_strategy, r.seed,
                                 r.total_expected_points, r.squad_injuries);
      }
      out.write("summary.json", dump(summary));
    } else if (active == &cmp) {
      out.dir = cmp_out;
      out.manifest.seed = cmp_seed;
      const DatasetBundle bundle = cmp_data.load(out);
      const Models models = load_models(cmp_models, out);
      std::vector<ClubId> clubs_run = cmp_clubs.empty() ? bundle.clubs() : std::vector<ClubId>{};
      for (const auto& c : cmp_clubs) clubs_run.push_back(pick_club(bundle, c));
      const auto seeds = seed_range(cmp_seed, cmp_seeds);
      const int jobs = jobs_or_cores(cmp_jobs);
      std::vector<Comparison> rows;
      json report = json::array();
      for (double risk : cmp_risks) {
        if (!(risk >= 0.0)) throw ConfigError("risk multipliers must be non-negative");
        for (const ClubId& club : clubs_run) {
          Models m = models;
          m.risk_multiplier = risk;
          const Mdp mdp(bundle.season(club), m);
          SimulationConfig cfg{cmp_search.config(), risk};
          const auto greedy = simulate_many(mdp, Strategy::greedy, cfg, seeds, jobs);
          const auto mcts = simulate_many(mdp, Strategy::mcts, cfg, seeds, jobs);
          Comparison c = compare_strategies(greedy, mcts);
          log(quiet, fmt::format("{} x{}: points {:+.2f}%, optimal-team injuries {:+.1f}% (p = {:.3f})", club, risk,
                                 c.points_change_percent, -c.optimal_injury_reduction_percent,
                                 c.optimal_injuries_test.p_less));
          report.push_back(to_json(c));
          rows.push_back(std::move(c));
        }
      }
      out.write("comparison.csv", comparison_csv(rows));
      out.write("comparison.json", dump(report));
    } else if (active == &cs) {
      out.dir = cs_out;
      out.manifest.seed = cs_seed;
      const DatasetBundle bundle = cs_data.load(out);
      Models models = load_models(cs_models, out);
      models.risk_multiplier = cs_risk;
      std::optional<ClubId> club;
      for (const auto& p : bundle.players)
        if (p.id == cs_player) club = p.club;
      if (!club) throw ReferenceError(fmt::format("bundle has no player '{}'", cs_player));
      const Mdp mdp(bundle.season(*club), models);
      SimulationConfig cfg{cs_search.config(), cs_risk};
      std::vector<SeasonResult> results;
      for (const auto& s : cs_strategies) {
        const Strategy st = parse_strategy(s);
        results.push_back(st == Strategy::replay ? simulate_season(bundle, *club, st, models, cfg, cs_seed)
                                                 : simulate_season(mdp, st, cfg, cs_seed));
      }
      const CaseStudy study = player_case_study(mdp.season(), results, cs_player, cs_window);
      out.write("case_study.csv", case_study_csv(study));
    } else if (active == &srv) {
      out.dir = fs::path();
      const DatasetBundle bundle = srv_data.load(out);
      const Models models = load_models(srv_models, out);
      PlannerService service;
      service.default_budget = srv_budget;
      service.add_bundle("default", bundle, models);
      log(quiet, fmt::format("serving /v1 on http://{}:{}", srv_host, srv_port));
      if (!serve(service, srv_host, srv_port))
        throw ConfigError(fmt::format("cannot listen on {}:{}", srv_host, srv_port));
      return 0;
    }
    out.finish();
    return 0;
  } catch (const UsageError& e) {
    std::cerr << "squadplan: usage error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "squadplan: error: " << e.what() << '\n';
    return 1;
  }
}

int run(int argc, const char* const* argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace squadplan::cli
