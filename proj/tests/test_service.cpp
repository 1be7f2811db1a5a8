#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "squadplan/service.hpp"

using namespace squadplan;
using nlohmann::json;

namespace {

struct Harness {
  DatasetBundle bundle = synth_league(2, 4, 18, 0.04);
  Models models = train_models(bundle);
  PlannerService service;

  Harness() {
    service.default_budget = 50;
    service.add_bundle("league", bundle, models);
  }

  std::string open(std::uint64_t seed, double risk = 1.0, const std::string& club = "C01") {
    const ApiResponse r = service.create_session({{"bundle", "league"}, {"club", club}, {"seed", seed},
                                                  {"risk_multiplier", risk}});
    REQUIRE(r.status == 201);
    return r.body["session_id"].get<std::string>();
  }

  Mdp mdp(const std::string& club = "C01", double risk = 1.0) const {
    Models m = models;
    m.risk_multiplier = risk;
    return Mdp(bundle.season(club), m);
  }
};

json ids(const Lineup& l, const Season& s) { return {{"players", lineup_ids(l, s)}}; }

void check_error(const ApiResponse& r, int status, const std::string& code) {
  CHECK(r.status == status);
  CHECK(r.body["code"] == code);
  CHECK(r.body["message"].is_string());
  CHECK(r.body.contains("details"));
}

json without_id(json j) {
  j.erase("session_id");
  return j;
}

}  // namespace

TEST_SUITE("service") {
  TEST_CASE("new sessions start at the first gameweek") {
    Harness f;
    const ApiResponse a = f.service.create_session({{"club", "C01"}, {"seed", 7}});
    const ApiResponse b = f.service.create_session({{"club", "C01"}, {"seed", 7}});
    REQUIRE(a.status == 201);
    CHECK(a.body["gameweek"] == 1);
    CHECK(a.body["total_points"] == 0.0);
    CHECK(a.body["done"] == false);
    CHECK(a.body["session_id"] != b.body["session_id"]);
    CHECK(without_id(a.body) == without_id(b.body));
    for (const auto& p : a.body["players"]) {
      CHECK(p["injury_prob"].get<double>() >= 0.0);
      CHECK(p["injury_prob"].get<double>() <= 1.0);
      CHECK(p.contains("role"));
      CHECK(p.contains("skill"));
      CHECK(p.contains("available"));
    }
    const ApiResponse h = f.service.history(a.body["session_id"]);
    CHECK(h.body["history"].empty());
  }

  TEST_CASE("unknown names give error payloads") {
    Harness f;
    check_error(f.service.create_session({{"club", "C99"}}), 404, "unknown_club");
    check_error(f.service.create_session({{"bundle", "other"}, {"club", "C01"}}), 404, "unknown_bundle");
    check_error(f.service.create_session({{"seed", 1}}), 400, "bad_request");
    check_error(f.service.create_session({{"club", "C01"}, {"risk_multiplier", -1}}), 400, "bad_request");
    check_error(f.service.state("nope"), 404, "unknown_session");
    check_error(f.service.history("nope"), 404, "unknown_session");
    check_error(f.service.recommendation("nope", 10), 404, "unknown_session");
    check_error(f.service.submit_lineup("nope", {{"players", json::array()}}), 404, "unknown_session");
  }

  TEST_CASE("recommendations are pure and reproducible") {
    Harness f;
    const std::string id = f.open(3);
    const ApiResponse before = f.service.state(id);
    const ApiResponse a = f.service.recommendation(id, 120);
    const ApiResponse b = f.service.recommendation(id, 120);
    REQUIRE(a.status == 200);
    CHECK(a.body == b.body);
    CHECK(f.service.state(id).body == before.body);
    int visits = 0;
    for (const auto& act : a.body["actions"]) visits += act["visits"].get<int>();
    CHECK(visits == 120);
    CHECK(a.body["lineup"].size() == 11);
    CHECK(a.body["explanations"].size() == 11);
    for (const auto& e : a.body["explanations"]) CHECK(e["contributions"].size() <= 3);
    check_error(f.service.recommendation(id, 0), 400, "bad_request");

    const ApiResponse priced = f.service.evaluate_lineup(id, {{"players", a.body["lineup"]}});
    CHECK(priced.body["valid"] == true);
    CHECK(priced.body["expected_points"].get<double>() == a.body["expected_points"].get<double>());
  }

  TEST_CASE("without risk the recommendation is the greedy lineup") {
    Harness f;
    const std::string id = f.open(5, 0.0);
    const Mdp mdp = f.mdp("C01", 0.0);
    const ApiResponse r = f.service.recommendation(id, 200);
    CHECK(r.body["lineup"] == json(lineup_ids(mdp.greedy_action(mdp.initial_state()), mdp.season())));
  }

  TEST_CASE("invalid lineups list the broken rules") {
    Harness f;
    const std::string id = f.open(1);
    const Mdp mdp = f.mdp();
    const Lineup g = mdp.greedy_action(mdp.initial_state());
    std::vector<PlayerId> ten = lineup_ids(g, mdp.season());
    ten.pop_back();
    const ApiResponse small = f.service.submit_lineup(id, {{"players", ten}});
    check_error(small, 422, "invalid_lineup");
    bool size = false;
    for (const auto& d : small.body["details"]) size = size || d["constraint"] == "size";
    CHECK(size);

    const ApiResponse stranger = f.service.submit_lineup(id, {{"players", {"C01-P01", "ghost"}}});
    check_error(stranger, 422, "invalid_lineup");
    CHECK(stranger.body["details"][0]["player"] == "ghost");
    check_error(f.service.submit_lineup(id, {{"lineup", 3}}), 400, "bad_request");
    CHECK(f.service.history(id).body["history"].empty());
  }

  TEST_CASE("an injured player is named when picked") {
    Harness f;
    const Mdp mdp = f.mdp();
    // find a seed whose first greedy game injures someone
    for (std::uint64_t seed = 1; seed < 200; ++seed) {
      MdpState s = mdp.initial_state();
      const Lineup g = mdp.greedy_action(s);
      const TransitionOutcome out = mdp.transition(s, g, season_draws(seed));
      const auto hurt = std::find_if(out.injuries.begin(), out.injuries.end(),
                                     [](const RealizedInjury& i) { return i.games_out > 0; });
      if (hurt == out.injuries.end()) continue;
      const std::string id = f.open(seed);
      REQUIRE(f.service.submit_lineup(id, ids(g, mdp.season())).status == 200);
      const ApiResponse again = f.service.submit_lineup(id, ids(g, mdp.season()));
      check_error(again, 422, "invalid_lineup");
      const std::string name = mdp.season().player(hurt->player).id;
      bool named = false;
      for (const auto& d : again.body["details"])
        named = named || (d["constraint"] == "unavailable" &&
                          d["message"].get<std::string>().find(name) != std::string::npos);
      CHECK(named);
      return;
    }
    FAIL("no seed produced an injury");
  }

  TEST_CASE("manual greedy replay matches the simulated season") {
    Harness f;
    const std::uint64_t seed = 11;
    const std::string id = f.open(seed);
    const Mdp mdp = f.mdp();
    const SeasonResult sim = simulate_season(mdp, Strategy::greedy, {}, seed);
    std::size_t g = 0;
    while (true) {
      const ApiResponse st = f.service.state(id);
      if (st.body["done"] == true) break;
      const ApiResponse out = f.service.submit_lineup(id, ids(sim.per_gameweek[g].lineup, mdp.season()));
      REQUIRE(out.status == 200);
      CHECK(out.body["reward"].get<double>() == sim.per_gameweek[g].reward);
      CHECK(out.body["injuries"].size() == sim.per_gameweek[g].injuries.size());
      // the returned state is what a later read sees
      CHECK(out.body["state"] == f.service.state(id).body);
      ++g;
    }
    CHECK(g == sim.per_gameweek.size());
    const ApiResponse h = f.service.history(id);
    CHECK(h.body["total_points"].get<double>() == sim.total_expected_points);
    CHECK(h.body["history"].size() == g);
    check_error(f.service.recommendation(id, 10), 409, "season_over");
    check_error(f.service.submit_lineup(id, ids(sim.per_gameweek[0].lineup, mdp.season())), 409, "season_over");
  }

  TEST_CASE("sessions do not disturb each other") {
    Harness f;
    const Mdp mdp = f.mdp();
    auto play = [&](const std::string& id, int games) {
      for (int k = 0; k < games; ++k) {
        const json rec = f.service.recommendation(id, 30).body;
        REQUIRE(f.service.submit_lineup(id, {{"players", rec["lineup"]}}).status == 200);
      }
    };
    const std::string solo = f.open(4);
    play(solo, 4);
    const std::string a = f.open(4), b = f.open(9);
    for (int k = 0; k < 4; ++k) {
      play(a, 1);
      play(b, 1);
    }
    CHECK(f.service.history(a).body["history"] == f.service.history(solo).body["history"]);

    // the same interleaving on worker threads
    const std::string c = f.open(4), d = f.open(4);
    std::thread t1([&] { play(c, 4); });
    std::thread t2([&] { play(d, 4); });
    t1.join();
    t2.join();
    CHECK(f.service.history(c).body["history"] == f.service.history(solo).body["history"]);
    CHECK(f.service.history(d).body["history"] == f.service.history(solo).body["history"]);
  }

  TEST_CASE("http routes") {
    Harness f;
    httplib::Server server;
    f.service.mount(server);
    const int port = server.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server.listen_after_bind(); });
    server.wait_until_ready();
    httplib::Client client("127.0.0.1", port);

    auto created = client.Post("/v1/sessions", R"({"club": "C02", "seed": 3})", "application/json");
    REQUIRE(created);
    CHECK(created->status == 201);
    CHECK(created->get_header_value("Content-Type") == "application/json");
    const std::string id = json::parse(created->body)["session_id"];

    auto plain = client.Post("/v1/sessions", R"({"club": "C02"})", "text/plain");
    REQUIRE(plain);
    CHECK(plain->status == 415);
    CHECK(json::parse(plain->body)["code"] == "unsupported_media_type");

    auto broken = client.Post("/v1/sessions", "{not json", "application/json");
    REQUIRE(broken);
    CHECK(broken->status == 400);

    auto rec = client.Get("/v1/sessions/" + id + "/recommendation?budget=40");
    REQUIRE(rec);
    CHECK(rec->status == 200);
    const json lineup = json::parse(rec->body)["lineup"];

    auto bad_budget = client.Get("/v1/sessions/" + id + "/recommendation?budget=lots");
    REQUIRE(bad_budget);
    CHECK(bad_budget->status == 400);

    auto check = client.Post("/v1/sessions/" + id + "/evaluate", json{{"players", lineup}}.dump(), "application/json");
    REQUIRE(check);
    CHECK(json::parse(check->body)["valid"] == true);

    auto sent = client.Post("/v1/sessions/" + id + "/lineup", json{{"players", lineup}}.dump(), "application/json");
    REQUIRE(sent);
    CHECK(sent->status == 200);
    auto state = client.Get("/v1/sessions/" + id + "/state");
    REQUIRE(state);
    CHECK(json::parse(state->body)["gameweek"] == 2);
    auto hist = client.Get("/v1/sessions/" + id + "/history");
    REQUIRE(hist);
    CHECK(json::parse(hist->body)["history"].size() == 1);

    auto missing = client.Get("/v1/sessions/zzz/state");
    REQUIRE(missing);
    CHECK(missing->status == 404);
    CHECK(json::parse(missing->body)["code"] == "unknown_session");
    auto nowhere = client.Get("/v2/anything");
    REQUIRE(nowhere);
    CHECK(nowhere->status == 404);
    CHECK(json::parse(nowhere->body)["code"] == "not_found");

    server.stop();
    worker.join();
  }
}
