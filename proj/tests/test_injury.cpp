#include <algorithm>
#include <cmath>
#include <numeric>

#include <boost/math/distributions/normal.hpp>

#include "doctest.h"
#include "squadplan/injury.hpp"
#include "squadplan/rng.hpp"

using namespace squadplan;

namespace {

Appearance game(int day, double km) { return {day, km, 1.0, false}; }

struct LabelledSet {
  std::vector<InjuryExample> rows;
  std::vector<double> truth;  // generator probability per row
};

// Features drawn on plausible scales; the label is Bernoulli(sigmoid(b + w.x)).
LabelledSet logistic_data(int n, std::uint64_t seed, const FeatureVector& w, double b) {
  Rng rng(seed);
  LabelledSet out;
  for (int i = 0; i < n; ++i) {
    RiskFactors f;
    f.acute_workload = std::max(0.0, rng.normal(11.0, 6.0));
    f.chronic_workload = std::max(4.0, rng.normal(12.0, 4.0));
    f.acute_chronic_ratio = f.acute_workload / std::max(f.chronic_workload, kChronicFloor);
    f.past_injury_count = rng.poisson(1.5);
    f.career_days_injured = f.past_injury_count * std::max(0.0, rng.normal(18.0, 10.0));
    f.distance_covered_recent = std::max(0.0, rng.normal(10.0, 2.0));
    f.dribbles_recent = std::max(0.0, rng.normal(1.2, 0.8));
    f.age_years = rng.uniform(18.0, 35.0);
    const FeatureVector x = to_features(f);
    double z = b;
    for (std::size_t j = 0; j < kRiskFeatureCount; ++j) z += w[j] * x[j];
    const double p = 1.0 / (1.0 + std::exp(-z));
    out.truth.push_back(p);
    out.rows.push_back({"p" + std::to_string(i % 300), f, rng.uniform() < p});
  }
  return out;
}

const FeatureVector kTruthWeights = {0.08, -0.02, 0.3, 0.15, 0.004, 0.05, 0.2, 0.01};
constexpr double kTruthBias = -5.0;

std::vector<bool> labels_of(const std::vector<InjuryExample>& rows) {
  std::vector<bool> y;
  for (const auto& r : rows) y.push_back(r.injured);
  return y;
}

std::vector<double> predict_all(const InjuryModel& m, const std::vector<InjuryExample>& rows) {
  std::vector<double> p;
  for (const auto& r : rows) p.push_back(predict_injury_prob(m, r.factors, r.player));
  return p;
}

double bce(const std::vector<double>& p, const std::vector<bool>& y) {
  std::vector<char> yc(y.begin(), y.end());
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) total -= yc[i] ? std::log(p[i]) : std::log(1.0 - p[i]);
  return total / static_cast<double>(p.size());
}

}  // namespace

TEST_SUITE("injury") {
  TEST_CASE("risk factors with no appearances are zero") {
    const RiskFactors f = compute_risk_factors({}, 100, 3, 40, 0.0);
    CHECK(f.acute_workload == 0.0);
    CHECK(f.chronic_workload == 0.0);
    CHECK(f.acute_chronic_ratio == 0.0);
    CHECK(f.past_injury_count == 3.0);
    CHECK(f.career_days_injured == 40.0);
  }

  TEST_CASE("single recent game fills the acute window") {
    const std::vector<Appearance> log = {game(97, 10.0)};
    CHECK(compute_risk_factors(log, 100, 0, 0, 0.0).acute_workload == 10.0);
  }

  TEST_CASE("acute and chronic windows by hand") {
    const std::vector<Appearance> log = {game(91, 10.0), game(95, 10.0), game(98, 10.0)};
    const RiskFactors f = compute_risk_factors(log, 100, 0, 0, 0.0);
    CHECK(f.acute_workload == doctest::Approx(20.0));
    CHECK(f.chronic_workload == doctest::Approx(30.0 * 7.0 / 28.0));
    CHECK(f.acute_chronic_ratio == doctest::Approx(20.0 / 7.5));
    CHECK(f.distance_covered_recent == doctest::Approx(10.0));
  }

  TEST_CASE("window edges: 7 days ago leaves the acute window, 28 days ago the chronic one") {
    const std::vector<Appearance> log = {game(72, 5.0), game(73, 7.0), game(93, 11.0), game(94, 13.0)};
    const RiskFactors f = compute_risk_factors(log, 100, 0, 0, 0.0);
    CHECK(f.acute_workload == doctest::Approx(13.0));
    CHECK(f.chronic_workload == doctest::Approx((7.0 + 11.0 + 13.0) / 4.0));
    CHECK(f.distance_covered_recent == doctest::Approx((7.0 + 11.0 + 13.0) / 3.0));
  }

  TEST_CASE("injury tallies come from records that started earlier") {
    Player p;
    p.injury_history = {{10, 5}, {50, 20}, {100, 7}};
    const RiskFactors f = compute_risk_factors(p, {}, 100);
    CHECK(f.past_injury_count == 2.0);
    CHECK(f.career_days_injured == 25.0);
  }

  TEST_CASE("trimming keeps everything the windows can still see") {
    std::vector<Appearance> log;
    for (int d = 0; d <= 120; d += 4) log.push_back(game(d, 1.0 + d));
    const RiskFactors before = compute_risk_factors(log, 124, 0, 0, 0.0);
    trim_appearances(log, 124);
    CHECK(compute_risk_factors(log, 124, 0, 0, 0.0) == before);
    CHECK(log.size() < 31);
  }

  TEST_CASE("separable toy set trains to a small loss") {
    std::vector<InjuryExample> rows;
    Rng rng(11);
    for (int i = 0; i < 20; ++i) {
      RiskFactors f;
      const bool injured = i % 2 == 0;
      f.acute_workload = injured ? rng.uniform(15.0, 20.0) : rng.uniform(0.0, 5.0);
      f.dribbles_recent = injured ? rng.uniform(2.0, 3.0) : rng.uniform(0.0, 1.0);
      rows.push_back({"p", f, injured});
    }
    const InjuryModel m = train_injury_model(rows, InjuryModelKind::calibrated_classifier);
    CHECK(log_loss(predict_all(m, rows), labels_of(rows)) < 0.1);
  }

  TEST_CASE("identical features with balanced labels predict one half") {
    std::vector<InjuryExample> rows;
    for (int i = 0; i < 40; ++i) {
      RiskFactors f;
      f.acute_workload = 10.0;
      f.past_injury_count = 2.0;
      rows.push_back({"p", f, i % 2 == 0});
    }
    const InjuryModel m = train_injury_model(rows, InjuryModelKind::calibrated_classifier);
    for (const auto& r : rows) CHECK(predict_injury_prob(m, r.factors) == doctest::Approx(0.5).epsilon(0.02));
  }

  TEST_CASE("training rejects single-class data") {
    std::vector<InjuryExample> rows(10);
    CHECK_THROWS_AS(train_injury_model(rows, InjuryModelKind::calibrated_classifier), TrainingError);
    rows[0].injured = true;
    CHECK_THROWS_AS(train_injury_model(rows, InjuryModelKind::heuristic_baseline), TrainingError);
  }

  TEST_CASE("baseline uses per-player rates with a global fallback") {
    std::vector<InjuryExample> rows;
    for (int i = 0; i < 40; ++i) rows.push_back({"a", {}, i < 2});
    for (int i = 0; i < 10; ++i) rows.push_back({"b", {}, i < 3});
    const InjuryModel m = train_injury_model(rows, InjuryModelKind::heuristic_baseline);
    CHECK(predict_injury_prob(m, {}, "a") == doctest::Approx(0.05));
    CHECK(predict_injury_prob(m, {}, "b") == doctest::Approx(0.3));
    CHECK(predict_injury_prob(m, {}, "nobody") == doctest::Approx(5.0 / 50.0));
    CHECK_THROWS_AS(explain_prediction(m, {}, 3), UnsupportedError);
    CHECK_THROWS_AS(global_feature_importance(m, {}), UnsupportedError);
  }

  TEST_CASE("logistic fit recovers a known generator") {
    const auto train = logistic_data(10000, 1, kTruthWeights, kTruthBias);
    const auto test = logistic_data(10000, 2, kTruthWeights, kTruthBias);
    const InjuryModel m = train_injury_model(train.rows, InjuryModelKind::calibrated_classifier);
    const auto y = labels_of(test.rows);
    const double bayes = bce(test.truth, y);
    const double fitted = log_loss(predict_all(m, test.rows), y);
    CHECK(fitted <= bayes * 1.05);

    const InjuryModel base = train_injury_model(train.rows, InjuryModelKind::heuristic_baseline);
    CHECK(fitted < log_loss(predict_all(base, test.rows), y));

    // point predictions track the generator (the error grows only in the sparse high-risk tail)
    std::vector<double> err;
    for (std::size_t i = 0; i < 1000; ++i)
      err.push_back(std::abs(predict_injury_prob(m, test.rows[i].factors) - test.truth[i]));
    std::sort(err.begin(), err.end());
    CHECK(err[950] < 0.05);
  }

  TEST_CASE("predictions at the training means sit inside the training range") {
    const auto train = logistic_data(3000, 5, kTruthWeights, kTruthBias);
    const InjuryModel m = train_injury_model(train.rows, InjuryModelKind::calibrated_classifier);
    const auto p = predict_all(m, train.rows);
    FeatureVector means{};
    std::copy(m.feature_means.begin(), m.feature_means.end(), means.begin());
    const double at_mean = predict_injury_prob(m, from_features(means));
    CHECK(at_mean >= *std::min_element(p.begin(), p.end()));
    CHECK(at_mean <= *std::max_element(p.begin(), p.end()));
  }

  TEST_CASE("explanations are exact linear attributions") {
    const auto train = logistic_data(3000, 8, kTruthWeights, kTruthBias);
    const InjuryModel m = train_injury_model(train.rows, InjuryModelKind::calibrated_classifier);

    FeatureVector means{};
    std::copy(m.feature_means.begin(), m.feature_means.end(), means.begin());
    for (const auto& c : explain_prediction(m, from_features(means), kRiskFeatureCount).contributions)
      CHECK(std::abs(c.contribution) < 1e-12);

    const auto& f = train.rows[17].factors;
    const auto x = to_features(f);
    const Explanation e = explain_prediction(m, f, kRiskFeatureCount);
    REQUIRE(e.contributions.size() == kRiskFeatureCount);
    double sum = e.base;
    for (const auto& c : e.contributions) {
      const auto j = static_cast<std::size_t>(
          std::find(kRiskFeatureNames.begin(), kRiskFeatureNames.end(), c.feature) - kRiskFeatureNames.begin());
      REQUIRE(j < kRiskFeatureCount);
      CHECK(c.contribution == doctest::Approx(m.weights[j] * (x[j] - m.feature_means[j])).epsilon(1e-12));
      CHECK(c.value == x[j]);
      sum += c.contribution;
    }
    CHECK(std::abs(sum - injury_logit(m, f)) < 1e-9);
    CHECK(e.probability == doctest::Approx(predict_injury_prob(m, f)));
    for (std::size_t i = 1; i < e.contributions.size(); ++i)
      CHECK(std::abs(e.contributions[i - 1].contribution) >= std::abs(e.contributions[i].contribution));
    CHECK(explain_prediction(m, f, 3).contributions.size() == 3);
  }

  TEST_CASE("global importance: single weight ranks first, row order irrelevant") {
    InjuryModel m;
    m.feature_names.assign(kRiskFeatureNames.begin(), kRiskFeatureNames.end());
    m.weights.assign(kRiskFeatureCount, 0.0);
    m.weights[4] = 0.01;
    m.feature_means.assign(kRiskFeatureCount, 0.0);
    auto rows = logistic_data(500, 9, kTruthWeights, kTruthBias);
    std::vector<RiskFactors> factors;
    for (const auto& r : rows.rows) factors.push_back(r.factors);
    const auto ranking = global_feature_importance(m, factors);
    CHECK(ranking.front().first == "career_days_injured");

    const InjuryModel fitted = train_injury_model(rows.rows, InjuryModelKind::calibrated_classifier);
    const auto a = global_feature_importance(fitted, factors);
    std::reverse(factors.begin(), factors.end());
    std::rotate(factors.begin(), factors.begin() + 123, factors.end());
    CHECK(global_feature_importance(fitted, factors) == a);
  }

  TEST_CASE("dominant generator coefficient tops the importance ranking") {
    FeatureVector w{};
    w[0] = 0.25;  // acute workload
    w[3] = 0.05;
    const auto data = logistic_data(10000, 12, w, -5.0);
    const InjuryModel m = train_injury_model(data.rows, InjuryModelKind::calibrated_classifier);
    std::vector<RiskFactors> factors;
    for (const auto& r : data.rows) factors.push_back(r.factors);
    CHECK(global_feature_importance(m, factors).front().first == "acute_workload");
  }

  TEST_CASE("decile calibration on held-out data") {
    const auto train = logistic_data(10000, 21, kTruthWeights, kTruthBias);
    const auto test = logistic_data(10000, 22, kTruthWeights, kTruthBias);
    const InjuryModel m = train_injury_model(train.rows, InjuryModelKind::calibrated_classifier);
    auto p = predict_all(m, test.rows);
    std::vector<std::size_t> order(p.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return p[a] < p[b]; });
    for (int d = 0; d < 10; ++d) {
      double mean_p = 0.0, rate = 0.0;
      const std::size_t lo = order.size() * d / 10, hi = order.size() * (d + 1) / 10;
      for (std::size_t k = lo; k < hi; ++k) {
        mean_p += p[order[k]];
        rate += test.rows[order[k]].injured ? 1.0 : 0.0;
      }
      CHECK(std::abs(mean_p - rate) / static_cast<double>(hi - lo) <= 0.05);
    }
  }

  TEST_CASE("length distribution fit") {
    const std::vector<InjuryRecord> two = {{0, 10}, {0, 20}};
    const auto d = fit_length_distribution(two);
    CHECK(d.mean_days == doctest::Approx(15.0));
    CHECK(d.std_days == doctest::Approx(std::sqrt(50.0)));
    CHECK_THROWS_AS(fit_length_distribution(std::vector<InjuryRecord>{{0, 14}, {3, 14}, {9, 14}}), FitError);
    CHECK_THROWS_AS(fit_length_distribution(std::vector<InjuryRecord>{{0, 14}}), FitError);

    Rng rng(99);
    std::vector<InjuryRecord> many;
    std::vector<double> raw;
    for (int i = 0; i < 10000; ++i) raw.push_back(rng.normal(18.0, 15.0));
    // the fit works on whole days; compare against the same rounding applied to the draws
    for (double x : raw) many.push_back({0, static_cast<int>(std::lround(x))});
    const auto fit = fit_length_distribution(many);
    CHECK(std::abs(fit.mean_days - 18.0) < 0.5);
    CHECK(std::abs(fit.std_days - 15.0) < 0.5);
  }

  TEST_CASE("negative length draws clamp to zero games") {
    std::vector<Fixture> fx;
    for (int i = 0; i < 10; ++i) fx.push_back({i + 1, i * 4, "o", 40.0, true});
    Season s("X", fx, {}, {});
    Rng rng(1);
    for (int i = 0; i < 1000; ++i) CHECK(sample_injury_length({-100.0, 0.1}, rng, fx[0], s) == 0);
  }

  TEST_CASE("length sampling is reproducible per seed") {
    std::vector<Fixture> fx;
    for (int i = 0; i < 38; ++i) fx.push_back({i + 1, i * 5, "o", 40.0, true});
    Season s("X", fx, {}, {});
    Rng a(5), b(5);
    for (int i = 0; i < 100; ++i) CHECK(sample_injury_length({18, 15}, a, fx[3], s) == sample_injury_length({18, 15}, b, fx[3], s));
  }

  TEST_CASE("mean games out on a dense calendar matches the exact expectation") {
    // fixtures alternate 3- and 4-day gaps (3.5 days on average)
    std::vector<Fixture> fx;
    int day = 0;
    for (int i = 0; i < 200; ++i) {
      fx.push_back({i + 1, day, "o", 40.0, true});
      day += i % 2 == 0 ? 3 : 4;
    }
    Season s("X", fx, {}, {});
    const LengthDistribution dist{18.0, 15.0};
    // games_out = #{fixtures k : 0 < tau_k - start <= D}, D = round(max(X, 0)),
    // so E = sum_k P(X >= tau_k - start - 1/2).
    const boost::math::normal_distribution<> nd(18.0, 15.0);
    double exact = 0.0;
    for (const auto& f : fx)
      if (f.timestep > 0) exact += boost::math::cdf(boost::math::complement(nd, f.timestep - 0.5));

    Rng rng(2024);
    const int n = 100000;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const int g = sample_injury_length(dist, rng, fx[0], s);
      REQUIRE(g >= 0);
      total += g;
    }
    CHECK(std::abs(total / n - exact) / exact < 0.02);

    // The continuous approximation E[max(X,0)]/3.5 ignores that whole games
    // are counted, and overstates the mean by about 5%.
    const double sigma = 15.0, mu = 18.0;
    const boost::math::normal_distribution<> stdn(0.0, 1.0);
    const double approx = (mu * boost::math::cdf(stdn, mu / sigma) + sigma * boost::math::pdf(stdn, mu / sigma)) / 3.5;
    CHECK(std::abs(total / n - approx) / approx < 0.05);
    CHECK(approx > exact);
  }

  TEST_CASE("model and length json round trip") {
    const auto train = logistic_data(2000, 31, kTruthWeights, kTruthBias);
    const InjuryModel m = train_injury_model(train.rows, InjuryModelKind::calibrated_classifier);
    InjuryModel back = injury_model_from_json(nlohmann::json::parse(to_json(m).dump()));
    back.iterations = m.iterations;
    CHECK(back == m);
    const InjuryModel base = train_injury_model(train.rows, InjuryModelKind::heuristic_baseline);
    CHECK(injury_model_from_json(nlohmann::json::parse(to_json(base).dump())) == base);
    const LengthDistribution d{17.25, 13.5};
    CHECK(length_distribution_from_json(to_json(d)) == d);
    CHECK_THROWS_AS(length_distribution_from_json({{"mean_days", 1.0}, {"std_days", 0.0}}), ParseError);
    CHECK_THROWS_AS(injury_model_from_json({{"kind", "forest"}}), Error);
  }
}
