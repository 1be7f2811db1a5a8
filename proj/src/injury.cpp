#include "squadplan/injury.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

namespace squadplan {

namespace {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_calibrated(const InjuryModel& model, std::string_view what) {
  if (model.kind != InjuryModelKind::calibrated_classifier)
    throw UnsupportedError(std::string(what) + " needs a calibrated_classifier model");
}

}  // namespace

FeatureVector to_features(const RiskFactors& f) {
  return {f.acute_workload,      f.chronic_workload,        f.acute_chronic_ratio, f.past_injury_count,
          f.career_days_injured, f.distance_covered_recent, f.dribbles_recent,     f.age_years};
}

RiskFactors from_features(const FeatureVector& x) {
  return RiskFactors{x[0], x[1], x[2], x[3], x[4], x[5], x[6], x[7]};
}

RiskFactors compute_risk_factors(std::span<const Appearance> history, int as_of_day, int past_injuries,
                                 int career_days_injured, double age_years) {
  RiskFactors f;
  double chronic_km = 0.0;
  for (const Appearance& a : history) {
    if (a.day > as_of_day) continue;
    const int ago = as_of_day - a.day;
    if (ago < kAcuteWindowDays) f.acute_workload += a.distance_km;
    if (ago < kChronicWindowDays) chronic_km += a.distance_km;
  }
  f.chronic_workload = chronic_km * 7.0 / kChronicWindowDays;
  f.acute_chronic_ratio = f.acute_workload / std::max(f.chronic_workload, kChronicFloor);

  std::size_t seen = 0;
  for (auto it = history.rbegin(); it != history.rend() && seen < kRecentGames; ++it) {
    if (it->day > as_of_day) continue;
    f.distance_covered_recent += it->distance_km;
    f.dribbles_recent += it->dribbles;
    ++seen;
  }
  if (seen > 0) {
    f.distance_covered_recent /= static_cast<double>(seen);
    f.dribbles_recent /= static_cast<double>(seen);
  }
  f.past_injury_count = past_injuries;
  f.career_days_injured = career_days_injured;
  f.age_years = age_years;
  return f;
}

RiskFactors compute_risk_factors(const Player& player, std::span<const Appearance> history, int as_of_day) {
  int count = 0;
  int days = 0;
  for (const InjuryRecord& r : player.injury_history) {
    if (r.start_day < as_of_day) {
      ++count;
      days += r.duration_days;
    }
  }
  return compute_risk_factors(history, as_of_day, count, days, player.age_years);
}

void trim_appearances(std::vector<Appearance>& log, int as_of_day) {
  if (log.size() <= kRecentGames) return;
  const std::size_t keep_tail = log.size() - kRecentGames;
  std::size_t first = 0;
  while (first < keep_tail && as_of_day - log[first].day >= kChronicWindowDays) ++first;
  if (first > 0) log.erase(log.begin(), log.begin() + static_cast<std::ptrdiff_t>(first));
}

std::string_view to_string(InjuryModelKind kind) {
  return kind == InjuryModelKind::calibrated_classifier ? "calibrated_classifier" : "heuristic_baseline";
}

InjuryModelKind parse_injury_model_kind(std::string_view text) {
  if (text == "calibrated_classifier" || text == "calibrated") return InjuryModelKind::calibrated_classifier;
  if (text == "heuristic_baseline" || text == "baseline") return InjuryModelKind::heuristic_baseline;
  throw ConfigError("unknown injury model kind '" + std::string(text) + "'");
}

namespace {

InjuryModel train_baseline(std::span<const InjuryExample> rows) {
  std::map<PlayerId, std::pair<int, int>> tally;  // injuries, appearances
  int injuries = 0;
  for (const auto& r : rows) {
    auto& t = tally[r.player];
    t.first += r.injured ? 1 : 0;
    t.second += 1;
    injuries += r.injured ? 1 : 0;
  }
  InjuryModel m;
  m.kind = InjuryModelKind::heuristic_baseline;
  for (const auto& [id, t] : tally) m.player_rates[id] = static_cast<double>(t.first) / t.second;
  m.global_rate = static_cast<double>(injuries) / static_cast<double>(rows.size());
  return m;
}

// Newton's method on the ridge-penalised mean cross-entropy, in standardised
// feature space, with backtracking on the objective.
InjuryModel train_logistic(std::span<const InjuryExample> rows, const InjuryTrainOptions& opt) {
  const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
  constexpr Eigen::Index d = kRiskFeatureCount;

  Eigen::MatrixXd x(n, d);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const FeatureVector fv = to_features(rows[static_cast<std::size_t>(i)].factors);
    for (Eigen::Index j = 0; j < d; ++j) {
      if (!std::isfinite(fv[static_cast<std::size_t>(j)]))
        throw TrainingError("non-finite feature in training row " + std::to_string(i));
      x(i, j) = fv[static_cast<std::size_t>(j)];
    }
    y(i) = rows[static_cast<std::size_t>(i)].injured ? 1.0 : 0.0;
  }
  const Eigen::VectorXd mean = x.colwise().mean();
  Eigen::VectorXd scale(d);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double var = (x.col(j).array() - mean(j)).square().mean();
    scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
  }
  // design matrix with intercept column first
  Eigen::MatrixXd z(n, d + 1);
  z.col(0).setOnes();
  for (Eigen::Index j = 0; j < d; ++j) z.col(j + 1) = (x.col(j).array() - mean(j)) / scale(j);

  const double inv_n = 1.0 / static_cast<double>(n);
  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = z * theta;
    double loss = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^eta) - y * eta, computed stably
      const double e = eta(i);
      const double softplus = e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e));
      loss += softplus - y(i) * e;
    }
    return loss * inv_n + 0.5 * opt.ridge * theta.tail(d).squaredNorm();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d + 1);
  double current = objective(theta);
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const Eigen::VectorXd eta = z * theta;
    Eigen::VectorXd p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p(i) = sigmoid(eta(i));
      w(i) = p(i) * (1.0 - p(i));
    }
    Eigen::VectorXd grad = z.transpose() * (p - y) * inv_n;
    grad.tail(d) += opt.ridge * theta.tail(d);
    if (grad.cwiseAbs().maxCoeff() < opt.tolerance) break;

    Eigen::MatrixXd hess = z.transpose() * w.asDiagonal() * z * inv_n;
    hess.diagonal().tail(d).array() += opt.ridge;
    hess(0, 0) += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);

    const double decrease = grad.dot(step);
    if (decrease < 1e-12) {  // quadratic regime: objective differences are below rounding
      theta -= step;
      current = objective(theta);
      continue;
    }
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double value = objective(next);
    while (value > current - 1e-4 * t * decrease && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      value = objective(next);
    }
    if (!(value <= current)) break;  // rounding floor reached
    theta = next;
    current = value;
  }

  InjuryModel m;
  m.kind = InjuryModelKind::calibrated_classifier;
  m.iterations = iter;
  m.feature_names.assign(kRiskFeatureNames.begin(), kRiskFeatureNames.end());
  m.weights.resize(d);
  m.feature_means.resize(d);
  double bias = theta(0);
  for (Eigen::Index j = 0; j < d; ++j) {
    const double w = theta(j + 1) / scale(j);
    m.weights[static_cast<std::size_t>(j)] = w;
    m.feature_means[static_cast<std::size_t>(j)] = mean(j);
    bias -= w * mean(j);
  }
  m.bias = bias;
  return m;
}

}  // namespace

InjuryModel train_injury_model(std::span<const InjuryExample> rows, InjuryModelKind kind,
                               const InjuryTrainOptions& options) {
  std::size_t positives = 0;
  for (const auto& r : rows) positives += r.injured ? 1 : 0;
  const std::size_t negatives = rows.size() - positives;
  if (positives < 2 || negatives < 2)
    throw TrainingError("injury training needs at least 2 rows of each class (got " +
                        std::to_string(positives) + " injured, " + std::to_string(negatives) + " not)");
  return kind == InjuryModelKind::heuristic_baseline ? train_baseline(rows) : train_logistic(rows, options);
}

double injury_logit(const InjuryModel& model, const RiskFactors& f) {
  require_calibrated(model, "injury_logit");
  const FeatureVector x = to_features(f);
  double z = model.bias;
  for (std::size_t j = 0; j < model.weights.size(); ++j) z += model.weights[j] * x[j];
  return z;
}

double predict_injury_prob(const InjuryModel& model, const RiskFactors& f, std::string_view player_id) {
  if (model.kind == InjuryModelKind::heuristic_baseline) {
    auto it = model.player_rates.find(PlayerId(player_id));
    return std::clamp(it == model.player_rates.end() ? model.global_rate : it->second, 0.0, 1.0);
  }
  return sigmoid(injury_logit(model, f));
}

Explanation explain_prediction(const InjuryModel& model, const RiskFactors& f, std::size_t top_k) {
  require_calibrated(model, "explain_prediction");
  const FeatureVector x = to_features(f);
  Explanation e;
  e.base = model.bias;
  for (std::size_t j = 0; j < model.weights.size(); ++j) e.base += model.weights[j] * model.feature_means[j];
  e.link_value = e.base;
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    const double c = model.weights[j] * (x[j] - model.feature_means[j]);
    e.link_value += c;
    e.contributions.push_back({model.feature_names[j], c, x[j]});
  }
  e.probability = sigmoid(e.link_value);
  std::stable_sort(e.contributions.begin(), e.contributions.end(),
                   [](const auto& a, const auto& b) { return std::abs(a.contribution) > std::abs(b.contribution); });
  if (e.contributions.size() > top_k) e.contributions.resize(top_k);
  return e;
}

std::vector<std::pair<std::string, double>> global_feature_importance(const InjuryModel& model,
                                                                      std::span<const RiskFactors> rows) {
  require_calibrated(model, "global_feature_importance");
  std::vector<std::pair<std::string, double>> out;
  std::vector<double> magnitudes(rows.size());
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    for (std::size_t i = 0; i < rows.size(); ++i)
      magnitudes[i] = std::abs(model.weights[j] * (to_features(rows[i])[j] - model.feature_means[j]));
    // sorted summation keeps the result independent of row order
    std::sort(magnitudes.begin(), magnitudes.end());
    const double total = std::accumulate(magnitudes.begin(), magnitudes.end(), 0.0);
    out.emplace_back(model.feature_names[j], rows.empty() ? 0.0 : total / static_cast<double>(rows.size()));
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  return out;
}

double log_loss(std::span<const double> predictions, const std::vector<bool>& labels) {
  if (predictions.size() != labels.size() || predictions.empty())
    throw ConfigError("log_loss needs equal, non-empty prediction and label lists");
  constexpr double eps = 1e-15;
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double p = std::clamp(predictions[i], eps, 1.0 - eps);
    total -= labels[i] ? std::log(p) : std::log1p(-p);
  }
  return total / static_cast<double>(predictions.size());
}

LengthDistribution fit_length_distribution(std::span<const InjuryRecord> records) {
  if (records.size() < 2) throw FitError("injury length fit needs at least 2 records");
  double mean = 0.0;
  for (const auto& r : records) mean += r.duration_days;
  mean /= static_cast<double>(records.size());
  double ss = 0.0;
  for (const auto& r : records) ss += (r.duration_days - mean) * (r.duration_days - mean);
  const double sd = std::sqrt(ss / static_cast<double>(records.size() - 1));
  if (!(sd > 0.0)) throw FitError("injury lengths have zero variance");
  return {mean, sd};
}

int injury_days_from_normal(const LengthDistribution& dist, double z) {
  const double days = dist.mean_days + dist.std_days * z;
  if (!(days > 0.0)) return 0;
  return static_cast<int>(std::lround(days));
}

SampledInjury sample_injury(const LengthDistribution& dist, double z, const Fixture& at_fixture,
                            std::span<const Fixture> fixtures) {
  SampledInjury s;
  s.days = injury_days_from_normal(dist, z);
  s.games_out = injury_period_to_game_count(at_fixture.timestep, s.days, fixtures);
  return s;
}

int sample_injury_length(const LengthDistribution& dist, Rng& rng, const Fixture& at_fixture,
                         const Season& season) {
  return sample_injury(dist, rng.normal(), at_fixture, season.fixtures()).games_out;
}

nlohmann::json to_json(const InjuryModel& model) {
  nlohmann::json j;
  j["kind"] = std::string(to_string(model.kind));
  if (model.kind == InjuryModelKind::calibrated_classifier) {
    j["feature_names"] = model.feature_names;
    j["weights"] = model.weights;
    j["bias"] = model.bias;
    j["feature_means"] = model.feature_means;
  } else {
    j["player_rates"] = model.player_rates;
    j["global_rate"] = model.global_rate;
  }
  return j;
}

InjuryModel injury_model_from_json(const nlohmann::json& j) {
  InjuryModel m;
  try {
    m.kind = parse_injury_model_kind(j.at("kind").get<std::string>());
    if (m.kind == InjuryModelKind::calibrated_classifier) {
      m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
      m.weights = j.at("weights").get<std::vector<double>>();
      m.bias = j.at("bias").get<double>();
      m.feature_means = j.at("feature_means").get<std::vector<double>>();
      if (m.feature_names.size() != kRiskFeatureCount || m.weights.size() != kRiskFeatureCount ||
          m.feature_means.size() != kRiskFeatureCount)
        throw ParseError("injury model must carry " + std::to_string(kRiskFeatureCount) + " features");
      for (std::size_t i = 0; i < kRiskFeatureCount; ++i)
        if (m.feature_names[i] != kRiskFeatureNames[i])
          throw ParseError("injury model feature " + std::to_string(i) + " is '" + m.feature_names[i] +
                           "', expected '" + std::string(kRiskFeatureNames[i]) + "'");
    } else {
      m.player_rates = j.at("player_rates").get<std::map<PlayerId, double>>();
      m.global_rate = j.at("global_rate").get<double>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("injury model: ") + e.what());
  }
  return m;
}

nlohmann::json to_json(const LengthDistribution& dist) {
  return {{"mean_days", dist.mean_days}, {"std_days", dist.std_days}};
}

LengthDistribution length_distribution_from_json(const nlohmann::json& j) {
  try {
    LengthDistribution d{j.at("mean_days").get<double>(), j.at("std_days").get<double>()};
    if (!(d.std_days > 0.0)) throw ParseError("injury length std_days must be positive");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("injury lengths: ") + e.what());
  }
}

}  // namespace squadplan
