#include "squadplan/match.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Dense>

namespace squadplan {

double MatchModel::goal_rate(double own_value, double opp_value, bool home) const {
  return std::exp(beta0 + beta1 * own_value + beta2 * opp_value + (home ? beta_home : 0.0));
}

double team_value(const Lineup& lineup, std::span<const Player> squad) {
  double total = 0.0;
  for (PlayerIndex i : lineup.players) {
    if (i >= squad.size()) throw ReferenceError("lineup refers to unknown squad index " + std::to_string(i));
    total += squad[i].skill;
  }
  return total;
}

namespace {

// Newton iterations for a Poisson log-link GLM with a deterministic zero start.
// Columns of `x` are standardised internally; returns coefficients on the raw scale.
Eigen::VectorXd fit_poisson_glm(const Eigen::MatrixXd& x, const Eigen::VectorXd& y, double ridge,
                                const MatchTrainOptions& opt, int& iterations_used) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();  // column 0 is the intercept
  Eigen::VectorXd center = Eigen::VectorXd::Zero(d), scale = Eigen::VectorXd::Ones(d);
  Eigen::MatrixXd z = x;
  for (Eigen::Index j = 1; j < d; ++j) {
    center(j) = x.col(j).mean();
    const double var = (x.col(j).array() - center(j)).square().mean();
    scale(j) = var > 1e-24 ? std::sqrt(var) : 1.0;
    z.col(j) = (x.col(j).array() - center(j)) / scale(j);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  auto nll = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd eta = z * theta;
    return (eta.array().exp() - y.array() * eta.array()).sum() * inv_n +
           0.5 * ridge * theta.tail(d - 1).squaredNorm();
  };

  Eigen::VectorXd theta = Eigen::VectorXd::Zero(d);
  double current = nll(theta);
  bool converged = false;
  int iter = 0;
  for (; iter < opt.max_iterations; ++iter) {
    const Eigen::VectorXd mu = (z * theta).array().exp();
    Eigen::VectorXd grad = z.transpose() * (mu - y) * inv_n;
    grad.tail(d - 1) += ridge * theta.tail(d - 1);
    if (!grad.allFinite()) break;
    if (grad.cwiseAbs().maxCoeff() < opt.tolerance) {
      converged = true;
      break;
    }
    Eigen::MatrixXd hess = z.transpose() * mu.asDiagonal() * z * inv_n;
    hess.diagonal().tail(d - 1).array() += ridge;
    hess.diagonal().array() += 1e-12;
    const Eigen::VectorXd step = hess.ldlt().solve(grad);
    const double decrease = grad.dot(step);
    if (decrease < 1e-12) {
      theta -= step;
      current = nll(theta);
      continue;
    }
    double t = 1.0;
    Eigen::VectorXd next = theta - step;
    double value = nll(next);
    while (!(value <= current - 1e-4 * t * decrease) && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      value = nll(next);
    }
    if (!(value <= current)) break;
    theta = next;
    current = value;
  }
  iterations_used = iter;
  if (!converged)
    throw TrainingError("Poisson regression did not converge after " + std::to_string(iter) + " iterations");

  Eigen::VectorXd raw(d);
  raw(0) = theta(0);
  for (Eigen::Index j = 1; j < d; ++j) {
    raw(j) = theta(j) / scale(j);
    raw(0) -= raw(j) * center(j);
  }
  return raw;
}

std::vector<double> poisson_pmf(double lambda, int max_goals) {
  std::vector<double> p(static_cast<std::size_t>(max_goals) + 1);
  p[0] = std::exp(-lambda);
  for (int k = 1; k <= max_goals; ++k) p[static_cast<std::size_t>(k)] = p[static_cast<std::size_t>(k - 1)] * lambda / k;
  return p;
}

}  // namespace

MatchModel train_match_model(std::span<const GameRecord> games, const MatchTrainOptions& options) {
  if (games.size() < 10)
    throw TrainingError("match model needs at least 10 games (got " + std::to_string(games.size()) + ")");
  const Eigen::Index n = static_cast<Eigen::Index>(games.size()) * 2;
  Eigen::MatrixXd x(n, 4);
  Eigen::VectorXd y(n);
  for (std::size_t g = 0; g < games.size(); ++g) {
    const GameRecord& r = games[g];
    if (!std::isfinite(r.home_value) || !std::isfinite(r.away_value) || r.home_goals < 0 || r.away_goals < 0)
      throw TrainingError("non-finite or negative input in game " + std::to_string(g));
    const auto row = static_cast<Eigen::Index>(2 * g);
    x.row(row) << 1.0, r.home_value, r.away_value, 1.0;
    y(row) = r.home_goals;
    x.row(row + 1) << 1.0, r.away_value, r.home_value, 0.0;
    y(row + 1) = r.away_goals;
  }
  MatchModel m;
  const Eigen::VectorXd beta = fit_poisson_glm(x, y, 0.0, options, m.iterations);
  m.beta0 = beta(0);
  m.beta1 = beta(1);
  m.beta2 = beta(2);
  m.beta_home = beta(3);
  return m;
}

std::vector<std::vector<double>> scoreline_grid(const MatchModel& model, double v_own, double v_opp, bool home) {
  const auto own = poisson_pmf(model.goal_rate(v_own, v_opp, home), model.max_goals);
  const auto opp = poisson_pmf(model.goal_rate(v_opp, v_own, !home), model.max_goals);
  std::vector<std::vector<double>> grid(own.size(), std::vector<double>(opp.size()));
  double total = 0.0;
  for (std::size_t i = 0; i < own.size(); ++i)
    for (std::size_t j = 0; j < opp.size(); ++j) total += grid[i][j] = own[i] * opp[j];
  for (auto& row : grid)
    for (double& cell : row) cell /= total;
  return grid;
}

OutcomeProbs outcome_probs_from_rates(double lambda_own, double lambda_opp, int max_goals) {
  // Same truncated, renormalised grid as scoreline_grid, summed by diagonal bands.
  double po = std::exp(-lambda_own);
  double pp = std::exp(-lambda_opp);
  double mass_own = 0.0, mass_opp = 0.0;
  double opp_cdf_below = 0.0;  // P(opp < i)
  double win = 0.0, draw = 0.0;
  for (int i = 0; i <= max_goals; ++i) {
    if (i > 0) {
      po *= lambda_own / i;
      pp *= lambda_opp / i;
    }
    win += po * opp_cdf_below;
    draw += po * pp;
    opp_cdf_below += pp;
    mass_own += po;
    mass_opp += pp;
  }
  const double total = mass_own * mass_opp;
  OutcomeProbs out;
  out.win = win / total;
  out.draw = draw / total;
  out.loss = std::max(0.0, 1.0 - out.win - out.draw);
  return out;
}

OutcomeProbs outcome_probs(const MatchModel& model, double v_own, double v_opp, bool home) {
  return outcome_probs_from_rates(model.goal_rate(v_own, v_opp, home), model.goal_rate(v_opp, v_own, !home),
                                  model.max_goals);
}

double expected_points(const MatchModel& model, double v_own, const Fixture& fixture) {
  return expected_points(outcome_probs(model, v_own, fixture.opponent_strength, fixture.is_home));
}

double expected_points(const MatchModel& model, const Lineup& lineup, const Fixture& fixture,
                       std::span<const Player> squad) {
  return expected_points(model, team_value(lineup, squad), fixture);
}

MatchResult result_of(int own_goals, int opp_goals) {
  return own_goals > opp_goals ? MatchResult::win : own_goals == opp_goals ? MatchResult::draw : MatchResult::loss;
}

double outcome_log_loss(std::span<const OutcomeProbs> predictions, std::span<const MatchResult> results) {
  if (predictions.size() != results.size() || predictions.empty())
    throw ConfigError("outcome_log_loss needs equal, non-empty lists");
  double total = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const auto& p = predictions[i];
    const double q = results[i] == MatchResult::win ? p.win : results[i] == MatchResult::draw ? p.draw : p.loss;
    total -= std::log(std::max(q, 1e-15));
  }
  return total / static_cast<double>(predictions.size());
}

OutcomeProbs TeamMatchModel::outcome(const ClubId& home_club, const ClubId& away_club) const {
  auto get = [](const std::map<ClubId, double>& m, const ClubId& c) {
    auto it = m.find(c);
    if (it == m.end()) throw ReferenceError("team model has no club '" + c + "'");
    return it->second;
  };
  const double lh = std::exp(intercept + home + get(attack, home_club) - get(defence, away_club));
  const double la = std::exp(intercept + get(attack, away_club) - get(defence, home_club));
  return outcome_probs_from_rates(lh, la, max_goals);
}

TeamMatchModel train_team_match_model(std::span<const ClubGame> games, const MatchTrainOptions& options) {
  if (games.size() < 10) throw TrainingError("team match model needs at least 10 games");
  std::map<ClubId, Eigen::Index> index;
  for (const auto& g : games) {
    index.emplace(g.home, 0);
    index.emplace(g.away, 0);
  }
  Eigen::Index next = 0;
  for (auto& [club, i] : index) i = next++;
  const Eigen::Index clubs = next;
  // columns: intercept, home, attack[clubs], defence[clubs]
  const Eigen::Index d = 2 + 2 * clubs;
  const Eigen::Index n = static_cast<Eigen::Index>(games.size()) * 2;
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, d);
  Eigen::VectorXd y(n);
  for (std::size_t g = 0; g < games.size(); ++g) {
    const auto row = static_cast<Eigen::Index>(2 * g);
    const Eigen::Index h = index[games[g].home], a = index[games[g].away];
    x(row, 0) = 1.0;
    x(row, 1) = 1.0;
    x(row, 2 + h) = 1.0;
    x(row, 2 + clubs + a) = -1.0;
    y(row) = games[g].home_goals;
    x(row + 1, 0) = 1.0;
    x(row + 1, 2 + a) = 1.0;
    x(row + 1, 2 + clubs + h) = -1.0;
    y(row + 1) = games[g].away_goals;
  }
  // A small ridge pins the otherwise unidentified attack/defence offsets.
  int iters = 0;
  const Eigen::VectorXd beta = fit_poisson_glm(x, y, 1e-6, options, iters);
  TeamMatchModel m;
  m.intercept = beta(0);
  m.home = beta(1);
  for (const auto& [club, i] : index) {
    m.attack[club] = beta(2 + i);
    m.defence[club] = beta(2 + clubs + i);
  }
  return m;
}

nlohmann::json to_json(const MatchModel& model) {
  return {{"beta0", model.beta0},
          {"beta1", model.beta1},
          {"beta2", model.beta2},
          {"beta_home", model.beta_home},
          {"max_goals", model.max_goals}};
}

MatchModel match_model_from_json(const nlohmann::json& j) {
  try {
    MatchModel m;
    m.beta0 = j.at("beta0").get<double>();
    m.beta1 = j.at("beta1").get<double>();
    m.beta2 = j.at("beta2").get<double>();
    m.beta_home = j.at("beta_home").get<double>();
    m.max_goals = j.at("max_goals").get<int>();
    if (m.max_goals < 1) throw ParseError("match model max_goals must be at least 1");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("match model: ") + e.what());
  }
}

}  // namespace squadplan
