#pragma once

#include <array>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "squadplan/core.hpp"
#include "squadplan/rng.hpp"

namespace squadplan {

inline constexpr int kAcuteWindowDays = 7;
inline constexpr int kChronicWindowDays = 28;
inline constexpr std::size_t kRecentGames = 3;
inline constexpr double kChronicFloor = 1e-6;

inline constexpr std::size_t kRiskFeatureCount = 8;
inline constexpr std::array<std::string_view, kRiskFeatureCount> kRiskFeatureNames = {
    "acute_workload",       "chronic_workload",        "acute_chronic_ratio", "past_injury_count",
    "career_days_injured",  "distance_covered_recent", "dribbles_recent",     "age_years"};

using FeatureVector = std::array<double, kRiskFeatureCount>;

FeatureVector to_features(const RiskFactors& f);
RiskFactors from_features(const FeatureVector& x);

/// Trailing-window workload features from appearances with day <= as_of_day.
/// Injury counts come from the caller (history or in-season tally).
RiskFactors compute_risk_factors(std::span<const Appearance> history, int as_of_day, int past_injuries,
                                 int career_days_injured, double age_years);

/// Same, with the injury tally taken from records that started before as_of_day.
RiskFactors compute_risk_factors(const Player& player, std::span<const Appearance> history, int as_of_day);

/// Drops appearances no window can see any more, keeping the last kRecentGames.
void trim_appearances(std::vector<Appearance>& log, int as_of_day);

enum class InjuryModelKind { calibrated_classifier, heuristic_baseline };

std::string_view to_string(InjuryModelKind kind);
InjuryModelKind parse_injury_model_kind(std::string_view text);

struct InjuryExample {
  PlayerId player;
  RiskFactors factors;
  bool injured = false;
};

struct InjuryModel {
  InjuryModelKind kind = InjuryModelKind::calibrated_classifier;

  // calibrated_classifier: logistic link, weights in raw feature units
  std::vector<std::string> feature_names;
  std::vector<double> weights;
  double bias = 0.0;
  std::vector<double> feature_means;

  // heuristic_baseline
  std::map<PlayerId, double> player_rates;
  double global_rate = 0.0;

  int iterations = 0;  // optimiser steps used when training

  bool operator==(const InjuryModel&) const = default;
};

struct InjuryTrainOptions {
  double ridge = 1e-4;  // L2 on standardised weights, per row
  double tolerance = 1e-8;
  int max_iterations = 100000;
};

InjuryModel train_injury_model(std::span<const InjuryExample> rows, InjuryModelKind kind,
                               const InjuryTrainOptions& options = {});

/// Link-space (log-odds) score of the calibrated classifier.
double injury_logit(const InjuryModel& model, const RiskFactors& f);

/// Probability in [0, 1]. The baseline looks the player up by id.
double predict_injury_prob(const InjuryModel& model, const RiskFactors& f, std::string_view player_id = {});

struct FeatureContribution {
  std::string feature;
  double contribution = 0.0;  // log-odds units
  double value = 0.0;
};

struct Explanation {
  double base = 0.0;        // link value at the training means
  double link_value = 0.0;  // base + sum of all contributions
  double probability = 0.0;
  std::vector<FeatureContribution> contributions;  // by |contribution|, truncated
};

Explanation explain_prediction(const InjuryModel& model, const RiskFactors& f, std::size_t top_k);

std::vector<std::pair<std::string, double>> global_feature_importance(const InjuryModel& model,
                                                                      std::span<const RiskFactors> rows);

double log_loss(std::span<const double> predictions, const std::vector<bool>& labels);

struct LengthDistribution {
  double mean_days = 0.0;
  double std_days = 1.0;

  bool operator==(const LengthDistribution&) const = default;
};

LengthDistribution fit_length_distribution(std::span<const InjuryRecord> records);

/// Maps a standard normal draw to whole injury days, clamped at zero.
int injury_days_from_normal(const LengthDistribution& dist, double z);

struct SampledInjury {
  int days = 0;
  int games_out = 0;
};

SampledInjury sample_injury(const LengthDistribution& dist, double z, const Fixture& at_fixture,
                            std::span<const Fixture> fixtures);

int sample_injury_length(const LengthDistribution& dist, Rng& rng, const Fixture& at_fixture,
                         const Season& season);

nlohmann::json to_json(const InjuryModel& model);
InjuryModel injury_model_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LengthDistribution& dist);
LengthDistribution length_distribution_from_json(const nlohmann::json& j);

}  // namespace squadplan
