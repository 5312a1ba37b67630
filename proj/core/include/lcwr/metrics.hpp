#pragma once

// Win-rate variants and the statistics used to compare leaderboards.
// Every win rate is a percentage in [0, 100].

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "lcwr/estimation.hpp"
#include "lcwr/glm.hpp"

namespace lcwr {

struct LeaderboardRow {
  std::string model_id;
  double lc_winrate = 0.0;
  double raw_winrate = 0.0;
  double avg_length = 0.0;
  std::size_t n_examples = 0;
};

struct VerbosityTriple {
  std::string model_id;
  double concise = 0.0;
  double standard = 0.0;
  double verbose = 0.0;
};

// 100 * mean preference. Records must share one (model, baseline) pair.
double raw_winrate(std::span<const AnnotationRecord> records);

// 100 * mean over records of lc_predict(fit.params, gamma_x).
double lc_winrate(const ModelFit& fit, const GammaTable& gamma, std::span<const AnnotationRecord> records);

struct WinrateMatrix {
  std::vector<std::string> model_ids;
  // percent(i, j): predicted win rate of model i against model j.
  Eigen::MatrixXd percent;
};

// Predicted head-to-head LC win rates between every pair of fits, all of
// which must share one baseline.
WinrateMatrix winrate_matrix(std::span<const ModelFit> fits, const GammaTable& gamma,
                             std::span<const std::string> instruction_ids);

// Raw win rate divided by 2 * logistic(mean length difference / temperature),
// clipped to [0, 100]. The temperature defaults to the population std of the
// length differences (1 when that is zero).
double ln_winrate(std::span<const AnnotationRecord> records, std::optional<double> temperature = std::nullopt);

struct BalancedWinrate {
  double winrate = 0.0;
  // Set when one stratum was empty and the raw win rate was returned.
  bool unstable = false;
};

// Unweighted mean of the win rates over the longer and the shorter strata.
// Exact-length ties count in both.
BalancedWinrate lb_winrate(std::span<const AnnotationRecord> records);

// Mean over models of 100 * std(three win rates) / mean(three win rates),
// with the population std.
double gameability(std::span<const VerbosityTriple> triples);
double normalized_std(const VerbosityTriple& triple);

// Pearson correlation of average-tie ranks.
double spearman(std::span<const double> xs, std::span<const double> ys);

// Average ranks (1-based) with ties sharing the mean of their positions.
std::vector<double> average_ranks(std::span<const double> values);

// Bootstrap over models: the fraction of resamples in which scores_a
// correlates with arena no better than scores_b does. Exact ties between the
// two correlations count one half. Resamples in which any of the three
// sequences is constant are redrawn. Resample i draws from its own stream
// seeded by (seed, i).
double bootstrap_corr_pvalue(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const double> arena, int n_resamples, std::uint64_t seed);

// 100 / (1 + 10^(-delta / 400)) and its inverse. The inverse requires
// 0 < w < 100.
double elo_to_winrate(double delta_elo);
double winrate_to_elo(double winrate);

LeaderboardRow leaderboard_row(const ModelFit& fit, const GammaTable& gamma,
                               std::span<const AnnotationRecord> records);

enum class SortKey { kLengthControlled, kRaw };

// Descending by the chosen metric, ties broken by model id.
void sort_leaderboard(std::vector<LeaderboardRow>& rows, SortKey key);

}  // namespace lcwr
