#include "lcwr/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>
#include <tuple>

#include "lcwr/error.hpp"

namespace lcwr {
namespace {

void require_nonempty(std::span<const AnnotationRecord> records, const char* what) {
  if (records.empty()) throw InvalidArgument(std::string(what) + " needs at least one record");
}

double mean_preference(std::span<const AnnotationRecord> records) {
  double sum = 0.0;
  for (const auto& r : records) sum += r.preference.value();
  return sum / static_cast<double>(records.size());
}

double population_std(std::span<const double> values) {
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return std::sqrt(ss / n);
}

bool is_constant(std::span<const double> values) {
  return std::all_of(values.begin(), values.end(), [&](double v) { return v == values.front(); });
}

// 0, 0.5 or 1 for one resample; nullopt when a resampled sequence is
// constant and the correlation is undefined.
std::optional<double> resample_outcome(std::span<const double> a, std::span<const double> b,
                                       std::span<const double> arena, std::span<const std::size_t> idx) {
  std::vector<double> ra(idx.size()), rb(idx.size()), rc(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    ra[i] = a[idx[i]];
    rb[i] = b[idx[i]];
    rc[i] = arena[idx[i]];
  }
  if (is_constant(ra) || is_constant(rb) || is_constant(rc)) return std::nullopt;
  const double corr_a = spearman(ra, rc);
  const double corr_b = spearman(rb, rc);
  if (corr_a < corr_b) return 1.0;
  if (corr_a == corr_b) return 0.5;
  return 0.0;
}

}  // namespace

double raw_winrate(std::span<const AnnotationRecord> records) {
  require_nonempty(records, "raw_winrate");
  return 100.0 * mean_preference(records);
}

double lc_winrate(const ModelFit& fit, const GammaTable& gamma, std::span<const AnnotationRecord> records) {
  require_nonempty(records, "lc_winrate");
  double sum = 0.0;
  for (const auto& r : records) sum += lc_predict(fit.params, gamma.at(r.instruction_id));
  return 100.0 * sum / static_cast<double>(records.size());
}

WinrateMatrix winrate_matrix(std::span<const ModelFit> fits, const GammaTable& gamma,
                             std::span<const std::string> instruction_ids) {
  if (instruction_ids.empty()) throw InvalidArgument("winrate_matrix needs at least one instruction");
  for (const auto& f : fits) {
    if (f.baseline_id != fits.front().baseline_id) {
      throw InvalidArgument("winrate_matrix needs fits against one common baseline; found '" + f.baseline_id +
                            "' and '" + fits.front().baseline_id + "'");
    }
  }
  std::vector<double> gammas;
  gammas.reserve(instruction_ids.size());
  for (const auto& id : instruction_ids) gammas.push_back(gamma.at(id));

  const auto n = static_cast<Eigen::Index>(fits.size());
  WinrateMatrix out;
  out.percent = Eigen::MatrixXd::Constant(n, n, 50.0);
  for (const auto& f : fits) out.model_ids.push_back(f.model_id);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = i + 1; j < n; ++j) {
      const auto& a = fits[static_cast<std::size_t>(i)].params;
      const auto& b = fits[static_cast<std::size_t>(j)].params;
      const GlmParameters diff{a.theta - b.theta, 0.0, a.psi - b.psi};
      double sum = 0.0;
      for (double g : gammas) sum += lc_predict(diff, g);
      const double w = 100.0 * sum / static_cast<double>(gammas.size());
      out.percent(i, j) = w;
      out.percent(j, i) = 100.0 - w;
    }
  }
  return out;
}

double ln_winrate(std::span<const AnnotationRecord> records, std::optional<double> temperature) {
  require_nonempty(records, "ln_winrate");
  double tau = 0.0;
  if (temperature) {
    if (!(*temperature > 0.0) || !std::isfinite(*temperature)) {
      throw InvalidArgument("ln_winrate temperature must be positive and finite");
    }
    tau = *temperature;
  } else {
    std::vector<double> diffs;
    diffs.reserve(records.size());
    for (const auto& r : records) diffs.push_back(static_cast<double>(r.lengths.difference()));
    tau = population_std(diffs);
    if (!(tau > 0.0)) tau = 1.0;
  }
  double mean_diff = 0.0;
  for (const auto& r : records) mean_diff += static_cast<double>(r.lengths.difference());
  mean_diff /= static_cast<double>(records.size());

  const double normalized = raw_winrate(records) / (2.0 * logistic(mean_diff / tau));
  return std::clamp(normalized, 0.0, 100.0);
}

BalancedWinrate lb_winrate(std::span<const AnnotationRecord> records) {
  require_nonempty(records, "lb_winrate");
  double longer_sum = 0.0, shorter_sum = 0.0;
  std::size_t longer_n = 0, shorter_n = 0;
  for (const auto& r : records) {
    const auto d = r.lengths.difference();
    const double y = r.preference.value();
    if (d >= 0) {
      longer_sum += y;
      ++longer_n;
    }
    if (d <= 0) {
      shorter_sum += y;
      ++shorter_n;
    }
  }
  if (longer_n == 0 || shorter_n == 0) return {raw_winrate(records), true};
  const double longer = 100.0 * longer_sum / static_cast<double>(longer_n);
  const double shorter = 100.0 * shorter_sum / static_cast<double>(shorter_n);
  return {0.5 * (longer + shorter), false};
}

double normalized_std(const VerbosityTriple& t) {
  const double values[] = {t.concise, t.standard, t.verbose};
  for (double v : values) {
    if (!(v >= 0.0 && v <= 100.0)) {
      throw InvalidArgument("win rates in a verbosity triple must lie in [0, 100]");
    }
  }
  const double mean = (t.concise + t.standard + t.verbose) / 3.0;
  if (mean == 0.0) throw InvalidArgument("verbosity triple for '" + t.model_id + "' has mean 0");
  return 100.0 * population_std(values) / mean;
}

double gameability(std::span<const VerbosityTriple> triples) {
  if (triples.empty()) throw InvalidArgument("gameability needs at least one triple");
  double sum = 0.0;
  for (const auto& t : triples) sum += normalized_std(t);
  return sum / static_cast<double>(triples.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  std::vector<std::size_t> order(values.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(values.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && values[order[j + 1]] == values[order[i]]) ++j;
    // Positions i..j (0-based) share the mean 1-based rank.
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

double spearman(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw InvalidArgument("spearman: sequences differ in length");
  if (xs.size() < 2) throw InvalidArgument("spearman needs at least two values");
  for (double v : xs) {
    if (!std::isfinite(v)) throw InvalidArgument("spearman: non-finite value");
  }
  for (double v : ys) {
    if (!std::isfinite(v)) throw InvalidArgument("spearman: non-finite value");
  }
  if (is_constant(xs) || is_constant(ys)) {
    throw InvalidArgument("spearman is undefined for a constant sequence");
  }
  const auto rx = average_ranks(xs);
  const auto ry = average_ranks(ys);
  const double n = static_cast<double>(rx.size());
  // Average ranks always have mean (n + 1) / 2.
  const double mean = 0.5 * (n + 1.0);
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double dx = rx[i] - mean;
    const double dy = ry[i] - mean;
    sxy += dx * dy;
    sxx += dx * dx;
    syy += dy * dy;
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

double bootstrap_corr_pvalue(std::span<const double> scores_a, std::span<const double> scores_b,
                             std::span<const double> arena, int n_resamples, std::uint64_t seed) {
  const std::size_t n = arena.size();
  if (scores_a.size() != n || scores_b.size() != n) {
    throw InvalidArgument("bootstrap: score sequences must be aligned with the arena sequence");
  }
  if (n < 3) throw InvalidArgument("bootstrap needs at least three models");
  if (n_resamples < 100) throw InvalidArgument("bootstrap needs at least 100 resamples");
  if (is_constant(scores_a) || is_constant(scores_b) || is_constant(arena)) {
    throw InvalidArgument("bootstrap: a constant score sequence has no rank correlation");
  }

  constexpr int kMaxRedraws = 10000;
  double total = 0.0;
  std::vector<std::size_t> idx(n);
  for (int i = 0; i < n_resamples; ++i) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(i)};
    std::mt19937_64 rng(seq);
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::optional<double> outcome;
    for (int attempt = 0; attempt < kMaxRedraws && !outcome; ++attempt) {
      for (auto& k : idx) k = pick(rng);
      outcome = resample_outcome(scores_a, scores_b, arena, idx);
    }
    if (!outcome) throw Error("bootstrap: could not draw a non-degenerate resample");
    total += *outcome;
  }
  return total / n_resamples;
}

double elo_to_winrate(double delta_elo) {
  if (!std::isfinite(delta_elo)) throw InvalidArgument("elo difference must be finite");
  return 100.0 / (1.0 + std::pow(10.0, -delta_elo / 400.0));
}

double winrate_to_elo(double winrate) {
  if (!(winrate > 0.0 && winrate < 100.0)) {
    throw InvalidArgument("winrate_to_elo needs 0 < winrate < 100, got " + std::to_string(winrate));
  }
  return 400.0 * std::log10(winrate / (100.0 - winrate));
}

LeaderboardRow leaderboard_row(const ModelFit& fit, const GammaTable& gamma,
                               std::span<const AnnotationRecord> records) {
  require_nonempty(records, "leaderboard_row");
  LeaderboardRow row;
  row.model_id = fit.model_id;
  row.lc_winrate = lc_winrate(fit, gamma, records);
  row.raw_winrate = raw_winrate(records);
  double length = 0.0;
  for (const auto& r : records) length += static_cast<double>(r.lengths.len_model());
  row.avg_length = length / static_cast<double>(records.size());
  row.n_examples = records.size();
  return row;
}

void sort_leaderboard(std::vector<LeaderboardRow>& rows, SortKey key) {
  auto metric = [key](const LeaderboardRow& r) { return key == SortKey::kRaw ? r.raw_winrate : r.lc_winrate; };
  std::sort(rows.begin(), rows.end(), [&](const LeaderboardRow& a, const LeaderboardRow& b) {
    if (metric(a) != metric(b)) return metric(a) > metric(b);
    return a.model_id < b.model_id;
  });
}

}  // namespace lcwr
