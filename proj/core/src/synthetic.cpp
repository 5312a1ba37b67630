#include "lcwr/synthetic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>

#include "lcwr/error.hpp"

namespace lcwr {
namespace {

// Independent stream per (world seed, purpose, index).
std::mt19937_64 stream(std::uint64_t seed, std::uint32_t purpose, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), purpose,
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

enum Purpose : std::uint32_t {
  kParams = 1,
  kGamma = 2,
  kBaselineLengths = 3,
  kModelLengths = 4,
  kHardLabels = 5,
  kVerbosityLabels = 6,
  kAttackLabels = 7,
};

std::int64_t draw_length(const LengthDistribution& dist, std::mt19937_64& rng) {
  std::lognormal_distribution<double> d(dist.log_location, dist.log_scale);
  return std::max<std::int64_t>(1, std::llround(d(rng)));
}

std::string numbered(const std::string& prefix, int i, int width) {
  std::string digits = std::to_string(i);
  if (static_cast<int>(digits.size()) < width) digits.insert(0, static_cast<std::size_t>(width) - digits.size(), '0');
  return prefix + digits;
}

int digits(int n) {
  int d = 1;
  while (n >= 10) {
    n /= 10;
    ++d;
  }
  return d;
}

Preference relabel(const SyntheticWorld& world, const AnnotationRecord& r, const LengthPair& lengths,
                   std::mt19937_64& rng) {
  if (world.label_mode == LabelMode::kHard) return annotate(world, r.model_id, r.instruction_id, lengths, rng);
  return annotate(world, r.model_id, r.instruction_id, lengths);
}

void check_world_record(const SyntheticWorld& world, const AnnotationRecord& r) {
  if (r.baseline_id != world.baseline_id) {
    throw InvalidArgument("record baseline '" + r.baseline_id + "' is not the world's baseline");
  }
  (void)world.params(r.model_id);
  (void)world.true_gamma.at(r.instruction_id);
}

}  // namespace

double LengthDistribution::mean() const { return std::exp(log_location + 0.5 * log_scale * log_scale); }

double LengthDistribution::variance() const {
  const double s2 = log_scale * log_scale;
  return std::expm1(s2) * std::exp(2.0 * log_location + s2);
}

const GlmParameters& SyntheticWorld::params(const std::string& model_id) const {
  auto it = true_params.find(model_id);
  if (it == true_params.end()) throw InvalidArgument("unknown model '" + model_id + "'");
  return it->second;
}

const LengthScale& SyntheticWorld::scale(const std::string& model_id) const {
  auto it = true_scale.find(model_id);
  if (it == true_scale.end()) throw InvalidArgument("unknown model '" + model_id + "'");
  return it->second;
}

std::size_t SyntheticWorld::model_index(const std::string& model_id) const {
  auto it = std::find(model_ids.begin(), model_ids.end(), model_id);
  if (it == model_ids.end()) throw InvalidArgument("unknown model '" + model_id + "'");
  return static_cast<std::size_t>(it - model_ids.begin());
}

double SyntheticWorld::true_lc_winrate(const std::string& model_id) const {
  const auto& p = params(model_id);
  double sum = 0.0;
  for (const auto& id : instruction_ids) sum += lc_predict(p, true_gamma.at(id));
  return 100.0 * sum / static_cast<double>(instruction_ids.size());
}

SyntheticWorld make_world(int n_models, int n_instructions, std::uint64_t seed, const WorldOptions& options) {
  if (n_models < 2) throw InvalidArgument("make_world needs at least 2 models (baseline included)");
  if (n_instructions < 10) throw InvalidArgument("make_world needs at least 10 instructions");
  if (!(options.log_scale > 0.0)) throw InvalidArgument("length log-scale must be positive");

  SyntheticWorld w;
  w.rng_seed = seed;
  w.label_mode = options.label_mode;
  w.baseline_id = "baseline";
  w.model_ids.push_back(w.baseline_id);
  for (int m = 1; m < n_models; ++m) w.model_ids.push_back(numbered("model_", m, std::max(2, digits(n_models - 1))));
  for (int x = 0; x < n_instructions; ++x) {
    w.instruction_ids.push_back(numbered("instr_", x, std::max(4, digits(n_instructions - 1))));
  }

  auto param_rng = stream(seed, kParams, 0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(param_rng); };
  for (std::size_t m = 0; m < w.model_ids.size(); ++m) {
    GlmParameters p;
    p.theta = uniform(options.theta_min, options.theta_max);
    p.phi = uniform(options.phi_min, options.phi_max);
    p.psi = uniform(options.psi_min, options.psi_max);
    const double offset = uniform(-options.log_location_spread, options.log_location_spread);
    if (m == 0) {
      // The baseline's theta and psi are absorbed into everyone else's.
      p.theta = 0.0;
      p.psi = 0.0;
      w.length_model[w.model_ids[m]] = {options.baseline_log_location, options.log_scale};
    } else {
      w.length_model[w.model_ids[m]] = {options.baseline_log_location + offset, options.log_scale};
    }
    w.true_params[w.model_ids[m]] = p;
  }

  auto gamma_rng = stream(seed, kGamma, 0);
  std::normal_distribution<double> normal(0.0, options.gamma_std);
  std::vector<double> gammas(w.instruction_ids.size());
  for (auto& g : gammas) g = normal(gamma_rng);
  double mean = 0.0;
  for (double g : gammas) mean += g;
  mean /= static_cast<double>(gammas.size());
  // psi * gamma is only identified up to a common scale. State the truth in
  // the gauge the joint gamma regression uses: psi averages 1 over the
  // evaluated models.
  double psi_mean = 0.0;
  for (std::size_t m = 1; m < w.model_ids.size(); ++m) psi_mean += w.true_params[w.model_ids[m]].psi;
  psi_mean /= static_cast<double>(w.model_ids.size() - 1);
  if (psi_mean > 0.0) {
    for (std::size_t m = 1; m < w.model_ids.size(); ++m) w.true_params[w.model_ids[m]].psi /= psi_mean;
  } else {
    psi_mean = 1.0;
  }
  for (std::size_t x = 0; x < gammas.size(); ++x) {
    w.true_gamma.insert(w.instruction_ids[x], psi_mean * (gammas[x] - mean));
  }

  auto baseline_rng = stream(seed, kBaselineLengths, 0);
  const auto& baseline_dist = w.length_model.at(w.baseline_id);
  for (const auto& id : w.instruction_ids) w.baseline_lengths[id] = draw_length(baseline_dist, baseline_rng);

  for (std::size_t m = 0; m < w.model_ids.size(); ++m) {
    const auto& model = w.model_ids[m];
    std::vector<std::int64_t> lengths;
    lengths.reserve(w.instruction_ids.size());
    if (m == 0) {
      for (const auto& id : w.instruction_ids) lengths.push_back(w.baseline_lengths.at(id));
      // Self-comparisons have no length spread; use the spread two independent
      // baseline outputs would have.
      w.true_scale[model] = LengthScale::from_sigma(std::sqrt(2.0 * baseline_dist.variance()));
    } else {
      auto rng = stream(seed, kModelLengths, m);
      for (std::size_t x = 0; x < w.instruction_ids.size(); ++x) {
        lengths.push_back(draw_length(w.length_model.at(model), rng));
      }
      const double n = static_cast<double>(lengths.size());
      double mean_diff = 0.0;
      for (std::size_t x = 0; x < lengths.size(); ++x) {
        mean_diff += static_cast<double>(lengths[x] - w.baseline_lengths.at(w.instruction_ids[x]));
      }
      mean_diff /= n;
      double ss = 0.0;
      for (std::size_t x = 0; x < lengths.size(); ++x) {
        const double dev = static_cast<double>(lengths[x] - w.baseline_lengths.at(w.instruction_ids[x])) - mean_diff;
        ss += dev * dev;
      }
      const double sigma = std::sqrt(ss / n);
      w.true_scale[model] = sigma > 0.0 ? LengthScale::from_sigma(sigma) : LengthScale::degenerate_scale();
    }
    w.model_lengths[model] = std::move(lengths);
  }
  return w;
}

Preference annotate(const SyntheticWorld& world, const std::string& model_id, const std::string& instruction_id,
                    const LengthPair& lengths) {
  const auto& p = world.params(model_id);
  const double gamma_x = world.true_gamma.at(instruction_id);
  return Preference(predict_preference(p, gamma_x, lengths, world.scale(model_id)));
}

Preference annotate(const SyntheticWorld& world, const std::string& model_id, const std::string& instruction_id,
                    const LengthPair& lengths, std::mt19937_64& rng) {
  const double q = annotate(world, model_id, instruction_id, lengths).value();
  std::bernoulli_distribution coin(q);
  return Preference(coin(rng) ? 1.0 : 0.0);
}

std::vector<AnnotationRecord> gen_dataset(const SyntheticWorld& world, const std::string& model_id) {
  const std::size_t m = world.model_index(model_id);
  const auto& lengths = world.model_lengths.at(model_id);
  auto rng = stream(world.rng_seed, kHardLabels, m);
  std::vector<AnnotationRecord> out;
  out.reserve(world.instruction_ids.size());
  for (std::size_t x = 0; x < world.instruction_ids.size(); ++x) {
    const auto& id = world.instruction_ids[x];
    const LengthPair pair(lengths[x], world.baseline_lengths.at(id));
    const Preference pref = m == 0 ? Preference(0.5)
                            : world.label_mode == LabelMode::kHard ? annotate(world, model_id, id, pair, rng)
                                                                   : annotate(world, model_id, id, pair);
    out.push_back(AnnotationRecord{id, model_id, world.baseline_id, pair, pref});
  }
  return out;
}

std::vector<AnnotationRecord> gen_all(const SyntheticWorld& world) {
  std::vector<AnnotationRecord> out;
  out.reserve(world.model_ids.size() * world.instruction_ids.size());
  for (const auto& model : world.model_ids) {
    auto records = gen_dataset(world, model);
    out.insert(out.end(), records.begin(), records.end());
  }
  return out;
}

std::vector<AnnotationRecord> apply_verbosity(const SyntheticWorld& world, std::span<const AnnotationRecord> records,
                                              double length_multiplier) {
  if (!(length_multiplier > 0.0) || !std::isfinite(length_multiplier)) {
    throw InvalidArgument("length multiplier must be positive and finite");
  }
  auto rng = stream(world.rng_seed, kVerbosityLabels, std::bit_cast<std::uint64_t>(length_multiplier));
  std::vector<AnnotationRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    check_world_record(world, r);
    const auto scaled = static_cast<std::int64_t>(
        std::ceil(static_cast<double>(r.lengths.len_model()) * length_multiplier));
    const LengthPair pair(std::max<std::int64_t>(1, scaled), r.lengths.len_baseline());
    if (pair == r.lengths) {
      out.push_back(r);
      continue;
    }
    out.push_back(AnnotationRecord{r.instruction_id, r.model_id, r.baseline_id, pair, relabel(world, r, pair, rng)});
  }
  return out;
}

std::vector<AnnotationRecord> apply_truncation_attack(const SyntheticWorld& world,
                                                      std::span<const AnnotationRecord> records,
                                                      const AttackConfig& attack) {
  if (attack.truncate_to < 1) throw InvalidArgument("truncate_to must be >= 1");
  if (!(attack.win_threshold >= 0.0 && attack.win_threshold <= 1.0)) {
    throw InvalidArgument("win_threshold must lie in [0, 1]");
  }
  if (!(attack.length_window > 0.0)) throw InvalidArgument("length_window must be positive");

  auto rng = stream(world.rng_seed, kAttackLabels, static_cast<std::uint64_t>(attack.truncate_to));
  std::vector<AnnotationRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    check_world_record(world, r);
    const double quality = lc_predict(world.params(r.model_id), world.true_gamma.at(r.instruction_id));
    const double window = attack.length_window * world.scale(r.model_id).sigma;
    const bool keep = quality >= attack.win_threshold &&
                      std::abs(static_cast<double>(r.lengths.difference())) <= window;
    const LengthPair pair(std::min(attack.truncate_to, r.lengths.len_model()), r.lengths.len_baseline());
    if (keep || pair == r.lengths) {
      out.push_back(r);
      continue;
    }
    out.push_back(AnnotationRecord{r.instruction_id, r.model_id, r.baseline_id, pair, relabel(world, r, pair, rng)});
  }
  return out;
}

}  // namespace lcwr
