#pragma once

// Ground-truth worlds for validating the estimators: every model has known
// (theta, phi, psi), every instruction a known gamma, and annotations are
// produced by the same GLM the estimators fit. Everything is deterministic
// given the world seed.

#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "lcwr/estimation.hpp"
#include "lcwr/glm.hpp"

namespace lcwr {

enum class LabelMode { kSoft, kHard };

// Log-normal output length in characters.
struct LengthDistribution {
  double log_location = 0.0;
  double log_scale = 0.0;

  double mean() const;
  double variance() const;
};

struct WorldOptions {
  double theta_min = -1.0;
  double theta_max = 1.0;
  // psi is drawn around 1, the scale the joint gamma regression fixes, then
  // rescaled to average exactly 1 over the evaluated models (gamma absorbs
  // the inverse factor, so every psi * gamma product is unchanged).
  double psi_min = 0.8;
  double psi_max = 1.2;
  double phi_min = 0.3;
  double phi_max = 1.0;
  double gamma_std = 1.0;
  double baseline_log_location = 7.313220387090301;  // ln 1500
  double log_scale = 0.4;
  // Each model's log-location is the baseline's plus a uniform offset.
  double log_location_spread = 0.25;
  LabelMode label_mode = LabelMode::kSoft;
};

struct SyntheticWorld {
  std::string baseline_id;
  std::vector<std::string> model_ids;  // baseline first
  std::vector<std::string> instruction_ids;
  std::map<std::string, GlmParameters> true_params;
  GammaTable true_gamma;
  std::map<std::string, LengthDistribution> length_model;
  // Drawn once per instruction; the baseline's output is shared by all models.
  std::map<std::string, std::int64_t> baseline_lengths;
  // Per model, aligned with instruction_ids.
  std::map<std::string, std::vector<std::int64_t>> model_lengths;
  // Length standardizer the annotator applies for each model.
  std::map<std::string, LengthScale> true_scale;
  LabelMode label_mode = LabelMode::kSoft;
  std::uint64_t rng_seed = 0;

  const GlmParameters& params(const std::string& model_id) const;
  const LengthScale& scale(const std::string& model_id) const;
  std::size_t model_index(const std::string& model_id) const;

  // theta, phi, psi per model plus gamma per instruction.
  std::size_t n_parameters() const { return 3 * model_ids.size() + instruction_ids.size(); }

  // 100 * mean over instructions of the equal-length preference under the
  // true parameters.
  double true_lc_winrate(const std::string& model_id) const;
};

// n_models >= 2 (including the baseline), n_instructions >= 10.
SyntheticWorld make_world(int n_models, int n_instructions, std::uint64_t seed, const WorldOptions& options = {});

// Exact GLM probability under the world's true parameters.
Preference annotate(const SyntheticWorld& world, const std::string& model_id, const std::string& instruction_id,
                    const LengthPair& lengths);

// Bernoulli draw from the exact probability.
Preference annotate(const SyntheticWorld& world, const std::string& model_id, const std::string& instruction_id,
                    const LengthPair& lengths, std::mt19937_64& rng);

// One record per instruction for a model against the baseline.
std::vector<AnnotationRecord> gen_dataset(const SyntheticWorld& world, const std::string& model_id);

// Every model's dataset, baseline self-comparisons included.
std::vector<AnnotationRecord> gen_all(const SyntheticWorld& world);

// Scale each model length by the multiplier (rounded up, at least 1) and
// re-annotate. Records whose length does not change are returned untouched.
std::vector<AnnotationRecord> apply_verbosity(const SyntheticWorld& world, std::span<const AnnotationRecord> records,
                                              double length_multiplier);

struct AttackConfig {
  double win_threshold = 0.8;
  double length_window = 0.5;  // in units of the model's length sigma
  std::int64_t truncate_to = 20;
};

// Keep records that are both clearly good (true equal-length preference >=
// win_threshold) and close in length to the baseline; truncate every other
// model output and re-annotate.
std::vector<AnnotationRecord> apply_truncation_attack(const SyntheticWorld& world,
                                                      std::span<const AnnotationRecord> records,
                                                      const AttackConfig& attack = {});

}  // namespace lcwr
