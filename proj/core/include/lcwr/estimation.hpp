#pragma once

// Fitting the preference GLM.
//
// Two stages, matching how a leaderboard is maintained:
//   1. fit_gamma: one joint regression over every model's annotations with the
//      instruction sensitivity fixed to 1. Only the per-instruction
//      difficulties are kept.
//   2. fit_model: a separate three-parameter regression per model against the
//      fixed baseline, reusing the gamma table. A model's fit never depends on
//      any other model's data.

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "lcwr/glm.hpp"

namespace lcwr {

struct AnnotationRecord {
  std::string instruction_id;
  std::string model_id;
  std::string baseline_id;
  LengthPair lengths;
  Preference preference;

  // Baseline compared against itself; expected preference 0.5.
  bool is_self_comparison() const noexcept { return model_id == baseline_id; }

  // The same comparison seen from the baseline's side.
  AnnotationRecord mirrored() const;

  friend bool operator==(const AnnotationRecord&, const AnnotationRecord&) = default;
};

inline constexpr double kDefaultLambdaThetaPsi = 1e-4;
inline constexpr double kDefaultLambdaPhi = 1e-3;

struct FitConfig {
  double lambda_theta_psi = kDefaultLambdaThetaPsi;  // L2 weight on theta and psi
  double lambda_phi = kDefaultLambdaPhi;             // L2 weight on phi when not cross-validating
  bool cross_validate = false;                       // pick lambda_phi from lambda_grid
  int cv_folds = 5;
  std::vector<double> lambda_grid{1e-4, 1e-3, 1e-2, 1e-1, 1.0};
  int max_iterations = 1000;
  double gradient_tolerance = 1e-8;
  std::uint64_t rng_seed = 0;

  // Throws InvalidArgument when any invariant is broken.
  void validate() const;

  friend bool operator==(const FitConfig&, const FitConfig&) = default;
};

struct FitDiagnostics {
  bool converged = false;
  int iterations = 0;
  double final_loss = 0.0;
  double chosen_lambda_phi = 0.0;

  friend bool operator==(const FitDiagnostics&, const FitDiagnostics&) = default;
};

struct ModelFit {
  std::string model_id;
  std::string baseline_id;
  GlmParameters params;
  LengthScale scale;
  FitDiagnostics diagnostics;

  friend bool operator==(const ModelFit&, const ModelFit&) = default;
};

struct LossGradient {
  double d_theta = 0.0;
  double d_phi = 0.0;
  double d_psi = 0.0;
};

// Population standard deviation of len_model - len_baseline. Zero variance
// (including a single record) yields the degenerate scale. Records must share
// one (model, baseline) pair.
LengthScale compute_sigma(std::span<const AnnotationRecord> records);

// Mean soft-label cross-entropy plus
//   lambda_theta_psi * (theta^2 + psi^2) + config.lambda_phi * phi^2.
// With no records only the penalty remains.
double loss(const GlmParameters& params, const GammaTable& gamma, std::span<const AnnotationRecord> records,
            const LengthScale& scale, const FitConfig& config);

LossGradient loss_gradient(const GlmParameters& params, const GammaTable& gamma,
                           std::span<const AnnotationRecord> records, const LengthScale& scale,
                           const FitConfig& config);

struct GammaFit {
  GammaTable gamma;
  FitDiagnostics diagnostics;
  // theta_m and phi_m per model plus one gamma per instruction.
  std::size_t n_parameters = 0;
};

// Joint regression over all models (instruction term entering as 1 * gamma_x).
// Self-comparison rows carry no information about gamma and are skipped.
// The result does not depend on record order.
GammaFit fit_gamma_detailed(std::span<const AnnotationRecord> records, const FitConfig& config);
GammaTable fit_gamma(std::span<const AnnotationRecord> records, const FitConfig& config);

struct CvResult {
  double lambda_phi = 0.0;
  // Mean held-out (unregularized) cross-entropy, aligned with lambda_grid.
  std::vector<double> heldout_loss;
};

// K-fold selection of lambda_phi with folds drawn over instruction ids.
CvResult select_lambda_phi_cv(std::span<const AnnotationRecord> records, const GammaTable& gamma,
                              const FitConfig& config);

// Per-model fit by damped Newton. Non-convergence is reported in the
// diagnostics, not thrown.
ModelFit fit_model(std::span<const AnnotationRecord> records, const GammaTable& gamma, const FitConfig& config);

// Fits with an explicit starting point; fit_model starts from zero.
ModelFit fit_model_from(std::span<const AnnotationRecord> records, const GammaTable& gamma,
                        const FitConfig& config, const GlmParameters& start);

// Split records by (model_id, baseline_id), preserving record order within a
// group; groups come back sorted by model id.
std::vector<std::vector<AnnotationRecord>> group_by_model(std::span<const AnnotationRecord> records);

}  // namespace lcwr
