#pragma once

// Logistic preference model with model, length and instruction terms:
//
//   q = logistic(theta + phi * tanh(dlen / sigma) + psi * gamma_x)
//
// where dlen = len_model - len_baseline and the baseline's own theta and psi
// are absorbed into the evaluated model's (so they are implicitly zero).

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace lcwr {

// Probability in [0, 1] that the evaluated model's output is preferred.
class Preference {
 public:
  explicit Preference(double value);

  double value() const noexcept { return value_; }

  friend bool operator==(const Preference&, const Preference&) = default;

 private:
  double value_;
};

struct GlmParameters {
  double theta = 0.0;  // model quality (log-odds vs. the baseline)
  double phi = 0.0;    // length effect
  double psi = 0.0;    // sensitivity to instruction difficulty

  bool is_finite() const noexcept;

  friend bool operator==(const GlmParameters&, const GlmParameters&) = default;
};

// Output lengths in characters; both must be at least 1.
class LengthPair {
 public:
  LengthPair(std::int64_t len_model, std::int64_t len_baseline);

  std::int64_t len_model() const noexcept { return len_model_; }
  std::int64_t len_baseline() const noexcept { return len_baseline_; }
  std::int64_t difference() const noexcept { return len_model_ - len_baseline_; }

  // Same pair seen from the baseline's side.
  LengthPair swapped() const noexcept { return LengthPair(len_baseline_, len_model_, Unchecked{}); }

  friend bool operator==(const LengthPair&, const LengthPair&) = default;

 private:
  struct Unchecked {};
  LengthPair(std::int64_t m, std::int64_t b, Unchecked) noexcept : len_model_(m), len_baseline_(b) {}

  std::int64_t len_model_;
  std::int64_t len_baseline_;
};

// Per-instruction difficulty values shared by every model.
class GammaTable {
 public:
  GammaTable() = default;

  // Throws InvalidArgument on a duplicate id or a non-finite value.
  void insert(const std::string& instruction_id, double value);

  // Throws DataError when the id is absent. There is no default value.
  double at(const std::string& instruction_id) const;

  bool contains(const std::string& instruction_id) const;
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }

  std::vector<std::string> instruction_ids() const;

  auto begin() const noexcept { return entries_.begin(); }
  auto end() const noexcept { return entries_.end(); }

  friend bool operator==(const GammaTable&, const GammaTable&) = default;

 private:
  std::map<std::string, double> entries_;
};

// Standardizer for the length difference. A degenerate scale comes from a
// zero-variance set of differences; the length feature is then identically 0
// and sigma holds the sentinel 1.
struct LengthScale {
  double sigma = 1.0;
  bool degenerate = false;

  static LengthScale from_sigma(double sigma);
  static LengthScale degenerate_scale() noexcept { return {1.0, true}; }

  // tanh(dlen / sigma), or 0 for a degenerate scale.
  double feature(const LengthPair& lengths) const;

  friend bool operator==(const LengthScale&, const LengthScale&) = default;
};

double logistic(double u) noexcept;

// log(logistic(u)) without cancellation for large |u|.
double log_logistic(double u) noexcept;

// tanh((len_model - len_baseline) / sigma). Throws InvalidArgument if
// sigma <= 0 or is not finite.
double normalize_length_diff(const LengthPair& lengths, double sigma);

double linear_predictor(const GlmParameters& params, double gamma_x, double length_feature) noexcept;

double predict_preference(const GlmParameters& params, double gamma_x, const LengthPair& lengths,
                          double sigma);
double predict_preference(const GlmParameters& params, double gamma_x, const LengthPair& lengths,
                          const LengthScale& scale);

// Counterfactual preference with the length difference set to zero.
double lc_predict(const GlmParameters& params, double gamma_x) noexcept;

}  // namespace lcwr
