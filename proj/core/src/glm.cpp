#include "lcwr/glm.hpp"

#include <cmath>
#include <string>

#include "lcwr/error.hpp"

namespace lcwr {

Preference::Preference(double value) : value_(value) {
  if (!(value >= 0.0 && value <= 1.0)) {
    throw InvalidArgument("preference must lie in [0, 1], got " + std::to_string(value));
  }
}

bool GlmParameters::is_finite() const noexcept {
  return std::isfinite(theta) && std::isfinite(phi) && std::isfinite(psi);
}

LengthPair::LengthPair(std::int64_t len_model, std::int64_t len_baseline)
    : len_model_(len_model), len_baseline_(len_baseline) {
  if (len_model < 1 || len_baseline < 1) {
    throw InvalidArgument("output lengths must be >= 1 (got " + std::to_string(len_model) + ", " +
                          std::to_string(len_baseline) + ")");
  }
}

void GammaTable::insert(const std::string& instruction_id, double value) {
  if (!std::isfinite(value)) {
    throw InvalidArgument("gamma for instruction '" + instruction_id + "' is not finite");
  }
  if (!entries_.emplace(instruction_id, value).second) {
    throw InvalidArgument("duplicate gamma entry for instruction '" + instruction_id + "'");
  }
}

double GammaTable::at(const std::string& instruction_id) const {
  auto it = entries_.find(instruction_id);
  if (it == entries_.end()) {
    throw DataError("no gamma entry for instruction '" + instruction_id + "'");
  }
  return it->second;
}

bool GammaTable::contains(const std::string& instruction_id) const {
  return entries_.count(instruction_id) != 0;
}

std::vector<std::string> GammaTable::instruction_ids() const {
  std::vector<std::string> ids;
  ids.reserve(entries_.size());
  for (const auto& [id, value] : entries_) ids.push_back(id);
  return ids;
}

LengthScale LengthScale::from_sigma(double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("length scale sigma must be positive and finite");
  }
  return {sigma, false};
}

double LengthScale::feature(const LengthPair& lengths) const {
  if (degenerate) return 0.0;
  return normalize_length_diff(lengths, sigma);
}

double logistic(double u) noexcept {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double log_logistic(double u) noexcept {
  // log(1 / (1 + e^-u)) = -softplus(-u)
  if (u >= 0.0) return -std::log1p(std::exp(-u));
  return u - std::log1p(std::exp(u));
}

double normalize_length_diff(const LengthPair& lengths, double sigma) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw InvalidArgument("sigma must be positive and finite");
  }
  return std::tanh(static_cast<double>(lengths.difference()) / sigma);
}

double linear_predictor(const GlmParameters& params, double gamma_x, double length_feature) noexcept {
  return params.theta + params.phi * length_feature + params.psi * gamma_x;
}

double predict_preference(const GlmParameters& params, double gamma_x, const LengthPair& lengths,
                          double sigma) {
  return logistic(linear_predictor(params, gamma_x, normalize_length_diff(lengths, sigma)));
}

double predict_preference(const GlmParameters& params, double gamma_x, const LengthPair& lengths,
                          const LengthScale& scale) {
  return logistic(linear_predictor(params, gamma_x, scale.feature(lengths)));
}

double lc_predict(const GlmParameters& params, double gamma_x) noexcept {
  return logistic(params.theta + params.psi * gamma_x);
}

}  // namespace lcwr
