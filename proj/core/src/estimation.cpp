#include "lcwr/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <tuple>
#include <utility>

#include <Eigen/Dense>

#include "lcwr/error.hpp"

namespace lcwr {
namespace {

// Record reduced to what the per-model loss needs.
struct Row {
  double y;
  double length;  // tanh feature (0 for a degenerate scale)
  double gamma;
};

// Soft-label cross-entropy of one row at linear predictor u.
double cross_entropy(double y, double u) noexcept {
  return -(y * log_logistic(u) + (1.0 - y) * log_logistic(-u));
}

struct Penalty {
  double theta_psi;
  double phi;
};

void check_single_pair(std::span<const AnnotationRecord> records) {
  for (const auto& r : records) {
    if (r.model_id != records.front().model_id || r.baseline_id != records.front().baseline_id) {
      throw InvalidArgument("records must share one (model_id, baseline_id) pair; found '" + r.model_id +
                            "' vs '" + r.baseline_id + "' alongside '" + records.front().model_id + "' vs '" +
                            records.front().baseline_id + "'");
    }
  }
}

std::vector<Row> make_rows(std::span<const AnnotationRecord> records, const GammaTable& gamma,
                           const LengthScale& scale) {
  std::vector<Row> rows;
  rows.reserve(records.size());
  for (const auto& r : records) {
    rows.push_back({r.preference.value(), scale.feature(r.lengths), gamma.at(r.instruction_id)});
  }
  return rows;
}

double rows_loss(const GlmParameters& p, std::span<const Row> rows, const Penalty& pen) {
  double sum = 0.0;
  for (const auto& row : rows) {
    sum += cross_entropy(row.y, p.theta + p.phi * row.length + p.psi * row.gamma);
  }
  const double mean = rows.empty() ? 0.0 : sum / static_cast<double>(rows.size());
  return mean + pen.theta_psi * (p.theta * p.theta + p.psi * p.psi) + pen.phi * p.phi * p.phi;
}

struct Derivatives {
  double loss = 0.0;
  Eigen::Vector3d gradient = Eigen::Vector3d::Zero();
  Eigen::Matrix3d hessian = Eigen::Matrix3d::Zero();
};

Derivatives rows_derivatives(const GlmParameters& p, std::span<const Row> rows, const Penalty& pen) {
  Derivatives d;
  for (const auto& row : rows) {
    const double u = p.theta + p.phi * row.length + p.psi * row.gamma;
    const double q = logistic(u);
    const Eigen::Vector3d x(1.0, row.length, row.gamma);
    d.loss += cross_entropy(row.y, u);
    d.gradient += (q - row.y) * x;
    d.hessian.noalias() += (q * (1.0 - q)) * x * x.transpose();
  }
  if (!rows.empty()) {
    const double n = static_cast<double>(rows.size());
    d.loss /= n;
    d.gradient /= n;
    d.hessian /= n;
  }
  const Eigen::Vector3d lambda(pen.theta_psi, pen.phi, pen.theta_psi);
  const Eigen::Vector3d v(p.theta, p.phi, p.psi);
  d.loss += lambda.dot(v.cwiseProduct(v));
  d.gradient += 2.0 * lambda.cwiseProduct(v);
  d.hessian.diagonal() += 2.0 * lambda;
  return d;
}

GlmParameters to_params(const Eigen::Vector3d& v) { return {v[0], v[1], v[2]}; }
Eigen::Vector3d to_vector(const GlmParameters& p) { return {p.theta, p.phi, p.psi}; }

struct NewtonResult {
  GlmParameters params;
  FitDiagnostics diagnostics;
};

// Damped Newton: Levenberg shift when the Hessian is not safely positive
// definite, Armijo backtracking on the step length.
NewtonResult newton_fit(std::span<const Row> rows, const Penalty& pen, const FitConfig& config,
                        const GlmParameters& start) {
  constexpr double kArmijo = 1e-4;
  Eigen::Vector3d x = to_vector(start);
  Derivatives cur = rows_derivatives(start, rows, pen);
  NewtonResult out;
  int it = 0;
  for (; it < config.max_iterations; ++it) {
    const double gnorm = cur.gradient.lpNorm<Eigen::Infinity>();
    if (gnorm <= config.gradient_tolerance) {
      out.diagnostics.converged = true;
      break;
    }
    Eigen::Vector3d step;
    double shift = 0.0;
    for (;;) {
      Eigen::Matrix3d h = cur.hessian;
      h.diagonal().array() += shift;
      Eigen::LDLT<Eigen::Matrix3d> ldlt(h);
      if (ldlt.info() == Eigen::Success && ldlt.isPositive() && (ldlt.vectorD().array() > 1e-14).all()) {
        step = -ldlt.solve(cur.gradient);
        if (step.allFinite() && step.dot(cur.gradient) < 0.0) break;
      }
      shift = shift == 0.0 ? 1e-10 : shift * 10.0;
      if (shift > 1e10) {
        step = -cur.gradient;
        break;
      }
    }
    const double slope = step.dot(cur.gradient);
    double t = 1.0;
    bool accepted = false;
    Derivatives next;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      const Eigen::Vector3d trial = x + t * step;
      next = rows_derivatives(to_params(trial), rows, pen);
      if (!std::isfinite(next.loss)) continue;
      const bool armijo = next.loss <= cur.loss + kArmijo * t * slope;
      // Near the optimum the decrease falls below rounding; a shrinking
      // gradient is then the meaningful signal.
      const bool rounding = next.loss <= cur.loss + 1e-13 * std::abs(cur.loss) &&
                            next.gradient.lpNorm<Eigen::Infinity>() < gnorm;
      if (armijo || rounding) {
        x = trial;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    cur = std::move(next);
  }
  if (!out.diagnostics.converged && cur.gradient.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
    out.diagnostics.converged = true;
  }
  // A gradient under tolerance can still leave the parameters off by
  // tolerance / curvature. Plain Newton steps converge quadratically from
  // here, so a couple of them reach rounding level.
  if (out.diagnostics.converged) {
    for (int k = 0; k < 3; ++k) {
      Eigen::LDLT<Eigen::Matrix3d> ldlt(cur.hessian);
      if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) break;
      const Eigen::Vector3d trial = x - ldlt.solve(cur.gradient);
      if (!trial.allFinite()) break;
      Derivatives next = rows_derivatives(to_params(trial), rows, pen);
      if (!(next.gradient.lpNorm<Eigen::Infinity>() < cur.gradient.lpNorm<Eigen::Infinity>())) break;
      x = trial;
      cur = std::move(next);
    }
  }
  out.params = to_params(x);
  out.diagnostics.iterations = it;
  out.diagnostics.final_loss = cur.loss;
  out.diagnostics.chosen_lambda_phi = pen.phi;
  return out;
}

double mean_cross_entropy(const GlmParameters& p, std::span<const Row> rows) {
  return rows_loss(p, rows, Penalty{0.0, 0.0});
}

void check_gamma_coverage(std::span<const AnnotationRecord> records, const GammaTable& gamma) {
  for (const auto& r : records) (void)gamma.at(r.instruction_id);
}

// ---------------------------------------------------------------------------
// Joint gamma regression.

struct JointRow {
  std::size_t model;
  std::size_t instruction;
  double y;
  double length;
};

struct JointProblem {
  std::size_t n_models = 0;
  std::size_t n_instructions = 0;
  std::vector<JointRow> rows;
  double lambda = 0.0;

  std::size_t size() const { return 2 * n_models + n_instructions; }
  std::size_t theta(std::size_t m) const { return m; }
  std::size_t phi(std::size_t m) const { return n_models + m; }
  std::size_t gamma(std::size_t x) const { return 2 * n_models + x; }

  double evaluate(const Eigen::VectorXd& w, Eigen::VectorXd& grad) const {
    grad.setZero(static_cast<Eigen::Index>(size()));
    double sum = 0.0;
    for (const auto& row : rows) {
      const auto t = static_cast<Eigen::Index>(theta(row.model));
      const auto f = static_cast<Eigen::Index>(phi(row.model));
      const auto g = static_cast<Eigen::Index>(gamma(row.instruction));
      const double u = w[t] + w[f] * row.length + w[g];
      sum += cross_entropy(row.y, u);
      const double r = logistic(u) - row.y;
      grad[t] += r;
      grad[f] += r * row.length;
      grad[g] += r;
    }
    const double n = static_cast<double>(rows.size());
    grad /= n;
    grad += 2.0 * lambda * w;
    return sum / n + lambda * w.squaredNorm();
  }
};

struct LbfgsResult {
  Eigen::VectorXd x;
  FitDiagnostics diagnostics;
};

LbfgsResult lbfgs(const JointProblem& problem, const FitConfig& config) {
  constexpr int kHistory = 10;
  constexpr double kArmijo = 1e-4;
  const auto n = static_cast<Eigen::Index>(problem.size());
  Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd g(n);
  double f = problem.evaluate(x, g);
  std::deque<std::pair<Eigen::VectorXd, Eigen::VectorXd>> history;  // (s, y)

  LbfgsResult out;
  int it = 0;
  Eigen::VectorXd g_new(n);
  for (; it < config.max_iterations; ++it) {
    const double gnorm = g.lpNorm<Eigen::Infinity>();
    if (gnorm <= config.gradient_tolerance) {
      out.diagnostics.converged = true;
      break;
    }
    // Two-loop recursion.
    Eigen::VectorXd d = -g;
    std::vector<double> alpha(history.size());
    for (std::size_t i = history.size(); i-- > 0;) {
      const auto& [s, y] = history[i];
      alpha[i] = s.dot(d) / y.dot(s);
      d -= alpha[i] * y;
    }
    if (!history.empty()) {
      const auto& [s, y] = history.back();
      d *= s.dot(y) / y.squaredNorm();
    } else {
      d /= std::max(1.0, g.norm());
    }
    for (std::size_t i = 0; i < history.size(); ++i) {
      const auto& [s, y] = history[i];
      const double beta = y.dot(d) / y.dot(s);
      d += (alpha[i] - beta) * s;
    }
    double slope = d.dot(g);
    if (!(slope < 0.0)) {
      history.clear();
      d = -g / std::max(1.0, g.norm());
      slope = d.dot(g);
    }

    double t = 1.0;
    bool accepted = false;
    Eigen::VectorXd x_new(n);
    double f_new = 0.0;
    for (int ls = 0; ls < 60; ++ls, t *= 0.5) {
      x_new = x + t * d;
      f_new = problem.evaluate(x_new, g_new);
      if (!std::isfinite(f_new)) continue;
      const bool armijo = f_new <= f + kArmijo * t * slope;
      const bool rounding = f_new <= f + 1e-13 * std::abs(f) && g_new.lpNorm<Eigen::Infinity>() < gnorm;
      if (armijo || rounding) {
        accepted = true;
        break;
      }
    }
    if (!accepted) break;

    Eigen::VectorXd s = x_new - x;
    Eigen::VectorXd y = g_new - g;
    if (s.dot(y) > 1e-16 * s.norm() * y.norm()) {
      history.emplace_back(std::move(s), std::move(y));
      if (history.size() > kHistory) history.pop_front();
    }
    x = x_new;
    g = g_new;
    f = f_new;
  }
  if (!out.diagnostics.converged && g.lpNorm<Eigen::Infinity>() <= config.gradient_tolerance) {
    out.diagnostics.converged = true;
  }
  out.x = std::move(x);
  out.diagnostics.iterations = it;
  out.diagnostics.final_loss = f;
  out.diagnostics.chosen_lambda_phi = problem.lambda;
  return out;
}

}  // namespace

AnnotationRecord AnnotationRecord::mirrored() const {
  return AnnotationRecord{instruction_id, baseline_id, model_id, lengths.swapped(),
                          Preference(1.0 - preference.value())};
}

void FitConfig::validate() const {
  if (!(lambda_theta_psi >= 0.0) || !std::isfinite(lambda_theta_psi)) {
    throw InvalidArgument("lambda_theta_psi must be a nonnegative finite number");
  }
  if (!(lambda_phi >= 0.0) || !std::isfinite(lambda_phi)) {
    throw InvalidArgument("lambda_phi must be a nonnegative finite number");
  }
  if (cv_folds < 2) throw InvalidArgument("cv_folds must be >= 2");
  if (lambda_grid.empty()) throw InvalidArgument("lambda_grid must not be empty");
  for (std::size_t i = 0; i < lambda_grid.size(); ++i) {
    if (!(lambda_grid[i] >= 0.0) || !std::isfinite(lambda_grid[i])) {
      throw InvalidArgument("lambda_grid entries must be nonnegative and finite");
    }
    if (i > 0 && !(lambda_grid[i] > lambda_grid[i - 1])) {
      throw InvalidArgument("lambda_grid must be strictly increasing");
    }
  }
  if (max_iterations < 1) throw InvalidArgument("max_iterations must be >= 1");
  if (!(gradient_tolerance > 0.0)) throw InvalidArgument("gradient_tolerance must be > 0");
}

LengthScale compute_sigma(std::span<const AnnotationRecord> records) {
  if (records.empty()) throw InvalidArgument("compute_sigma needs at least one record");
  check_single_pair(records);
  const double n = static_cast<double>(records.size());
  double mean = 0.0;
  for (const auto& r : records) mean += static_cast<double>(r.lengths.difference());
  mean /= n;
  double ss = 0.0;
  for (const auto& r : records) {
    const double dev = static_cast<double>(r.lengths.difference()) - mean;
    ss += dev * dev;
  }
  const double sigma = std::sqrt(ss / n);
  if (!(sigma > 0.0)) return LengthScale::degenerate_scale();
  return LengthScale::from_sigma(sigma);
}

double loss(const GlmParameters& params, const GammaTable& gamma, std::span<const AnnotationRecord> records,
            const LengthScale& scale, const FitConfig& config) {
  const auto rows = make_rows(records, gamma, scale);
  return rows_loss(params, rows, Penalty{config.lambda_theta_psi, config.lambda_phi});
}

LossGradient loss_gradient(const GlmParameters& params, const GammaTable& gamma,
                           std::span<const AnnotationRecord> records, const LengthScale& scale,
                           const FitConfig& config) {
  const auto rows = make_rows(records, gamma, scale);
  const auto d = rows_derivatives(params, rows, Penalty{config.lambda_theta_psi, config.lambda_phi});
  return {d.gradient[0], d.gradient[1], d.gradient[2]};
}

std::vector<std::vector<AnnotationRecord>> group_by_model(std::span<const AnnotationRecord> records) {
  std::map<std::pair<std::string, std::string>, std::vector<AnnotationRecord>> groups;
  for (const auto& r : records) groups[{r.model_id, r.baseline_id}].push_back(r);
  std::vector<std::vector<AnnotationRecord>> out;
  out.reserve(groups.size());
  for (auto& [key, group] : groups) out.push_back(std::move(group));
  return out;
}

GammaFit fit_gamma_detailed(std::span<const AnnotationRecord> records, const FitConfig& config) {
  config.validate();
  std::vector<AnnotationRecord> sorted;
  sorted.reserve(records.size());
  for (const auto& r : records) {
    if (r.baseline_id != records.front().baseline_id) {
      throw DataError("fit_gamma needs one common baseline; found '" + r.baseline_id + "' and '" +
                      records.front().baseline_id + "'");
    }
    if (!r.is_self_comparison()) sorted.push_back(r);
  }
  if (sorted.empty()) throw DataError("fit_gamma: no instructions to fit (no non-self-comparison records)");

  // Canonical order makes every floating-point reduction independent of the
  // caller's record order.
  std::sort(sorted.begin(), sorted.end(), [](const AnnotationRecord& a, const AnnotationRecord& b) {
    return std::forward_as_tuple(a.model_id, a.instruction_id, a.lengths.len_model(), a.lengths.len_baseline(),
                                 a.preference.value()) <
           std::forward_as_tuple(b.model_id, b.instruction_id, b.lengths.len_model(), b.lengths.len_baseline(),
                                 b.preference.value());
  });

  std::set<std::string> instruction_set;
  for (const auto& r : sorted) instruction_set.insert(r.instruction_id);
  const std::vector<std::string> instructions(instruction_set.begin(), instruction_set.end());
  auto instruction_index = [&](const std::string& id) {
    return static_cast<std::size_t>(std::lower_bound(instructions.begin(), instructions.end(), id) -
                                    instructions.begin());
  };

  JointProblem problem;
  problem.lambda = config.lambda_theta_psi;
  problem.n_instructions = instructions.size();
  const auto groups = group_by_model(sorted);
  problem.n_models = groups.size();
  problem.rows.reserve(sorted.size());
  for (std::size_t m = 0; m < groups.size(); ++m) {
    const LengthScale scale = compute_sigma(groups[m]);
    for (const auto& r : groups[m]) {
      problem.rows.push_back({m, instruction_index(r.instruction_id), r.preference.value(), scale.feature(r.lengths)});
    }
  }

  const LbfgsResult result = lbfgs(problem, config);
  GammaFit out;
  for (std::size_t x = 0; x < instructions.size(); ++x) {
    out.gamma.insert(instructions[x], result.x[static_cast<Eigen::Index>(problem.gamma(x))]);
  }
  out.diagnostics = result.diagnostics;
  out.n_parameters = problem.size();
  return out;
}

GammaTable fit_gamma(std::span<const AnnotationRecord> records, const FitConfig& config) {
  return fit_gamma_detailed(records, config).gamma;
}

CvResult select_lambda_phi_cv(std::span<const AnnotationRecord> records, const GammaTable& gamma,
                              const FitConfig& config) {
  config.validate();
  if (records.size() < static_cast<std::size_t>(config.cv_folds)) {
    throw InvalidArgument("cross-validation needs at least cv_folds (" + std::to_string(config.cv_folds) +
                          ") records, got " + std::to_string(records.size()));
  }
  check_single_pair(records);
  check_gamma_coverage(records, gamma);
  const LengthScale scale = compute_sigma(records);

  // Folds over instruction ids, so a held-out instruction is never trained on.
  std::set<std::string> unique_ids;
  for (const auto& r : records) unique_ids.insert(r.instruction_id);
  std::vector<std::string> ids(unique_ids.begin(), unique_ids.end());
  std::mt19937_64 rng(config.rng_seed);
  std::shuffle(ids.begin(), ids.end(), rng);
  std::map<std::string, int> fold_of;
  for (std::size_t i = 0; i < ids.size(); ++i) fold_of[ids[i]] = static_cast<int>(i % config.cv_folds);

  std::vector<std::vector<Row>> train(config.cv_folds);
  std::vector<std::vector<Row>> test(config.cv_folds);
  for (const auto& r : records) {
    const Row row{r.preference.value(), scale.feature(r.lengths), gamma.at(r.instruction_id)};
    const int fold = fold_of.at(r.instruction_id);
    for (int k = 0; k < config.cv_folds; ++k) (k == fold ? test[k] : train[k]).push_back(row);
  }

  CvResult out;
  double best = std::numeric_limits<double>::infinity();
  for (const double lambda : config.lambda_grid) {
    double total = 0.0;
    int used = 0;
    for (int k = 0; k < config.cv_folds; ++k) {
      if (train[k].empty() || test[k].empty()) continue;
      const auto fit = newton_fit(train[k], Penalty{config.lambda_theta_psi, lambda}, config, GlmParameters{});
      total += mean_cross_entropy(fit.params, test[k]);
      ++used;
    }
    const double mean = total / used;
    out.heldout_loss.push_back(mean);
    // Ascending grid: "<=" breaks ties toward the larger lambda.
    if (mean <= best) {
      best = mean;
      out.lambda_phi = lambda;
    }
  }
  return out;
}

ModelFit fit_model_from(std::span<const AnnotationRecord> records, const GammaTable& gamma,
                        const FitConfig& config, const GlmParameters& start) {
  config.validate();
  if (records.empty()) throw InvalidArgument("fit_model needs at least one record");
  check_single_pair(records);
  check_gamma_coverage(records, gamma);
  if (!start.is_finite()) throw InvalidArgument("starting parameters must be finite");

  ModelFit fit;
  fit.model_id = records.front().model_id;
  fit.baseline_id = records.front().baseline_id;
  fit.scale = compute_sigma(records);

  const double lambda_phi = config.cross_validate ? select_lambda_phi_cv(records, gamma, config).lambda_phi
                                                  : config.lambda_phi;
  const auto rows = make_rows(records, gamma, fit.scale);
  const auto result = newton_fit(rows, Penalty{config.lambda_theta_psi, lambda_phi}, config, start);
  fit.params = result.params;
  fit.diagnostics = result.diagnostics;
  return fit;
}

ModelFit fit_model(std::span<const AnnotationRecord> records, const GammaTable& gamma, const FitConfig& config) {
  return fit_model_from(records, gamma, config, GlmParameters{});
}

}  // namespace lcwr
