#pragma once

// Independent reference computations for the unit and acceptance tests.
// Nothing here calls into the library's numerics; the oracles are written the
// plain way on purpose.

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "lcwr/estimation.hpp"
#include "lcwr/glm.hpp"

namespace lcwr::testing {

inline AnnotationRecord record(std::string instruction, std::string model, std::string baseline,
                               std::int64_t len_model, std::int64_t len_baseline, double preference) {
  return {std::move(instruction), std::move(model), std::move(baseline), LengthPair(len_model, len_baseline),
          Preference(preference)};
}

// Naive mean cross-entropy plus penalties, with q formed directly and the
// per-record terms summed in a plain loop. Only valid for moderate |u|.
inline double naive_loss(const GlmParameters& p, const GammaTable& gamma, const std::vector<AnnotationRecord>& rs,
                         double sigma, bool degenerate, const FitConfig& c) {
  double total = 0.0;
  for (const auto& r : rs) {
    const double d = static_cast<double>(r.lengths.len_model() - r.lengths.len_baseline());
    const double f = degenerate ? 0.0 : std::tanh(d / sigma);
    const double u = p.theta + p.phi * f + p.psi * gamma.at(r.instruction_id);
    const double q = 1.0 / (1.0 + std::exp(-u));
    const double y = r.preference.value();
    total += -(y * std::log(q) + (1.0 - y) * std::log(1.0 - q));
  }
  const double mean = rs.empty() ? 0.0 : total / static_cast<double>(rs.size());
  return mean + c.lambda_theta_psi * (p.theta * p.theta + p.psi * p.psi) + c.lambda_phi * p.phi * p.phi;
}

// A small random single-model problem.
struct RandomProblem {
  GammaTable gamma;
  std::vector<AnnotationRecord> records;
  GlmParameters params;
};

inline RandomProblem random_problem(std::mt19937_64& rng, int n_instructions) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> sym(-1.5, 1.5);
  std::uniform_int_distribution<std::int64_t> len(50, 3000);
  RandomProblem p;
  for (int i = 0; i < n_instructions; ++i) {
    const std::string id = "x" + std::to_string(i);
    p.gamma.insert(id, sym(rng));
    p.records.push_back(record(id, "m", "b", len(rng), len(rng), unit(rng)));
  }
  p.params = {sym(rng), sym(rng), sym(rng)};
  return p;
}

// Ranks by direct counting: 1 + #smaller + (#equal others) / 2.
inline std::vector<double> counting_ranks(const std::vector<double>& v) {
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    double smaller = 0.0, equal = 0.0;
    for (std::size_t j = 0; j < v.size(); ++j) {
      if (j == i) continue;
      if (v[j] < v[i]) smaller += 1.0;
      if (v[j] == v[i]) equal += 1.0;
    }
    r[i] = 1.0 + smaller + 0.5 * equal;
  }
  return r;
}

// Textbook Pearson correlation with two-pass means.
inline double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

inline double brute_spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(counting_ranks(x), counting_ranks(y));
}

inline bool all_equal(const std::vector<double>& v) {
  for (double x : v) {
    if (x != v.front()) return false;
  }
  return true;
}

// Exact bootstrap p-value for three models: every one of the 27 equally likely
// index triples, minus those that leave a sequence constant, with equal
// correlations counted as one half.
inline double enumerate_pvalue3(const std::vector<double>& a, const std::vector<double>& b,
                                const std::vector<double>& arena) {
  double hits = 0.0, valid = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      for (int k = 0; k < 3; ++k) {
        const int idx[3] = {i, j, k};
        std::vector<double> ra, rb, rr;
        for (int t : idx) {
          ra.push_back(a[t]);
          rb.push_back(b[t]);
          rr.push_back(arena[t]);
        }
        if (all_equal(ra) || all_equal(rb) || all_equal(rr)) continue;
        valid += 1.0;
        const double ca = brute_spearman(ra, rr);
        const double cb = brute_spearman(rb, rr);
        if (ca < cb) hits += 1.0;
        else if (ca == cb) hits += 0.5;
      }
    }
  }
  return hits / valid;
}

inline double population_std(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m += x;
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace lcwr::testing
