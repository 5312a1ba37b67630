#include <cmath>

#include <gtest/gtest.h>

#include "lcwr/error.hpp"
#include "lcwr/metrics.hpp"
#include "lcwr/synthetic.hpp"
#include "support.hpp"

namespace lcwr {
namespace {

TEST(MakeWorld, Deterministic) {
  const auto a = make_world(5, 40, 77);
  const auto b = make_world(5, 40, 77);
  EXPECT_EQ(a.model_ids, b.model_ids);
  EXPECT_EQ(a.true_params, b.true_params);
  EXPECT_EQ(a.true_gamma, b.true_gamma);
  EXPECT_EQ(a.model_lengths, b.model_lengths);
  EXPECT_EQ(a.baseline_lengths, b.baseline_lengths);
  EXPECT_EQ(gen_all(a), gen_all(b));
  const auto c = make_world(5, 40, 78);
  EXPECT_NE(a.true_gamma, c.true_gamma);
}

TEST(MakeWorld, BaselineAbsorbed) {
  const auto w = make_world(4, 20, 1);
  EXPECT_EQ(w.model_ids.front(), w.baseline_id);
  EXPECT_EQ(w.params(w.baseline_id).theta, 0.0);
  EXPECT_EQ(w.params(w.baseline_id).psi, 0.0);
}

TEST(MakeWorld, ParameterCount) {
  const auto w = make_world(8, 200, 2);
  EXPECT_EQ(w.n_parameters(), 8u * 3u + 200u);
  EXPECT_EQ(w.true_params.size(), 8u);
  EXPECT_EQ(w.true_gamma.size(), 200u);
}

TEST(MakeWorld, GammaCentered) {
  const auto w = make_world(3, 150, 3);
  double sum = 0.0;
  for (const auto& [id, g] : w.true_gamma) sum += g;
  EXPECT_NEAR(sum, 0.0, 1e-10);
}

TEST(MakeWorld, RejectsTinyWorlds) {
  EXPECT_THROW(make_world(1, 50, 0), InvalidArgument);
  EXPECT_THROW(make_world(3, 5, 0), InvalidArgument);
}

TEST(Annotate, BaselineAgainstItself) {
  const auto w = make_world(3, 20, 4);
  EXPECT_EQ(annotate(w, w.baseline_id, w.instruction_ids[3], LengthPair(800, 800)).value(), 0.5);
}

TEST(Annotate, LongerIsPreferred) {
  const auto w = make_world(3, 20, 5);
  const auto& id = w.model_ids[1];
  ASSERT_GT(w.params(id).phi, 0.0);
  const auto& x = w.instruction_ids[0];
  const double equal = annotate(w, id, x, LengthPair(1000, 1000)).value();
  EXPECT_GT(annotate(w, id, x, LengthPair(1400, 1000)).value(), equal);
  EXPECT_EQ(equal, lc_predict(w.params(id), w.true_gamma.at(x)));
}

TEST(Annotate, HardLabelsConcentrate) {
  const auto w = make_world(3, 20, 6);
  const auto& id = w.model_ids[2];
  const auto& x = w.instruction_ids[7];
  const LengthPair lengths(1700, 1200);
  const double p = annotate(w, id, x, lengths).value();
  std::mt19937_64 rng(8);
  const int n = 100000;
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double y = annotate(w, id, x, lengths, rng).value();
    ASSERT_TRUE(y == 0.0 || y == 1.0);
    sum += y;
  }
  const double se = std::sqrt(p * (1.0 - p) / n);
  EXPECT_NEAR(sum / n, p, 3.0 * se);
}

TEST(GenDataset, OneRecordPerInstruction) {
  const auto w = make_world(4, 120, 7);
  for (const auto& id : w.model_ids) {
    const auto rs = gen_dataset(w, id);
    ASSERT_EQ(rs.size(), 120u);
    for (const auto& r : rs) {
      EXPECT_EQ(r.model_id, id);
      EXPECT_EQ(r.baseline_id, w.baseline_id);
      EXPECT_GE(r.lengths.len_model(), 1);
      EXPECT_GE(r.preference.value(), 0.0);
      EXPECT_LE(r.preference.value(), 1.0);
      if (id == w.baseline_id) {
        EXPECT_EQ(r.preference.value(), 0.5);
      }
    }
  }
  EXPECT_EQ(gen_all(w).size(), 4u * 120u);
}

TEST(GenDataset, LengthSpreadMatchesDistribution) {
  const auto w = make_world(5, 800, 8);
  const auto& base = w.length_model.at(w.baseline_id);
  for (const auto& id : w.model_ids) {
    if (id == w.baseline_id) continue;
    std::vector<double> diffs;
    for (const auto& r : gen_dataset(w, id)) diffs.push_back(static_cast<double>(r.lengths.difference()));
    const double implied = std::sqrt(w.length_model.at(id).variance() + base.variance());
    EXPECT_NEAR(testing::population_std(diffs) / implied, 1.0, 0.2) << id;
  }
}

TEST(GenDataset, HardLabelMode) {
  WorldOptions o;
  o.label_mode = LabelMode::kHard;
  const auto w = make_world(3, 50, 9, o);
  for (const auto& r : gen_dataset(w, w.model_ids[1])) {
    EXPECT_TRUE(r.preference.value() == 0.0 || r.preference.value() == 1.0);
  }
  EXPECT_EQ(gen_dataset(w, w.model_ids[1]), gen_dataset(w, w.model_ids[1]));
}

TEST(Verbosity, UnitMultiplierIsIdentity) {
  const auto w = make_world(3, 60, 10);
  const auto rs = gen_dataset(w, w.model_ids[1]);
  EXPECT_EQ(apply_verbosity(w, rs, 1.0), rs);
}

TEST(Verbosity, LongerRaisesRawWinrate) {
  const auto w = make_world(4, 300, 11);
  for (const auto& id : w.model_ids) {
    if (id == w.baseline_id) continue;
    const auto rs = gen_dataset(w, id);
    EXPECT_GT(raw_winrate(apply_verbosity(w, rs, 1.5)), raw_winrate(rs)) << id;
  }
}

TEST(Verbosity, InverseRestoresLengths) {
  const auto w = make_world(3, 200, 12);
  const auto rs = gen_dataset(w, w.model_ids[1]);
  for (double m : {0.5, 1.5, 3.0}) {
    const auto back = apply_verbosity(w, apply_verbosity(w, rs, m), 1.0 / m);
    for (std::size_t i = 0; i < rs.size(); ++i) {
      EXPECT_LE(std::abs(back[i].lengths.len_model() - rs[i].lengths.len_model()), 1) << m;
      EXPECT_EQ(back[i].lengths.len_baseline(), rs[i].lengths.len_baseline());
    }
  }
}

TEST(TruncationAttack, UnreachableThresholdTruncatesAll) {
  const auto w = make_world(3, 80, 13);
  AttackConfig a;
  a.win_threshold = 1.0;
  for (const auto& r : apply_truncation_attack(w, gen_dataset(w, w.model_ids[1]), a)) {
    EXPECT_EQ(r.lengths.len_model(), std::min<std::int64_t>(20, r.lengths.len_model()));
    EXPECT_LE(r.lengths.len_model(), 20);
  }
}

TEST(TruncationAttack, KeptRecordsUnchanged) {
  const auto w = make_world(3, 80, 14);
  const auto rs = gen_dataset(w, w.model_ids[2]);
  AttackConfig a;
  a.win_threshold = 0.0;
  a.length_window = 1e9;
  EXPECT_EQ(apply_truncation_attack(w, rs, a), rs);
}

TEST(TruncationAttack, KeepsOnlyGoodCloseOutputs) {
  const auto w = make_world(3, 400, 15);
  const auto& id = w.model_ids[1];
  const auto rs = gen_dataset(w, id);
  const AttackConfig a;
  const auto out = apply_truncation_attack(w, rs, a);
  for (std::size_t i = 0; i < rs.size(); ++i) {
    const double q = lc_predict(w.params(id), w.true_gamma.at(rs[i].instruction_id));
    const bool close = std::abs(static_cast<double>(rs[i].lengths.difference())) <= 0.5 * w.scale(id).sigma;
    if (q >= a.win_threshold && close) {
      EXPECT_EQ(out[i], rs[i]);
    } else {
      EXPECT_LE(out[i].lengths.len_model(), a.truncate_to);
    }
  }
}

double recovery_error(int n_instructions) {
  FitConfig c;
  c.lambda_theta_psi = 1e-6;
  c.lambda_phi = 1e-6;
  WorldOptions o;
  o.label_mode = LabelMode::kHard;
  double total = 0.0;
  int count = 0;
  for (std::uint64_t seed : {101, 102, 103}) {
    const auto w = make_world(4, n_instructions, seed, o);
    const auto gamma = fit_gamma(gen_all(w), c);
    for (const auto& id : w.model_ids) {
      if (id == w.baseline_id) continue;
      const auto fit = fit_model(gen_dataset(w, id), gamma, c);
      const auto& t = w.params(id);
      total += std::abs(fit.params.theta - t.theta) + std::abs(fit.params.phi - t.phi) +
               std::abs(fit.params.psi - t.psi);
      ++count;
    }
  }
  return total / count;
}

TEST(Recovery, ErrorShrinksWithInstructions) {
  const double e100 = recovery_error(100);
  const double e400 = recovery_error(400);
  const double e1600 = recovery_error(1600);
  EXPECT_GT(e100, e400);
  EXPECT_GT(e400, e1600);
}

}  // namespace
}  // namespace lcwr
