#include <cmath>
#include <map>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "nhp/error.hpp"
#include "nhp/trainer.hpp"
#include "oracles.hpp"
#include "tiny.hpp"

using namespace nhp;

TEST(TrainingSet, OneExamplePerCrimeWithPriors) {
  const auto inst = tiny::make(3);
  const auto& ex = inst.set.examples();
  ASSERT_EQ(ex.size(), 4u);
  EXPECT_EQ(inst.set.groups().size(), 2u);
  EXPECT_EQ(inst.set.hinge_terms(), 4u * 24u);
  for (const TrainingExample& e : ex) {
    ASSERT_FALSE(e.priors.empty());
    double latest = -1e300;
    for (const PriorHit& h : e.priors) latest = std::max(latest, h.t);
    EXPECT_EQ(e.t, latest + 1.0);
    const BackgroundField want =
        fit_background(inst.grid(), inst.store, e.t, 30.0, inst.grid().cell_side_m(), e.crime_id);
    EXPECT_EQ(e.background.mu, want.mu);
  }
  EXPECT_EQ(ex[0].priors.size(), 1u);
  EXPECT_EQ(ex[1].priors.size(), 2u);
}

TEST(TrainingSet, RejectsMalformedExamples) {
  TrainingExample e;
  e.background.mu.assign(4, 0.25);
  EXPECT_THROW(TrainingSet::from_examples({e}, 4), Error);
  e.priors.push_back({0, 0.0, {}});
  e.true_cell = 4;
  EXPECT_THROW(TrainingSet::from_examples({e}, 4), Error);
}

TEST(Objective, MatchesTripleLoopOracle) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto inst = tiny::make(trial);
    const KernelParams p = tiny::random_params(rng, 2);
    const double lambda = 0.1 * trial;
    const double got = full_objective(p, inst.set, *inst.ctx, lambda);
    const double want = oracle::objective(p, inst.set, inst.grid(), inst.w(), lambda);
    EXPECT_NEAR(got, want, 1e-10 * (1.0 + std::fabs(want)));
  }
}

TEST(Objective, PropertyConvexInBetaForFixedOffsets) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto inst = tiny::make(11, 3);
  for (int trial = 0; trial < 200; ++trial) {
    KernelParams a = tiny::random_params(rng, 3);
    KernelParams b = tiny::random_params(rng, 3);
    b.c = a.c;
    b.d = a.d;
    const double s = u(rng);
    KernelParams m = a;
    for (std::size_t k = 0; k < m.beta.size(); ++k) m.beta[k] = s * a.beta[k] + (1 - s) * b.beta[k];
    const double fa = full_objective(a, inst.set, *inst.ctx, 0.3);
    const double fb = full_objective(b, inst.set, *inst.ctx, 0.3);
    const double fm = full_objective(m, inst.set, *inst.ctx, 0.3);
    EXPECT_LE(fm, s * fa + (1 - s) * fb + 1e-9 * (1.0 + std::fabs(fa) + std::fabs(fb)));
  }
}

TEST(Sampler, NeverPicksTheTrueCellAndIsUniform) {
  const auto inst = tiny::make(2);
  Rng rng(99);
  std::map<std::pair<std::size_t, CellIndex>, int> counts;
  const int draws = 192000;
  for (int k = 0; k < draws; ++k) {
    const Triple t = sample_triple(rng, inst.set);
    ASSERT_NE(t.cell, inst.set.examples()[t.example].true_cell);
    ++counts[{t.example, t.cell}];
  }
  // Equal group sizes: every eligible (example, cell) pair has probability 1/96.
  EXPECT_EQ(counts.size(), 96u);
  const double expect = draws / 96.0;
  double chi2 = 0.0;
  for (const auto& [key, n] : counts) chi2 += (n - expect) * (n - expect) / expect;
  // 95 degrees of freedom; 150 is far in the tail.
  EXPECT_LT(chi2, 150.0);
}

TEST(Sampler, ExactExpectationIsTheScaledFullGradient) {
  std::mt19937_64 rng(4);
  const auto inst = tiny::make(8);
  const auto& set = inst.set;
  for (int trial = 0; trial < 10; ++trial) {
    const KernelParams p = tiny::random_params(rng, 2);
    std::vector<double> expect(p.flat_size(), 0.0);
    const double series_p = 1.0 / static_cast<double>(set.groups().size());
    for (const auto& group : set.groups()) {
      for (std::size_t e : group) {
        const double pe = series_p / static_cast<double>(group.size()) / static_cast<double>(set.cells() - 1);
        for (CellIndex l = 0; l < set.cells(); ++l) {
          if (l == set.examples()[e].true_cell) continue;
          std::vector<double> g(p.flat_size(), 0.0);
          add_triple_gradient(p, set, *inst.ctx, {e, l}, g);
          for (std::size_t k = 0; k < g.size(); ++k) expect[k] += pe * g[k];
        }
      }
    }
    const auto full = oracle::objective_gradient(p, set, inst.grid(), inst.w());
    for (std::size_t k = 0; k < full.size(); ++k) {
      const double want = full[k] / static_cast<double>(set.hinge_terms());
      EXPECT_NEAR(expect[k], want, 1e-8 * (1.0 + std::fabs(want)));
    }
  }
}

TEST(Sgd, ProjectionKeepsOffsetsAboveFloor) {
  const auto inst = tiny::make(4);
  TrainConfig cfg;
  cfg.learning_rate = 50.0;
  cfg.floor_c = 0.2;
  cfg.floor_d = 0.3;
  TrainState st = TrainState::start({0.25, 0.35, {5.0, 0.0, 0.0}});
  Rng rng(1);
  for (int k = 0; k < 200; ++k) {
    sgd_step(st, cfg, sample_triple(rng, inst.set), inst.set, *inst.ctx);
    ASSERT_GE(st.params.c, 0.2);
    ASSERT_GE(st.params.d, 0.3);
  }
  EXPECT_EQ(st.iteration, 200u);
}

TEST(Sgd, ZeroLossStepOnlyCarriesMomentum) {
  const auto inst = tiny::make(4);
  const auto& ex = inst.set.examples()[0];
  TrainConfig cfg;
  cfg.lambda_beta = 0.0;
  // With β = 0 the risk is the background, so any cell below the true cell has zero hinge.
  CellIndex other = ex.true_cell;
  for (CellIndex l = 0; l < inst.set.cells(); ++l) {
    if (l != ex.true_cell && ex.background.mu[l] <= ex.background.mu[ex.true_cell]) other = l;
  }
  ASSERT_NE(other, ex.true_cell);
  TrainState st = TrainState::start({1.0, 1.0, {0.0, 0.0, 0.0}});
  st.velocity = {0.1, 0.0, 0.0, 0.0, 0.0};
  sgd_step(st, cfg, {0, other}, inst.set, *inst.ctx);
  EXPECT_DOUBLE_EQ(st.params.c, 1.0 + 0.9 * 0.1);
  EXPECT_EQ(st.params.d, 1.0);
  EXPECT_EQ(st.params.beta, (std::vector<double>{0.0, 0.0, 0.0}));
  EXPECT_EQ(st.loss_ma, 0.0);
}

TEST(Train, DeterministicPerSeed) {
  const auto inst = tiny::make(6);
  TrainConfig cfg;
  cfg.iterations = 3000;
  cfg.log_every = 500;
  const TrainResult a = train(cfg, inst.set, *inst.ctx);
  const TrainResult b = train(cfg, inst.set, *inst.ctx);
  EXPECT_EQ(a.params, b.params);
  EXPECT_EQ(a.log.size(), 6u);
  EXPECT_EQ(a.log.back().iter, 3000u);
  cfg.seed = 2;
  EXPECT_NE(train(cfg, inst.set, *inst.ctx).params, a.params);
}

TEST(Train, FrozenBetaLearnsOnlyOffsets) {
  const auto inst = tiny::make(6);
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.train_beta = false;
  cfg.init = KernelParams::initial(2);
  const TrainResult r = train(cfg, inst.set, *inst.ctx);
  EXPECT_EQ(r.params.beta, KernelParams::initial(2).beta);
}

TEST(Train, ReducesTheObjectiveOnAverage) {
  int improved = 0;
  for (int seed = 0; seed < 5; ++seed) {
    const auto inst = tiny::make(50 + seed);
    TrainConfig cfg;
    cfg.iterations = 5000;
    cfg.lambda_beta = 0.0;
    const double before = full_objective(KernelParams::initial(2), inst.set, *inst.ctx, 0.0);
    const double after = full_objective(train(cfg, inst.set, *inst.ctx).params, inst.set, *inst.ctx, 0.0);
    improved += after < before;
  }
  EXPECT_GE(improved, 4);
}

TEST(Train, ConfigValidationAndDimensionChecks) {
  const auto inst = tiny::make(6);
  TrainConfig cfg;
  cfg.momentum = 1.0;
  EXPECT_THROW(train(cfg, inst.set, *inst.ctx), Error);
  cfg = {};
  cfg.learning_rate = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.init = KernelParams::initial(5);
  EXPECT_THROW(train(cfg, inst.set, *inst.ctx), Error);
  const TrainingSet empty = TrainingSet::from_examples({}, 25);
  Rng rng(1);
  EXPECT_THROW(sample_triple(rng, empty), Error);
}

TEST(Train, LogIsJsonLines) {
  std::stringstream s;
  const std::vector<TrainLogEntry> log{{10, 0.5, 1.0, 2.0, 0.25}};
  write_train_log_jsonl(s, log);
  const auto j = nlohmann::json::parse(s.str());
  EXPECT_EQ(j["iter"], 10);
  EXPECT_EQ(j["beta_norm"], 0.25);
}
