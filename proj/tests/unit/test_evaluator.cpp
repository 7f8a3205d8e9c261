#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include <fmt/format.h>
#include <gtest/gtest.h>

#include "nhp/baselines.hpp"
#include "nhp/error.hpp"
#include "nhp/evaluator.hpp"
#include "tiny.hpp"

using namespace nhp;

namespace {

class OracleModel : public RiskModel {
 public:
  explicit OracleModel(std::size_t cells) : cells_(cells) {}
  std::string name() const override { return "oracle"; }
  std::vector<double> risk(const PredictionCase& c) const override {
    std::vector<double> r(cells_, 0.0);
    r[c.true_cell] = 1.0;
    return r;
  }

 private:
  std::size_t cells_;
};

class ConstantModel : public RiskModel {
 public:
  ConstantModel(std::size_t cells, double v) : cells_(cells), v_(v) {}
  std::string name() const override { return "constant"; }
  std::vector<double> risk(const PredictionCase&) const override { return std::vector<double>(cells_, v_); }

 private:
  std::size_t cells_;
  double v_;
};

std::vector<PredictionCase> cases_on(std::size_t n) {
  std::vector<PredictionCase> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i].series = static_cast<int>(i + 1);
    out[i].true_cell = i;
  }
  return out;
}

}  // namespace

TEST(Summary, QuartilesInterpolate) {
  const std::vector<double> v{4.0, 1.0, 3.0, 2.0};
  const Summary s = summarize(v);
  EXPECT_EQ(s.count, 4u);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_DOUBLE_EQ(s.median, 2.5);
  EXPECT_DOUBLE_EQ(s.q1, 1.75);
  EXPECT_DOUBLE_EQ(s.q3, 3.25);
  EXPECT_EQ(s.min, 1.0);
  EXPECT_EQ(s.max, 4.0);
  EXPECT_EQ(summarize({}).count, 0u);
  const std::vector<double> one{0.3};
  EXPECT_EQ(summarize(one).q1, 0.3);
}

TEST(Evaluate, PerfectModelScoresOneOverCells) {
  const auto cases = cases_on(5);
  const EvalReport r = evaluate(OracleModel(20), cases, 20);
  EXPECT_EQ(r.model, "oracle");
  EXPECT_EQ(r.resolution, 20u);
  ASSERT_EQ(r.cases.size(), 5u);
  for (const CaseResult& c : r.cases) {
    EXPECT_EQ(c.rank, 1u);
    EXPECT_EQ(c.normalized_rank, 1.0 / 20.0);
  }
  EXPECT_EQ(r.summary.mean, 1.0 / 20.0);
}

TEST(Evaluate, ConstantModelIsWorstUnderPessimisticTies) {
  const auto cases = cases_on(3);
  EXPECT_EQ(mean_normalized_rank(ConstantModel(10, 0.1), cases, 10), 1.0);
}

TEST(Evaluate, RejectsWrongSizeAndNonFinite) {
  const auto cases = cases_on(2);
  EXPECT_THROW(evaluate(ConstantModel(9, 0.0), cases, 10), Error);
  try {
    evaluate(ConstantModel(10, std::nan("")), cases, 10);
    ADD_FAILURE();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kNumerical);
  }
}

TEST(BuildCases, PriorsAreTheTrainingCrimesOfTheSeries) {
  const auto inst = tiny::make(7);
  const TrainTestSplit sp = split_train_test(inst.store);
  const CaseBuild cb = build_cases(sp.train, sp.tests, inst.store, inst.grid(), BackgroundSpec{30.0, 1.0});
  ASSERT_EQ(cb.cases.size(), 2u);
  EXPECT_TRUE(cb.skipped_series.empty());
  for (std::size_t i = 0; i < 2; ++i) {
    const PredictionCase& c = cb.cases[i];
    EXPECT_EQ(c.series, sp.tests[i].series);
    EXPECT_EQ(c.target_id, sp.tests[i].crime.id);
    EXPECT_EQ(c.true_cell, sp.tests[i].crime.cell);
    ASSERT_EQ(c.priors.size(), 2u);
    EXPECT_EQ(c.t, c.priors.back().t + 1.0);
    EXPECT_EQ(c.background->mu, fit_background(inst.grid(), inst.store, c.t, 30.0,
                                               inst.grid().cell_side_m(), c.target_id)
                                    .mu);
  }
  // A test case whose series has no training crimes is skipped.
  const std::vector<TestCase> orphan{{99, sp.tests[0].crime}};
  const CaseBuild none = build_cases(sp.train, orphan, inst.store, inst.grid(), {});
  EXPECT_TRUE(none.cases.empty());
  EXPECT_EQ(none.skipped_series, (std::vector<int>{99}));
}

TEST(Reports, CsvRoundTripAndCardinality) {
  const auto cases = cases_on(4);
  std::vector<EvalReport> reports{evaluate(OracleModel(8), cases, 8), evaluate(ConstantModel(8, 1), cases, 8)};
  std::stringstream s;
  write_cases_csv(s, reports);
  const auto rows = read_cases_csv(s);
  ASSERT_EQ(rows.size(), 8u);
  EXPECT_EQ(rows[0].model, "oracle");
  EXPECT_EQ(rows[0].result.rank, 1u);
  EXPECT_EQ(rows[7].model, "constant");
  EXPECT_EQ(rows[7].result.normalized_rank, 1.0);
  EXPECT_EQ(rows[7].result.series, 4);

  std::stringstream bad("model,resolution\n");
  EXPECT_THROW(read_cases_csv(bad), Error);
}

TEST(Reports, JsonAndFilesOnDisk) {
  const auto cases = cases_on(2);
  const std::vector<EvalReport> reports{evaluate(OracleModel(4), cases, 4)};
  const auto j = report_json(reports);
  ASSERT_EQ(j.size(), 1u);
  EXPECT_EQ(j[0]["summary"]["mean"], 0.25);
  EXPECT_EQ(j[0]["cases"].size(), 2u);

  const auto dir = std::filesystem::temp_directory_path() / fmt::format("nhp_eval_{}", ::getpid());
  emit_report(reports, dir.string());
  EXPECT_TRUE(std::filesystem::exists(dir / "report.json"));
  std::ifstream in(dir / "ranks.csv");
  EXPECT_EQ(read_cases_csv(in).size(), 2u);
  std::filesystem::remove_all(dir);
}
