#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "sparsecov/experiments.hpp"
#include "sparsecov/json.hpp"

using namespace sparsecov;

namespace {

ExperimentSpec small_spec() {
  ExperimentSpec spec;
  spec.grid = {{40, 20}, {80, 20}, {40, 30}};
  spec.cls = {ClassVariant::Global, 0.0, 6.0};
  spec.trials = 3;
  spec.seed = RngSeed{17};
  spec.gamma.value = 0.5;
  return spec;
}

std::string csv_of(const std::vector<ExperimentRecord>& rs) {
  std::ostringstream out;
  write_records_csv(out, rs);
  return out.str();
}

}  // namespace

TEST(GenerateModel, Examples) {
  EXPECT_EQ(generate_model({ClassVariant::Global, 0.0, 0.0}, ModelGenerator::ExactSparse, 5, RngSeed{1}),
            SymMatrix::identity(5));
  const auto approx = generate_model({ClassVariant::Global, 1.0, 1.0}, ModelGenerator::ApproxSparse, 50, RngSeed{1});
  EXPECT_EQ(offdiag_l0(approx), 50u * 49u);
  EXPECT_TRUE(is_positive_definite(approx));
}

TEST(GenerateModel, MembershipAcrossClasses) {
  const std::vector<SparsityClass> classes{
      {ClassVariant::Global, 0.0, 10.0}, {ClassVariant::Global, 0.5, 2.0}, {ClassVariant::Global, 1.0, 1.5},
      {ClassVariant::Column, 0.0, 2.0},  {ClassVariant::Column, 0.5, 0.8}, {ClassVariant::Column, 1.0, 0.7}};
  for (const auto& cls : classes)
    for (auto gen : {ModelGenerator::ExactSparse, ModelGenerator::BandedPerturbation, ModelGenerator::FirstRowSpike})
      for (std::uint64_t s = 0; s < 5; ++s) {
        const auto m = generate_model(cls, gen, 30, RngSeed{s});
        EXPECT_TRUE(class_membership(m, cls)) << to_string(gen) << " q=" << cls.q << " R=" << cls.R;
      }
}

TEST(GenerateModel, ExactSparseSupportAndDeterminism) {
  const SparsityClass cls{ClassVariant::Global, 0.0, 10.0};
  const auto a = generate_model(cls, ModelGenerator::ExactSparse, 40, RngSeed{3});
  EXPECT_EQ(offdiag_l0(a), 10u);
  EXPECT_EQ(a, generate_model(cls, ModelGenerator::ExactSparse, 40, RngSeed{3}));
  const auto spike = generate_model(cls, ModelGenerator::FirstRowSpike, 40, RngSeed{3});
  for (std::size_t i = 1; i < 40; ++i)
    for (std::size_t j = i + 1; j < 40; ++j) EXPECT_EQ(spike(i, j), 0.0);
  EXPECT_THROW(generate_model({ClassVariant::Global, 0.0, 3.0}, ModelGenerator::ExactSparse, 10, RngSeed{1}),
               InvalidParameter);
}

TEST(Sweep, RecordCountAndOrder) {
  const auto spec = small_spec();
  const auto rs = run_sweep(spec, 1);
  ASSERT_EQ(rs.size(), spec.grid.size() * spec.trials * 3 * 2);
  std::size_t i = 0;
  for (const auto& g : spec.grid)
    for (std::size_t t = 0; t < spec.trials; ++t)
      for (auto e : spec.estimators)
        for (auto l : spec.losses) {
          const auto& r = rs[i++];
          EXPECT_EQ(r.n, g.n);
          EXPECT_EQ(r.p, g.p);
          EXPECT_EQ(r.trial, t);
          EXPECT_EQ(r.estimator, e);
          EXPECT_EQ(r.loss, l);
          EXPECT_TRUE(r.error.empty());
          EXPECT_GE(r.loss_value, 0.0);
          EXPECT_NEAR(r.loss_squared, r.loss_value * r.loss_value, 0.0);
        }
}

TEST(Sweep, ThreadCountDoesNotChangeOutput) {
  const auto spec = small_spec();
  const std::string one = csv_of(run_sweep(spec, 1));
  EXPECT_EQ(one, csv_of(run_sweep(spec, 1)));
  EXPECT_EQ(one, csv_of(run_sweep(spec, 4)));
  auto other = spec;
  other.seed = RngSeed{18};
  EXPECT_NE(one, csv_of(run_sweep(other, 1)));
}

TEST(Sweep, ModelSharedAcrossN) {
  // Both n share the model drawn from the p-only seed.
  auto spec = small_spec();
  spec.grid = {{40, 20}, {80, 20}};
  spec.trials = 1;
  spec.estimators = {EstimatorKind::Soft};
  spec.losses = {LossKind::Frobenius};
  const auto rs = run_sweep(spec, 1);
  const auto model = generate_model(spec.cls, spec.generator, 20, detail::model_seed(spec, 20, 0));
  for (const auto& r : rs) EXPECT_EQ(r.oracle_bound, oracle_l0(model, lambda_from_tau(r.tau)).value);
}

TEST(Sweep, SampleCovarianceConsistent) {
  ExperimentSpec spec;
  spec.grid = {{200000, 3}};
  spec.cls = {ClassVariant::Global, 0.0, 0.0};
  spec.estimators = {EstimatorKind::Sample};
  spec.losses = {LossKind::Frobenius};
  spec.trials = 1;
  const auto rs = run_sweep(spec, 1);
  ASSERT_EQ(rs.size(), 1u);
  EXPECT_LT(rs[0].loss_value, 0.02);
}

TEST(Sweep, SoftBeatsSampleWhenPMuchLargerThanN) {
  ExperimentSpec spec;
  spec.grid = {{50, 100}};
  spec.cls = {ClassVariant::Global, 0.0, 10.0};
  spec.estimators = {EstimatorKind::Sample, EstimatorKind::Soft};
  spec.losses = {LossKind::Frobenius};
  spec.trials = 40;
  spec.gamma.value = 1.0;
  spec.seed = RngSeed{31};
  const auto rs = run_sweep(spec, 1);
  std::size_t wins = 0;
  for (std::size_t i = 0; i < rs.size(); i += 2)
    if (rs[i + 1].loss_value <= rs[i].loss_value) ++wins;
  EXPECT_GE(static_cast<double>(wins), 0.9 * spec.trials);
}

TEST(Sweep, DeterministicConditionImpliesWorstCaseOracle) {
  // Under tau > 2 max|xi| every soft-thresholded entry errs by at most
  // min(|sigma_ij|, 1.5 tau); the recorded loss must respect that bound.
  ExperimentSpec spec;
  spec.grid = {{100, 20}, {400, 20}, {200, 40}};
  spec.cls = {ClassVariant::Global, 0.0, 8.0};
  spec.estimators = {EstimatorKind::Soft};
  spec.losses = {LossKind::Frobenius};
  spec.trials = 100;
  spec.gamma.value = 2.0;
  spec.seed = RngSeed{41};
  std::size_t conditioned = 0;
  for (const auto& r : run_sweep(spec, 1)) {
    if (!r.tau_condition) continue;
    ++conditioned;
    const auto model = generate_model(spec.cls, spec.generator, r.p, detail::model_seed(spec, r.p, 0));
    EXPECT_LE(r.loss_squared, oracle_l0(model, 2.25 * r.tau * r.tau).value * (1 + 1e-12));
  }
  EXPECT_GT(conditioned, 100u);
}

TEST(Sweep, ApproxSparseLqBound) {
  // The truncation-scan l_q bound dominates the l0 oracle at the same
  // penalty, so it inherits the worst-case guarantee.
  ExperimentSpec spec;
  spec.grid = {{200, 20}, {800, 20}};
  spec.cls = {ClassVariant::Global, 1.0, 100.0};
  spec.generator = ModelGenerator::ApproxSparse;
  spec.decay = 2.0;
  spec.estimators = {EstimatorKind::Soft};
  spec.losses = {LossKind::Frobenius};
  spec.trials = 30;
  spec.gamma.value = 1.5;
  const auto model = generate_model(spec.cls, spec.generator, 20, detail::model_seed(spec, 20, 0), 2.0);
  for (const auto& r : run_sweep(spec, 1)) {
    if (!r.tau_condition) continue;
    const double bound = oracle_lq(model, 0.5, 2.25 * r.tau * r.tau).value;
    EXPECT_LE(r.loss_squared, bound * (1 + 1e-12));
  }
}

TEST(Sweep, Validation) {
  auto spec = small_spec();
  spec.trials = 0;
  EXPECT_THROW(run_sweep(spec), InvalidParameter);
  spec = small_spec();
  spec.grid.push_back({1, 10});
  EXPECT_THROW(run_sweep(spec), InvalidParameter);
  spec = small_spec();
  spec.A = 1.0;
  EXPECT_THROW(run_sweep(spec), InvalidParameter);
}

TEST(Csv, RoundTrip) {
  auto rs = run_sweep(small_spec(), 1);
  rs[0].error = "some, text";
  for (auto& r : rs) r.wall_ms = 0.0;
  std::stringstream ss;
  write_records_csv(ss, rs);
  auto back = read_records_csv(ss);
  ASSERT_EQ(back.size(), rs.size());
  rs[0].error = "some; text";
  EXPECT_EQ(back, rs);

  std::stringstream timed;
  rs[1].wall_ms = 1.25;
  write_records_csv(timed, rs, true);
  EXPECT_NE(timed.str().find(",wall_ms\n"), std::string::npos);
  EXPECT_EQ(read_records_csv(timed)[1].wall_ms, 1.25);

  std::istringstream bad("n,p\n1,2\n");
  EXPECT_THROW(read_records_csv(bad), InvalidInput);
}

TEST(Csv, SeventeenDigits) {
  EXPECT_EQ(format_double(0.1), "0.10000000000000001");
  EXPECT_EQ(std::stod(format_double(1.0 / 3.0)), 1.0 / 3.0);
}

TEST(Summary, Aggregates) {
  std::vector<ExperimentRecord> rs(4);
  for (std::size_t i = 0; i < 4; ++i) {
    rs[i].n = 10;
    rs[i].p = 5;
    rs[i].estimator = EstimatorKind::Soft;
    rs[i].loss_value = static_cast<double>(i + 1);
    rs[i].loss_squared = rs[i].loss_value * rs[i].loss_value;
    rs[i].tau_condition = i < 2;
    rs[i].oracle_satisfied = i != 1;
  }
  rs[3].error = "boom";
  const auto s = summarize(rs);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].count, 3u);
  EXPECT_EQ(s[0].errors, 1u);
  EXPECT_NEAR(s[0].mean_loss, 2.0, 1e-15);
  EXPECT_NEAR(s[0].mean_loss_squared, 14.0 / 3.0, 1e-15);
  EXPECT_NEAR(s[0].stderr_loss, 1.0 / std::sqrt(3.0), 1e-15);
  EXPECT_NEAR(s[0].oracle_frequency, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(s[0].deterministic_violations, 1u);
  EXPECT_NO_THROW(to_json(s[0]).dump());
}

TEST(Fit, ExactPowerLaw) {
  std::vector<double> xs{100, 200, 400, 800}, ys;
  for (double x : xs) ys.push_back(3.0 * std::pow(x, -0.5));
  const auto f = fit_loglog(xs, ys);
  EXPECT_NEAR(f.slope, -0.5, 1e-12);
  EXPECT_NEAR(f.intercept, std::log(3.0), 1e-12);
  EXPECT_NEAR(f.slope_stderr, 0.0, 1e-12);
  EXPECT_THROW(fit_loglog({1, 2, 2}, {1, 1, 1}), InvalidInput);
  EXPECT_THROW(fit_loglog({1, 2, 3}, {1, 0, 1}), InvalidInput);
}

TEST(Fit, RateAxes) {
  std::vector<ExperimentRecord> rs;
  for (std::size_t n : {100u, 200u, 400u, 800u})
    for (int t = 0; t < 2; ++t) {
      ExperimentRecord r;
      r.n = n;
      r.p = 50;
      r.estimator = EstimatorKind::Soft;
      r.loss_value = 2.0 * std::sqrt(std::log(50.0) / static_cast<double>(n));
      r.loss_squared = r.loss_value * r.loss_value;
      rs.push_back(r);
    }
  EXPECT_NEAR(fit_rate(rs, RateAxis::LogPOverN, EstimatorKind::Soft, LossKind::Frobenius).slope, 1.0, 1e-12);
  EXPECT_NEAR(fit_rate(rs, RateAxis::LogPOverN, EstimatorKind::Soft, LossKind::Frobenius, false).slope, 0.5, 1e-12);
  EXPECT_NEAR(fit_rate(rs, RateAxis::N, EstimatorKind::Soft, LossKind::Frobenius).slope, -1.0, 1e-12);
  EXPECT_THROW(fit_rate(rs, RateAxis::P, EstimatorKind::Soft, LossKind::Frobenius), InvalidInput);
}

TEST(SpecFile, ParsesSectionsAndLists) {
  std::istringstream in(R"(# demo
trials = 5
seed = 9
class = global
q = 0
R = 10
generator = exact_sparse
estimators = soft, hard
losses = frobenius
A = 2
gamma = calibrate
calibration_trials = 150
[grid]
n = 100, 200
p = 50
[grid]
n = 30
p = 10, 20   # trailing comment
)");
  const auto spec = parse_spec(in);
  EXPECT_EQ(spec.trials, 5u);
  EXPECT_EQ(spec.seed.value, 9u);
  EXPECT_EQ(spec.cls.R, 10.0);
  EXPECT_TRUE(spec.gamma.calibrate);
  EXPECT_EQ(spec.gamma.calibration_trials, 150u);
  ASSERT_EQ(spec.estimators.size(), 2u);
  EXPECT_EQ(spec.estimators[1], EstimatorKind::Hard);
  const std::vector<GridPoint> grid{{100, 50}, {200, 50}, {30, 10}, {30, 20}};
  EXPECT_EQ(spec.grid, grid);
}

TEST(SpecFile, Rejections) {
  for (const char* text : {"bogus = 1\n", "trials = 1\ntrials = 2\n", "[grid]\nn = 10\n", "[other]\n",
                           "trials = x\n", "generator = nope\n", "[grid]\nn = 10\np = 5\nm = 1\n", "trials\n"}) {
    std::istringstream in(text);
    EXPECT_THROW(parse_spec(in), InvalidInput) << text;
  }
  EXPECT_THROW(load_spec("/nonexistent/spec.txt"), InvalidInput);
}

TEST(Json, RecordDocument) {
  const auto rs = run_sweep(small_spec(), 1);
  const auto j = to_json(rs[0]);
  EXPECT_EQ(j["n"], rs[0].n);
  EXPECT_EQ(j["estimator"], "sample");
  EXPECT_EQ(j["loss_value"].get<double>(), rs[0].loss_value);
}
