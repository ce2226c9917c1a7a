#include <benchmark/benchmark.h>

#include <numeric>

#include "saml/control.hpp"
#include "saml/objective.hpp"
#include "saml/systems.hpp"
#include "saml/trainer.hpp"

using namespace saml;

namespace {

Eigen::MatrixXd random_inputs(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Pcg32 rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.uniform(-1.0, 1.0);
  return m;
}

// Ball-sized network: 9 inputs, two hidden layers of 128, 3 outputs.
void BM_ForwardBackwardBatch(benchmark::State& state) {
  const std::vector<int> dims{9, 128, 128, 3};
  const Mlp model = mlp_init(dims, 1, false);
  const Eigen::MatrixXd x = random_inputs(9, state.range(0), 2);
  const Eigen::MatrixXd cot = random_inputs(3, state.range(0), 3);
  GradientBuffer g = GradientBuffer::zeros_like(model);
  for (auto _ : state) {
    ForwardCache cache;
    benchmark::DoNotOptimize(mlp_forward_batch(model, x, &cache));
    g.set_zero();
    benchmark::DoNotOptimize(mlp_backward_batch(model, cache, cot, g));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_ForwardBackwardBatch)->Arg(1)->Arg(32)->Arg(256);

void BM_EvaluatorJacobian(benchmark::State& state) {
  const std::vector<int> dims{17, 16, 8, 13};
  const Mlp model = mlp_init(dims, 1, false);
  MlpEvaluator eval(model);
  const Eigen::VectorXd x = random_inputs(17, 1, 4);
  for (auto _ : state) {
    eval.forward(x);
    benchmark::DoNotOptimize(eval.input_jacobian());
  }
}
BENCHMARK(BM_EvaluatorJacobian);

// One primal-dual step of the constrained double-integrator problem.
void BM_TrainStep(benchmark::State& state) {
  const SystemSpec spec = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const Dataset data = sample_dataset(spec, 2048, resolve_ranges(spec.name, {}), 5, 0.0);
  const auto base = make_base_model(spec);
  ConstrainedObjective obj;
  obj.constraints.push_back(
      {LossKind::Euclidean, IndicatorSet::inf_norm_ball(0.5), 0.035, ConstraintForm::ConditionalMean});
  const EmpiricalLagrangian problem(obj, data.samples, base.get());
  const std::vector<int> dims{3, 4, 2, 2};
  PrimalDualState st{mlp_init(dims, 1, true), AdamState{}, DualState::zeros(1), 0};
  st.primal_adam = AdamState::for_size(static_cast<Eigen::Index>(st.model.parameter_count()));
  TrainerConfig cfg;
  std::vector<std::size_t> batch(static_cast<std::size_t>(state.range(0)));
  std::iota(batch.begin(), batch.end(), 0);
  for (auto _ : state) benchmark::DoNotOptimize(train_step(st, problem, batch, cfg));
}
BENCHMARK(BM_TrainStep)->Arg(32)->Arg(256);

void BM_MpcSolveDoubleIntegrator(benchmark::State& state) {
  const SystemSpec spec = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const auto base = make_base_model(spec);
  const std::vector<int> dims{3, 4, 2, 2};
  const LearnedModel model(base.get(), mlp_init(dims, 1, false), 2, 1);
  MpcConfig cfg;
  cfg.control_lo = Eigen::VectorXd::Constant(1, -10.0);
  cfg.control_hi = Eigen::VectorXd::Constant(1, 10.0);
  const Eigen::Vector2d x0(1.5, 0.0);
  for (auto _ : state) benchmark::DoNotOptimize(mpc_solve(cfg, model, x0, 7));
}
BENCHMARK(BM_MpcSolveDoubleIntegrator)->Unit(benchmark::kMillisecond);

void BM_MpcSolveQuadrotor(benchmark::State& state) {
  const SystemSpec spec = SystemSpec::from_json({{"name", "quadrotor"}});
  const auto base = make_base_model(spec);
  const MpcConfig cfg = MpcConfig::from_json({{"horizon", 15},
                                              {"controlLo", {0, 0, 0, 0}},
                                              {"controlHi", {10, 10, 10, 10}},
                                              {"stageCost", "positionDistance"},
                                              {"minHeight", 0.2},
                                              {"uprightTolerance", 0.05},
                                              {"restarts", 1},
                                              {"learningRate", 0.1}});
  Eigen::VectorXd x0 = Eigen::VectorXd::Zero(13);
  x0 << 1.0, -1.0, 1.5, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0;
  for (auto _ : state) benchmark::DoNotOptimize(mpc_solve(cfg, *base, x0, 7));
}
BENCHMARK(BM_MpcSolveQuadrotor)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
