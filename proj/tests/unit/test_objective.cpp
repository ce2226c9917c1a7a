#include <doctest.h>

#include "oracles.hpp"
#include "saml/error.hpp"
#include "saml/objective.hpp"
#include "saml/systems.hpp"

using namespace saml;
using saml::testing::random_batch;
using saml::testing::random_mlp;

namespace {

TransitionSample sample(Eigen::VectorXd x, Eigen::VectorXd u, Eigen::VectorXd next) {
  return {std::move(x), std::move(u), std::move(next)};
}

Mlp zero_net(int in, int out) { return mlp_init(std::vector<int>{in, 3, out}, 1, true); }

ConstrainedObjective full_objective(LossKind loss) {
  ConstrainedObjective obj;
  obj.residual_mode = false;
  obj.loss = loss;
  return obj;
}

}  // namespace

TEST_CASE("sample losses on hand examples") {
  const TransitionSample s = sample(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), Eigen::Vector2d(0.0, 2.0));
  CHECK(sample_loss(LossKind::Euclidean, 0.0, Eigen::Vector2d(3.0, 6.0), s) == doctest::Approx(5.0));
  CHECK(sample_loss(LossKind::SquaredEuclidean, 0.0, Eigen::Vector2d(3.0, 6.0), s) == doctest::Approx(25.0));
  // error (0, 0.5) against a next state of norm 2
  CHECK(sample_loss(LossKind::NormalizedEuclidean, 0.1, Eigen::Vector2d(0.0, 2.5), s) == doctest::Approx(0.25));
  for (auto kind : {LossKind::Euclidean, LossKind::SquaredEuclidean, LossKind::NormalizedEuclidean})
    CHECK(sample_loss(kind, 0.1, s.next_state, s) == 0.0);
}

TEST_CASE("normalized loss below delta_c is a contract violation") {
  const TransitionSample s = sample(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), Eigen::Vector2d(0.0, 0.05));
  CHECK_THROWS_AS(sample_loss(LossKind::NormalizedEuclidean, 0.1, Eigen::Vector2d(1.0, 1.0), s), ContractViolation);
  const TransitionSample z = sample(Eigen::VectorXd::Zero(2), Eigen::VectorXd::Zero(1), Eigen::Vector2d::Zero());
  CHECK_THROWS_AS(sample_loss(LossKind::NormalizedEuclidean, 0.0, Eigen::Vector2d(1.0, 1.0), z), ContractViolation);
}

TEST_CASE("predictions of zero-initialized networks") {
  const SystemSpec di = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const auto base = make_base_model(di);
  const Mlp m = zero_net(3, 2);
  const TransitionSample s = sample(Eigen::Vector2d(0.3, -1.0), Eigen::VectorXd::Constant(1, 2.0), Eigen::Vector2d(0, 0));
  ConstrainedObjective residual;
  CHECK(prediction(residual, m, base.get(), s) == base->step(s.state, s.control));
  CHECK(prediction(full_objective(LossKind::Euclidean), m, nullptr, s) == Eigen::Vector2d::Zero());
}

TEST_CASE("residual prediction adds a hand-set network to the base step") {
  const SystemSpec di = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const auto base = make_base_model(di);
  Layer l;
  l.weight = Eigen::MatrixXd{{1.0, 0.0, 0.0}, {0.0, 0.0, 0.5}};
  l.bias = Eigen::Vector2d(0.1, -0.2);
  const Mlp m({l});
  const TransitionSample s = sample(Eigen::Vector2d(0.3, -1.0), Eigen::VectorXd::Constant(1, 2.0), Eigen::Vector2d(0, 0));
  // base: p' = 0.3 - 0.1 = 0.2, v' = -1 + 0.2 = -0.8; network: (0.3 + 0.1, 1.0 - 0.2)
  const Eigen::VectorXd y = prediction(ConstrainedObjective{}, m, base.get(), s);
  CHECK(y[0] == doctest::Approx(0.6));
  CHECK(y[1] == doctest::Approx(0.0));
}

TEST_CASE("empirical objective of four hand samples") {
  const Mlp m = zero_net(3, 2);
  std::vector<TransitionSample> batch;
  for (double r : {1.0, 2.0, 3.0, 4.0})
    batch.push_back(sample(Eigen::Vector2d(r, 0.0), Eigen::VectorXd::Zero(1), Eigen::Vector2d(0.0, r)));
  CHECK(empirical_objective(full_objective(LossKind::Euclidean), m, nullptr, batch) == doctest::Approx(2.5));
  CHECK(empirical_objective(full_objective(LossKind::SquaredEuclidean), m, nullptr, batch) == doctest::Approx(7.5));
  CHECK_THROWS_AS(empirical_objective(full_objective(LossKind::Euclidean), m, nullptr, {}), ContractViolation);
}

TEST_CASE("constraint values, forms and inactive batches") {
  const Mlp m = zero_net(3, 2);
  std::vector<TransitionSample> batch;
  // states 0.1, 0.2 are in the ball of radius 0.5; 1.0, 2.0 are not
  for (double r : {0.1, 0.2, 1.0, 2.0})
    batch.push_back(sample(Eigen::Vector2d(r, 0.0), Eigen::VectorXd::Zero(1), Eigen::Vector2d(0.0, r)));
  ConstrainedObjective obj = full_objective(LossKind::Euclidean);
  obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::inf_norm_ball(0.5), 0.05, ConstraintForm::ConditionalMean});
  obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::inf_norm_ball(0.5), 0.05, ConstraintForm::ExpectationWeighted});
  obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::none(), 0.05, ConstraintForm::ConditionalMean});

  const ConstraintValue cm = empirical_constraint(obj, m, nullptr, batch, 0);
  const ConstraintValue ew = empirical_constraint(obj, m, nullptr, batch, 1);
  CHECK(cm.value == doctest::Approx(0.15 - 0.05));
  // (1/M) sum (l - eps / frac) I with frac = 1/2
  CHECK(ew.value == doctest::Approx((0.1 + 0.2) / 4.0 - 0.05));
  // The forms share sign and agree after rescaling by the in-set fraction.
  const double frac = 0.5;
  CHECK(ew.value + 0.05 == doctest::Approx(frac * (cm.value + 0.05)));

  const ConstraintValue off = empirical_constraint(obj, m, nullptr, batch, 2);
  CHECK(off.value == 0.0);
  CHECK_FALSE(off.active);

  DualState dual = DualState::zeros(3);
  dual.multipliers << 0.5, 2.0, 7.0;
  const double L = lagrangian_value(obj, m, nullptr, batch, dual);
  CHECK(L == doctest::Approx(empirical_objective(obj, m, nullptr, batch) + 0.5 * cm.value + 2.0 * ew.value));
  const Eigen::VectorXd g = dual_gradient(obj, m, nullptr, batch);
  CHECK(g[0] == doctest::Approx(cm.value));
  CHECK(g[2] == 0.0);
}

TEST_CASE("constraint sign follows whether in-set losses exceed epsilon") {
  Pcg32 rng(12);
  const Mlp m = zero_net(2, 1);
  for (int trial = 0; trial < 50; ++trial) {
    const double eps = rng.uniform(0.1, 1.0);
    const bool above = trial % 2 == 0;
    std::vector<TransitionSample> batch;
    for (int i = 0; i < 6; ++i) {
      const double loss = above ? rng.uniform(eps * 1.01, 2.0) : rng.uniform(0.0, eps * 0.99);
      batch.push_back(sample(Eigen::VectorXd::Constant(1, rng.uniform(-0.4, 0.4)), Eigen::VectorXd::Zero(1),
                             Eigen::VectorXd::Constant(1, loss)));
    }
    for (auto form : {ConstraintForm::ConditionalMean, ConstraintForm::ExpectationWeighted}) {
      ConstrainedObjective obj = full_objective(LossKind::Euclidean);
      obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::inf_norm_ball(0.5), eps, form});
      const double g = empirical_constraint(obj, m, nullptr, batch, 0).value;
      CHECK((above ? g > 0.0 : g < 0.0));
    }
  }
}

TEST_CASE("primal gradient with zero multipliers and an empty objective set vanishes") {
  Pcg32 rng(5);
  const Mlp m = random_mlp({3, 4, 2}, rng);
  const auto batch = random_batch(2, 1, 6, rng);
  ConstrainedObjective obj = full_objective(LossKind::Euclidean);
  obj.objective_indicator = IndicatorSet::none();
  obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::all(), 0.1, ConstraintForm::ConditionalMean});
  const GradientBuffer g = primal_gradient(obj, m, nullptr, batch, DualState::zeros(1));
  CHECK(g.flat().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("Lagrangian matches an independent recomputation from per-sample losses") {
  Pcg32 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Mlp m = random_mlp({3, 5, 2}, rng);
    const auto batch = random_batch(2, 1, 9, rng);
    ConstrainedObjective obj = full_objective(LossKind::Euclidean);
    obj.constraints.push_back({LossKind::SquaredEuclidean, IndicatorSet::inf_norm_ball(0.5, {0}), 0.2,
                               ConstraintForm::ConditionalMean});
    DualState dual = DualState::zeros(1);
    dual.multipliers[0] = rng.uniform(0.0, 2.0);

    double obj_sum = 0.0, con_sum = 0.0;
    int count = 0;
    for (const auto& s : batch) {
      const Eigen::VectorXd r = mlp_forward(m, (Eigen::VectorXd(3) << s.state, s.control).finished()) - s.next_state;
      obj_sum += r.norm();
      if (std::abs(s.state[0]) <= 0.5) {
        con_sum += r.squaredNorm();
        ++count;
      }
    }
    double expected = obj_sum / static_cast<double>(batch.size());
    if (count > 0) expected += dual.multipliers[0] * (con_sum / count - 0.2);
    CHECK(lagrangian_value(obj, m, nullptr, batch, dual) == doctest::Approx(expected).epsilon(1e-12));
  }
}

TEST_CASE("primal gradient agrees with finite differences for every loss and form") {
  Pcg32 rng(99);
  for (auto loss : {LossKind::Euclidean, LossKind::SquaredEuclidean, LossKind::NormalizedEuclidean})
    for (auto form : {ConstraintForm::ConditionalMean, ConstraintForm::ExpectationWeighted})
      for (int trial = 0; trial < 5; ++trial) {
        const auto c = saml::testing::random_gradient_case(loss, form, rng);
        CHECK(saml::testing::gradient_case_error(c) < 1e-5);
      }
}

TEST_CASE("residual-mode gradient ignores the base model's contribution") {
  const SystemSpec di = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const auto base = make_base_model(di);
  Pcg32 rng(6);
  const Mlp m = random_mlp({3, 4, 2}, rng);
  const auto batch = random_batch(2, 1, 8, rng);
  ConstrainedObjective obj;
  obj.loss = LossKind::SquaredEuclidean;
  const GradientBuffer g = primal_gradient(obj, m, base.get(), batch, DualState::zeros(0));
  const Eigen::VectorXd fd = saml::testing::finite_difference(
      m, [&](const Mlp& p) { return lagrangian_value(obj, p, base.get(), batch, DualState::zeros(0)); });
  CHECK(saml::testing::relative_error(g.flat(), fd) < 1e-6);
}

TEST_CASE("objective config round-trips through JSON") {
  ConstrainedObjective obj;
  obj.loss = LossKind::NormalizedEuclidean;
  obj.delta_c = 0.1;
  obj.objective_indicator = IndicatorSet::next_state_norm_at_least(0.1);
  obj.constraints.push_back({LossKind::Euclidean, IndicatorSet::complement_of(IndicatorSet::next_state_norm_at_least(0.1)),
                             0.1, ConstraintForm::ExpectationWeighted});
  const auto back = ConstrainedObjective::from_json(obj.to_json());
  CHECK(back.to_json() == obj.to_json());
  nlohmann::json bad = obj.to_json();
  bad["constraints"][0]["epsilon"] = 0.0;
  CHECK_THROWS_AS(ConstrainedObjective::from_json(bad), ConfigError);
  bad = obj.to_json();
  bad["loss"] = "cosine";
  CHECK_THROWS_AS(ConstrainedObjective::from_json(bad), ConfigError);
}

TEST_CASE("indicator sets") {
  const TransitionSample s = sample(Eigen::Vector3d(0.2, -0.4, 1.2), Eigen::VectorXd::Zero(1), Eigen::Vector3d(0.0, 0.05, 0.0));
  CHECK(IndicatorSet::all().contains(s));
  CHECK_FALSE(IndicatorSet::none().contains(s));
  CHECK(IndicatorSet::inf_norm_ball(0.5, {0, 1}).contains(s));
  CHECK_FALSE(IndicatorSet::inf_norm_ball(0.5).contains(s));
  CHECK(IndicatorSet::height_below(1.5).contains(s));
  CHECK_FALSE(IndicatorSet::height_below(1.2).contains(s));
  CHECK_FALSE(IndicatorSet::next_state_norm_at_least(0.1).contains(s));
  CHECK(IndicatorSet::complement_of(IndicatorSet::next_state_norm_at_least(0.1)).contains(s));
  const auto round = IndicatorSet::from_json(IndicatorSet::complement_of(IndicatorSet::height_below(1.5)).to_json());
  CHECK_FALSE(round.contains(s));
  CHECK_THROWS_AS(IndicatorSet::from_json({{"kind", "sphere"}}), ConfigError);
}
