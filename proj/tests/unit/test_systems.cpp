#include <doctest.h>

#include <cmath>
#include <numbers>

#include "oracles.hpp"
#include "saml/error.hpp"
#include "saml/json_io.hpp"
#include "saml/quaternion.hpp"
#include "saml/systems.hpp"

using namespace saml;
using saml::testing::random_vector;

namespace {

double sgn(double x) { return static_cast<double>((x > 0.0) - (x < 0.0)); }

Eigen::VectorXd hover_state(double height) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(kQuadStateDim);
  x[2] = height;
  x[6] = 1.0;
  return x;
}

Eigen::VectorXd with_quaternion(Eigen::VectorXd x, const Quat<double>& q) {
  x.segment<4>(6) << q.w, q.x, q.y, q.z;
  return x;
}

}  // namespace

TEST_CASE("double integrator base step") {
  const DoubleIntegratorParams p;
  CHECK(di_base_step(0, 0, 0, p) == Eigen::Vector2d::Zero());
  const Eigen::Vector2d y = di_base_step(1, 2, 1, p);
  CHECK(y[0] == doctest::Approx(1.2));
  CHECK(y[1] == doctest::Approx(2.1));
  Pcg32 rng(1);
  for (int i = 0; i < 100; ++i) {
    const double a = rng.uniform(-3, 3), pp = rng.uniform(-2, 2), v = rng.uniform(-2, 2), u = rng.uniform(-10, 10);
    CHECK((di_base_step(a * pp, a * v, a * u, p) - a * di_base_step(pp, v, u, p)).norm() < 1e-12);
  }
}

TEST_CASE("friction clamp branches") {
  CHECK(friction_clamp(0.03, 0.0, 0.05, 0.1) == doctest::Approx(0.03));
  CHECK(friction_clamp(1.0, 0.0, 0.05, 0.1) == doctest::Approx(0.05));
  CHECK(friction_clamp(-1.0, 0.0, 0.05, 0.1) == doctest::Approx(-0.05));
  CHECK(friction_clamp(0.7, 3.0, 0.0, 0.1) == 0.0);
  CHECK(friction_clamp(0.0, 0.0, 0.05, 0.1) == 0.0);
}

TEST_CASE("true double integrator step") {
  DoubleIntegratorParams p;
  p.friction.kind = "constant";
  p.friction.base = 0.05;
  // w = 0.01 would be flipped by friction 0.05, so the mass stops
  CHECK(di_true_step(0.0, 0.0, 0.1, p)[1] == 0.0);
  p.friction.base = 0.0;
  Pcg32 rng(2);
  for (int i = 0; i < 100; ++i) {
    const double pp = rng.uniform(-2, 2), v = rng.uniform(-2, 2), u = rng.uniform(-10, 10);
    CHECK((di_true_step(pp, v, u, p) - di_base_step(pp, v, u, p)).norm() == 0.0);
  }
}

TEST_CASE("friction profile default bump") {
  const FrictionProfile b;
  CHECK(b(0.0) == doctest::Approx(0.2));
  CHECK(b(0.8) == doctest::Approx(0.05 + 0.15 * std::exp(-1.0)));
  CHECK(b(1.3) == b(-1.3));
}

TEST_CASE("mirrored double integrator trajectories") {
  const DoubleIntegratorParams p;
  Pcg32 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    Eigen::Vector2d a(rng.uniform(-2, 2), rng.uniform(-2.5, 2.5));
    Eigen::Vector2d b = -a;
    for (int t = 0; t < 50; ++t) {
      const double u = rng.uniform(-10, 10);
      a = di_true_step(a[0], a[1], u, p);
      b = di_true_step(b[0], b[1], -u, p);
      CHECK((a + b).norm() < 1e-12);
    }
  }
}

TEST_CASE("friction never reverses the provisional velocity") {
  const DoubleIntegratorParams p;
  Pcg32 rng(4);
  for (int i = 0; i < 10000; ++i) {
    const double pp = rng.uniform(-2, 2), v = rng.uniform(-2.5, 2.5), u = rng.uniform(-10, 10);
    const double w = v + u * p.dt;
    const double v_next = di_true_step(pp, v, u, p)[1];
    const double s = sgn(v_next);
    REQUIRE((s == 0.0 || s == sgn(w)));
  }
}

TEST_CASE("ball bounce hand example and identities") {
  const Eigen::Vector3d v = ball_bounce({1, 0, -2}, Eigen::Vector3d::Zero(), {0, 0, 1}, 0.8);
  CHECK((v - Eigen::Vector3d(0.8, 0, 1.6)).norm() < 1e-12);
  const Eigen::Vector3d vp(0.3, -0.2, 1.0);
  CHECK((ball_bounce(vp, vp, Eigen::Vector3d(0, 0, 1), 0.8) - vp).norm() < 1e-15);
  CHECK_THROWS_AS(ball_bounce(vp, vp, Eigen::Vector3d(0, 0, 2), 0.8), ContractViolation);
  Pcg32 rng(5);
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector3d n = random_vector(3, rng).normalized();
    const Eigen::Vector3d vb = random_vector(3, rng, -5, 5);
    REQUIRE(std::abs(ball_bounce(vb, Eigen::Vector3d::Zero(), n, 1.0).norm() - vb.norm()) < 1e-12);
  }
}

TEST_CASE("ball base bounce applies the restitution and normal bias") {
  BallPaddleParams p;
  p.normal_bias = 0.0;
  p.base_restitution = p.restitution;
  const Eigen::Vector3d vb(0.2, -0.1, -3.0), vp(0.0, 0.1, 1.0), n = Eigen::Vector3d(0.1, 0.2, 1.0).normalized();
  CHECK((ball_base_bounce(vb, vp, n, p) - ball_bounce(vb, vp, n, p.restitution)).norm() < 1e-14);
  const BallPaddleParams d;
  const Eigen::Vector3d eff = rotate_about_y({0, 0, 1}, d.normal_bias);
  CHECK((eff - Eigen::Vector3d(std::sin(0.2), 0, std::cos(0.2))).norm() < 1e-15);
  CHECK((ball_base_bounce(vb, vp, {0, 0, 1}, d) - ball_bounce(vb, vp, eff, d.base_restitution)).norm() < 1e-14);
}

TEST_CASE("paddle parameterization keeps the normal unit and the relative speed exact") {
  Pcg32 rng(6);
  for (int i = 0; i < 1000; ++i) {
    const double roll = rng.uniform(-0.5, 0.5), pitch = rng.uniform(-0.5, 0.5), speed = rng.uniform(3, 6);
    const Eigen::Vector3d vb = random_vector(3, rng, -5, 5);
    const Eigen::VectorXd u = paddle_control(vb, roll, pitch, speed);
    CHECK(u.tail<3>().norm() == doctest::Approx(1.0).epsilon(1e-14));
    CHECK((vb - u.head<3>()).norm() == doctest::Approx(speed).epsilon(1e-12));
  }
  CHECK((paddle_normal(0, 0) - Eigen::Vector3d(0, 0, 1)).norm() == 0.0);
}

TEST_CASE("quaternion algebra") {
  Pcg32 rng(7);
  const Quat<double> qz = quat_from_axis_angle({0, 0, 1}, std::numbers::pi / 2);
  CHECK((quat_rotate(qz, Eigen::Vector3d(1, 0, 0)) - Eigen::Vector3d(0, 1, 0)).norm() < 1e-12);
  const Eigen::Vector3d v = random_vector(3, rng);
  CHECK((quat_rotate(Quat<double>::identity(), v) - v).norm() == 0.0);
  for (int i = 0; i < 100; ++i) {
    const Quat<double> a{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const Quat<double> b{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    CHECK(quat_multiply(a, b).norm() == doctest::Approx(a.norm() * b.norm()).epsilon(1e-12));
    // rotation-matrix oracle
    const Quat<double> u = quat_normalize(a);
    const Eigen::Quaterniond e(u.w, u.x, u.y, u.z);
    CHECK((quat_rotate(u, v) - e.toRotationMatrix() * v).norm() < 1e-12);
  }
  CHECK_THROWS_AS(quat_normalize(Quat<double>{0, 0, 0, 1e-13}), NumericError);
}

TEST_CASE("torque map") {
  const Eigen::Vector3d a = quad_torque(Eigen::Vector4d(1, 0, 1, 0));
  const Eigen::Vector3d b = quad_torque(Eigen::Vector4d(0, 1, 0, 1));
  CHECK(a.head<2>().norm() == 0.0);
  CHECK(b.head<2>().norm() == 0.0);
  CHECK(a.z() == -b.z());
  CHECK(a.z() != 0.0);
}

TEST_CASE("quadrotor hover and free fall") {
  const QuadrotorParams p;
  Eigen::VectorXd x = hover_state(3.0);
  x.segment<3>(3) << 0.5, -0.2, 0.1;
  const Eigen::VectorXd hover = quad_step(x, Eigen::Vector4d::Constant(9.81 / 4.0), p, false);
  CHECK((hover.segment<3>(3) - x.segment<3>(3)).norm() < 1e-12);
  CHECK((hover.head<3>() - (x.head<3>() + 0.1 * x.segment<3>(3))).norm() < 1e-12);
  CHECK((hover.segment<4>(6) - x.segment<4>(6)).norm() < 1e-15);
  const Eigen::VectorXd fall = quad_step(x, Eigen::Vector4d::Zero(), p, false);
  CHECK(fall[5] == doctest::Approx(x[5] - 0.981));
  Eigen::VectorXd bad = x;
  bad[6] = 3.0;
  CHECK_THROWS_AS(quad_step(bad, Eigen::Vector4d::Zero(), p, false), ContractViolation);
}

TEST_CASE("ground effect gain") {
  const QuadrotorParams p;
  const Eigen::Vector4d u(1, 2, 3, 4);
  // high up: no effect
  for (int i = 0; i < 4; ++i) CHECK(ground_effect(hover_state(2.0), u, i, p).gain == 0.0);
  // upright and low: theta = 0 <= pi/2, no effect
  for (int i = 0; i < 4; ++i) CHECK(ground_effect(hover_state(0.1), u, i, p).gain == 0.0);
  // upside down on the ground: h_prop = 0, theta = pi
  const Eigen::VectorXd flipped = with_quaternion(hover_state(0.0), quat_from_axis_angle({1, 0, 0}, std::numbers::pi));
  for (int i = 0; i < 4; ++i) {
    const GroundEffect g = ground_effect(flipped, u, i, p);
    CHECK(g.gain == doctest::Approx(0.5));
    CHECK(g.thrust == doctest::Approx(1.5 * u[i]));
  }
  // the inverted convention makes the upright case the strong one
  QuadrotorParams inv = p;
  inv.invert_theta = true;
  CHECK(ground_effect(hover_state(0.0), u, 0, inv).gain == doctest::Approx(0.5));
  CHECK(ground_effect(flipped, u, 0, inv).gain == 0.0);
}

TEST_CASE("ground effect stays in range and only adds thrust") {
  Pcg32 rng(8);
  for (bool invert : {false, true}) {
    QuadrotorParams p;
    p.invert_theta = invert;
    for (int i = 0; i < 10000; ++i) {
      Eigen::VectorXd x = hover_state(rng.uniform(-0.5, 3.0));
      const Eigen::Vector3d axis = random_vector(3, rng).normalized();
      x = with_quaternion(x, quat_from_axis_angle(axis, rng.uniform(-std::numbers::pi, std::numbers::pi)));
      const Eigen::VectorXd u = random_vector(4, rng, 0.0, 10.0);
      const int k = static_cast<int>(rng.below(4));
      const GroundEffect g = ground_effect(x, u, k, p);
      REQUIRE(g.gain >= 0.0);
      REQUIRE(g.gain <= p.ground_alpha);
      REQUIRE(g.thrust >= u[k]);
    }
  }
}

TEST_CASE("quaternion stays unit over long quadrotor rollouts") {
  const QuadrotorParams p;
  Pcg32 rng(9);
  Eigen::VectorXd x = hover_state(1.0);
  double worst = 0.0;
  for (int t = 0; t < 100000; ++t) {
    x = quad_step(x, random_vector(4, rng, 0.0, 10.0), p, t % 2 == 0);
    worst = std::max(worst, std::abs(x.segment<4>(6).norm() - 1.0));
    if (t % 1000 == 999) x.head<6>().setZero(), x[2] = 1.0, x.tail<3>().setZero();
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("quadrotor base linearization matches central differences") {
  const SystemSpec spec = SystemSpec::from_json({{"name", "quadrotor"}});
  const auto base = make_base_model(spec);
  const auto truth = make_true_model(spec);
  Pcg32 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    Eigen::VectorXd x = random_vector(13, rng);
    x[2] = rng.uniform(0.1, 2.0);
    x.segment<4>(6) = x.segment<4>(6).normalized();
    const Eigen::VectorXd u = random_vector(4, rng, 0.0, 10.0);
    for (const DynamicsModel* m : {base.get(), truth.get()}) {
      Eigen::MatrixXd A, B;
      const Eigen::VectorXd y = m->linearize(x, u, A, B);
      CHECK((y - m->step(x, u)).norm() < 1e-12);
      for (int j = 0; j < 13; ++j) {
        Eigen::VectorXd xp = x, xm = x;
        xp[j] += 1e-6;
        xm[j] -= 1e-6;
        const Eigen::VectorXd col = (m->step(xp, u) - m->step(xm, u)) / 2e-6;
        CHECK((A.col(j) - col).cwiseAbs().maxCoeff() < 1e-5);
      }
      for (int j = 0; j < 4; ++j) {
        Eigen::VectorXd up = u, um = u;
        up[j] += 1e-6;
        um[j] -= 1e-6;
        const Eigen::VectorXd col = (m->step(x, up) - m->step(x, um)) / 2e-6;
        CHECK((B.col(j) - col).cwiseAbs().maxCoeff() < 1e-5);
      }
    }
  }
}

TEST_CASE("datasets respect ranges and are deterministic") {
  for (const char* name : {"doubleIntegrator", "ball", "quadrotor"}) {
    const SystemSpec spec = SystemSpec::from_json({{"name", name}});
    const nlohmann::json ranges = resolve_ranges(name, {});
    const Dataset a = sample_dataset(spec, 500, ranges, 31, 0.0);
    const Dataset b = sample_dataset(spec, 500, ranges, 31, 0.0);
    CHECK(dataset_to_jsonl(a) == dataset_to_jsonl(b));
    CHECK(dataset_to_jsonl(a) != dataset_to_jsonl(sample_dataset(spec, 500, ranges, 32, 0.0)));
    CHECK(a.state_dim == spec.state_dim());
    a.validate();
  }
  const SystemSpec di = SystemSpec::from_json({{"name", "doubleIntegrator"}});
  const Dataset d = sample_dataset(di, 15000, resolve_ranges("doubleIntegrator", {}), 1, 0.0);
  double mean = 0.0;
  for (const auto& s : d.samples) {
    REQUIRE(std::abs(s.state[0]) <= 2.0);
    REQUIRE(std::abs(s.state[1]) <= 2.5);
    REQUIRE(std::abs(s.control[0]) <= 10.0);
    mean += s.state[0];
  }
  CHECK(std::abs(mean / 15000.0) < 0.05);

  const SystemSpec quad = SystemSpec::from_json({{"name", "quadrotor"}});
  const Dataset q = sample_dataset(quad, 2000, resolve_ranges("quadrotor", {}), 2, 0.0);
  for (const auto& s : q.samples) {
    REQUIRE(std::abs(s.state[0]) <= 10.0);
    REQUIRE(s.state[2] >= 0.1);
    REQUIRE(s.state[2] <= 5.0);
    REQUIRE(std::abs(s.state.segment<4>(6).norm() - 1.0) < 1e-12);
    REQUIRE(tilt_angle({s.state[6], s.state[7], s.state[8], s.state[9]}) <= 0.4 + 1e-12);
    REQUIRE(s.control.minCoeff() >= 0.0);
    REQUIRE(s.control.maxCoeff() <= 10.0);
  }
}

TEST_CASE("dataset files round-trip") {
  const SystemSpec spec = SystemSpec::from_json({{"name", "ball"}});
  const Dataset a = sample_dataset(spec, 50, resolve_ranges("ball", {}), 3, 0.01);
  const auto path = std::filesystem::temp_directory_path() / "saml_ds_roundtrip.jsonl";
  write_dataset(path, a);
  const Dataset b = read_dataset(path);
  CHECK(dataset_to_jsonl(a) == dataset_to_jsonl(b));
  CHECK(b.provenance.system == "ball");
  std::filesystem::remove(path);
  std::filesystem::remove(header_path_for(path));
}

TEST_CASE("system configs reject bad parameters") {
  CHECK_THROWS_AS(SystemSpec::from_json({{"name", "pendulum"}}), ConfigError);
  CHECK_THROWS_AS(SystemSpec::from_json({{"name", "doubleIntegrator"}, {"params", {{"dt", 0.0}}}}), ConfigError);
  CHECK_THROWS_AS(SystemSpec::from_json({{"name", "quadrotor"}, {"params", {{"alpha", 2.0}}}}), ConfigError);
  const SystemSpec s = SystemSpec::from_json({{"name", "quadrotor"}, {"params", {{"invertTheta", true}}}});
  CHECK(s.quad.invert_theta);
  CHECK(SystemSpec::from_json(s.to_json()).to_json() == s.to_json());
}
