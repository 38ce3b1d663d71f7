#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "teleop/impedance.hpp"

using namespace teleop;

namespace {

// Direct transcription of the impedance law with full matrices and the
// quaternion-log rotation error.
Vec6 oracle_wrench(const MotionState& cur, const MotionState& tgt, const Mat6& k, const Mat6& d) {
  const Mat3 r = cur.pose.q.toRotationMatrix();
  const Mat3 rt = tgt.pose.q.toRotationMatrix();
  Vec6 e, ev;
  e.head<3>() = tgt.pose.p - cur.pose.p;
  e.tail<3>() = oracle::quat_log_rotation_vector(r.transpose() * rt);
  ev.head<3>() = tgt.twist.v - cur.twist.v;
  ev.tail<3>() = tgt.twist.w - cur.twist.w;
  return k * e + d * ev;
}

MotionState random_state(std::mt19937_64& rng) {
  auto u = [&](double s) { return oracle::uniform(rng, -s, s); };
  MotionState s;
  s.pose = Pose(Vec3(u(1), u(1), u(1)), oracle::random_rotation(rng, kPi - 1e-3));
  s.twist.v = Vec3(u(2), u(2), u(2));
  s.twist.w = Vec3(u(3), u(3), u(3));
  return s;
}

ImpedanceGains random_gains(std::mt19937_64& rng) {
  Vec6 k;
  for (int i = 0; i < 6; ++i) k[i] = oracle::uniform(rng, 0.0, i < 3 ? 600.0 : 30.0);
  Mat6 a;
  for (int i = 0; i < 36; ++i) a(i) = oracle::uniform(rng, -3.0, 3.0);
  const Mat6 d = a * a.transpose();
  return ImpedanceGains(k, 0.5 * (d + d.transpose()));
}

SerialChain planar_two_link() {
  return SerialChain({RevoluteJoint{Pose::identity(), Vec3::UnitZ()},
                      RevoluteJoint{Pose::from_translation(Vec3(1, 0, 0)), Vec3::UnitZ()}},
                     Pose::from_translation(Vec3(1, 0, 0)));
}

}  // namespace

TEST_CASE("impedance_wrench: zero error gives zero wrench") {
  const auto gains = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01);
  MotionState s;
  s.pose = Pose(Vec3(0.3, -0.2, 0.5), rot_z(0.3) * rot_x(-1.1));
  s.twist.v = Vec3(0.1, 0.2, -0.3);
  s.twist.w = Vec3(1.0, 0.0, -0.5);
  const Wrench w = impedance_wrench(s, s, gains);
  CHECK(w.f.norm() == 0.0);
  CHECK(w.tau.norm() == 0.0);
}

TEST_CASE("impedance_wrench: 0.1 m offset at 200 N/m gives 20 N") {
  const auto gains = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01);
  MotionState cur, tgt;
  tgt.pose.p = Vec3(0.1, 0.0, 0.0);
  const Wrench w = impedance_wrench(cur, tgt, gains);
  CHECK(w.f.x() == doctest::Approx(20.0).epsilon(1e-15));
  CHECK(w.f.y() == 0.0);
  CHECK(w.f.z() == 0.0);
  CHECK(w.tau.norm() == 0.0);
}

TEST_CASE("impedance_wrench matches the direct-evaluation oracle") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    const auto gains = random_gains(rng);
    const MotionState cur = random_state(rng), tgt = random_state(rng);
    const Vec6 got = impedance_wrench(cur, tgt, gains).stacked();
    const Vec6 want = oracle_wrench(cur, tgt, gains.stiffness(), gains.damping());
    CHECK((got - want).cwiseAbs().maxCoeff() < 1e-12 * std::max(1.0, want.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("impedance_wrench properties") {
  std::mt19937_64 rng(22);
  const auto gains = random_gains(rng);
  SUBCASE("homogeneous in the error terms") {
    for (int i = 0; i < 50; ++i) {
      MotionState cur, tgt;
      tgt.pose.p = Vec3(oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1), oracle::uniform(rng, -1, 1));
      tgt.twist.v = Vec3(oracle::uniform(rng, -1, 1), 0.2, -0.1);
      tgt.twist.w = Vec3(0.3, oracle::uniform(rng, -1, 1), 0.0);
      const Vec3 axis = oracle::random_unit(rng);
      const double angle = oracle::uniform(rng, 0.0, 1.0);
      const double s = oracle::uniform(rng, 0.1, 2.5);
      tgt.pose.q = Quat(Eigen::AngleAxisd(angle, axis));
      MotionState scaled = tgt;
      scaled.pose.p *= s;
      scaled.twist.v *= s;
      scaled.twist.w *= s;
      scaled.pose.q = Quat(Eigen::AngleAxisd(s * angle, axis));
      const Vec6 w1 = impedance_wrench(cur, tgt, gains).stacked();
      const Vec6 ws = impedance_wrench(cur, scaled, gains).stacked();
      CHECK((ws - s * w1).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
  SUBCASE("pure offset pulls towards the target") {
    const auto iso = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01);
    for (int i = 0; i < 50; ++i) {
      MotionState cur, tgt;
      cur.pose = Pose(Vec3(0.2, 0.1, 0.3), oracle::random_rotation(rng, kPi - 0.1));
      tgt.pose = cur.pose;
      const Vec3 dp(oracle::uniform(rng, -0.2, 0.2), oracle::uniform(rng, -0.2, 0.2), oracle::uniform(rng, -0.2, 0.2));
      tgt.pose.p += dp;
      const Wrench w = impedance_wrench(cur, tgt, iso);
      CHECK(w.f.cross(dp).norm() < 1e-12);
      CHECK(w.f.dot(dp) > 0.0);
      CHECK(w.f.norm() == doctest::Approx(200.0 * dp.norm()).epsilon(1e-12));
    }
  }
}

TEST_CASE("impedance_wrench rejects non-finite input") {
  const auto gains = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01);
  MotionState cur, tgt;
  tgt.twist.v.x() = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(impedance_wrench(cur, tgt, gains), std::invalid_argument);
}

TEST_CASE("ImpedanceGains validation") {
  Vec6 k = Vec6::Constant(100.0);
  CHECK_NOTHROW(ImpedanceGains(k, Mat6::Identity()));
  k[4] = -1.0;
  CHECK_THROWS_AS(ImpedanceGains(k, Mat6::Identity()), std::invalid_argument);
  Mat6 asym = Mat6::Identity();
  asym(0, 1) = 0.5;
  CHECK_THROWS_AS(ImpedanceGains(Vec6::Ones(), asym), std::invalid_argument);
  Mat6 indefinite = Mat6::Identity();
  indefinite(2, 2) = -0.1;
  CHECK_THROWS_AS(ImpedanceGains(Vec6::Ones(), indefinite), std::invalid_argument);

  const auto g = ImpedanceGains::with_damping_ratio(200.0, 10.0, 1.0, 0.01, 1.0);
  CHECK(g.damping()(0, 0) == doctest::Approx(2.0 * std::sqrt(200.0)));
  CHECK(g.damping()(5, 5) == doctest::Approx(2.0 * std::sqrt(0.1)));
}

TEST_CASE("Jacobian transpose on the planar two-link arm") {
  const SerialChain chain = planar_two_link();
  const Eigen::VectorXd q = Eigen::Vector2d::Zero();
  CHECK(chain.forward_kinematics(q).p.isApprox(Vec3(2, 0, 0)));
  const Eigen::MatrixXd j = jacobian(chain, q);
  Wrench tip;
  tip.f = Vec3(0, 10, 0);
  // Lever arms of 2 m and 1 m about the two joints.
  const Eigen::VectorXd tau = joint_torques(j, tip);
  REQUIRE(tau.size() == 2);
  CHECK(tau[0] == doctest::Approx(20.0).epsilon(1e-14));
  CHECK(tau[1] == doctest::Approx(10.0).epsilon(1e-14));

  CHECK(joint_torques(j, Wrench{}).norm() == 0.0);
}

TEST_CASE("joint_torques on an identity Jacobian returns the wrench") {
  Wrench w;
  w.f = Vec3(1, 2, 3);
  w.tau = Vec3(4, 5, 6);
  const Eigen::VectorXd tau = joint_torques(Eigen::MatrixXd::Identity(6, 6), w);
  CHECK((tau - w.stacked()).norm() == 0.0);
  CHECK_THROWS_AS(joint_torques(Eigen::MatrixXd::Identity(5, 5), w), std::invalid_argument);
}

TEST_CASE("translational Jacobian matches central differences") {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 7);
    std::vector<RevoluteJoint> joints;
    for (int i = 0; i < n; ++i) {
      RevoluteJoint j;
      j.link = Pose(Vec3(oracle::uniform(rng, -0.4, 0.4), oracle::uniform(rng, -0.4, 0.4),
                         oracle::uniform(rng, -0.4, 0.4)),
                    oracle::random_rotation(rng, kPi));
      j.axis = oracle::random_unit(rng);
      joints.push_back(j);
    }
    const SerialChain chain(joints, Pose::from_translation(Vec3(0.1, 0.0, 0.05)));
    Eigen::VectorXd q(n);
    for (int i = 0; i < n; ++i) q[i] = oracle::uniform(rng, -kPi, kPi);

    const Eigen::MatrixXd j = jacobian(chain, q);
    const double h = 1e-6;
    for (int i = 0; i < n; ++i) {
      Eigen::VectorXd qp = q, qm = q;
      qp[i] += h;
      qm[i] -= h;
      const Vec3 fd = (chain.forward_kinematics(qp).p - chain.forward_kinematics(qm).p) / (2 * h);
      CHECK((j.block<3, 1>(0, i) - fd).cwiseAbs().maxCoeff() < 1e-6);
    }
  }
}

TEST_CASE("SerialChain errors") {
  CHECK_THROWS_AS(SerialChain({}), std::invalid_argument);
  CHECK_THROWS_AS(SerialChain({RevoluteJoint{Pose::identity(), Vec3(1, 1, 0)}}), std::invalid_argument);
  const SerialChain chain = planar_two_link();
  CHECK_THROWS_AS(jacobian(chain, Eigen::VectorXd::Zero(3)), std::invalid_argument);
}
