#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pme;

TEST(BundleAdjustment, RotationExp) {
  EXPECT_EQ(rotation_exp(Eigen::Vector3d::Zero()), Eigen::Matrix3d::Identity());
  const Eigen::Matrix3d r = rotation_exp({0.0, 0.0, 0.5});
  EXPECT_NEAR(r(0, 0), std::cos(0.5), 1e-15);
  EXPECT_NEAR(r(1, 0), std::sin(0.5), 1e-15);
  EXPECT_NEAR(rotation_angle_between(r, Eigen::Matrix3d::Identity()), 0.5, 1e-12);
}

TEST(BundleAdjustment, JacobianMatchesFiniteDifferences) {
  std::mt19937_64 rng(1);
  int states = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const BAProblem exact = oracle::ba_instance(rng, 2 + trial % 3, 3 + trial % 4);
    const BAProblem p = oracle::perturbed(rng, exact, 0.05, 0.01);
    BAOptions o;
    if (trial % 2 == 0) o.fixed_cameras = {0};
    const BALayout layout = make_layout(p, o);
    const Eigen::MatrixXd analytic = ba_dense_jacobian(p, layout);
    const Eigen::MatrixXd numeric = oracle::numeric_jacobian(p, layout);
    ASSERT_EQ(analytic.rows(), numeric.rows());
    ASSERT_EQ(analytic.cols(), numeric.cols());
    const double rel = (analytic - numeric).norm() / numeric.norm();
    EXPECT_LT(rel, 1e-5) << "trial " << trial;
    ++states;
  }
  EXPECT_EQ(states, 100);
}

TEST(BundleAdjustment, ExactStartStaysPut) {
  std::mt19937_64 rng(2);
  BAProblem p = oracle::ba_instance(rng, 4, 20);
  BAOptions o;
  o.fixed_cameras = {0};
  const BAReport r = bundle_adjust(p, o);
  EXPECT_LT(r.final_rmse, 1e-9);
  EXPECT_TRUE(r.converged);
}

TEST(BundleAdjustment, RmseNonIncreasing) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const BAProblem exact = oracle::ba_instance(rng, 4, 15);
    BAProblem p = oracle::perturbed(rng, exact, 0.05, 0.01);
    std::normal_distribution<double> px(0.0, 1.0);
    for (auto& obs : p.observations) obs.pixel += Eigen::Vector2d(px(rng), px(rng));
    BAOptions o;
    o.fixed_cameras = {0};
    o.huber = trial % 2 == 1;
    const BAReport r = bundle_adjust(p, o);
    for (std::size_t i = 1; i < r.rmse_trace.size(); ++i) EXPECT_LE(r.rmse_trace[i], r.rmse_trace[i - 1]);
    EXPECT_LE(r.final_rmse, r.initial_rmse);
    EXPECT_LT(r.final_rmse, 1.5);  // about the injected pixel noise
  }
}

TEST(BundleAdjustment, FixedCamerasRestorePoints) {
  std::mt19937_64 rng(4);
  const BAProblem exact = oracle::ba_instance(rng, 4, 12);
  BAProblem p = oracle::perturbed(rng, exact, 0.05, 0.0);
  BAOptions o;
  o.fix_all_cameras = true;
  bundle_adjust(p, o);
  for (std::size_t c = 0; c < p.poses.size(); ++c) EXPECT_EQ(p.poses[c], exact.poses[c]);
  for (std::size_t i = 0; i < p.points.size(); ++i) EXPECT_LT((p.points[i] - exact.points[i]).norm(), 1e-6);
}

TEST(BundleAdjustment, IterationCapKeepsBestIterate) {
  std::mt19937_64 rng(5);
  const BAProblem exact = oracle::ba_instance(rng, 3, 10);
  BAProblem p = oracle::perturbed(rng, exact, 0.1, 0.02);
  BAOptions o;
  o.max_iterations = 1;
  o.fixed_cameras = {0};
  try {
    bundle_adjust(p, o);
    FAIL() << "expected the cap to trigger";
  } catch (const NonConvergenceError& e) {
    EXPECT_EQ(e.report().termination, "iteration cap");
    EXPECT_LE(e.report().final_rmse, e.report().initial_rmse);
    EXPECT_NEAR(ba_rmse(ba_cost(e.best(), o), e.best().observations.size()), e.report().final_rmse, 1e-9);
  }
}

TEST(BundleAdjustment, PointBehindCameraRejected) {
  std::mt19937_64 rng(6);
  BAProblem p = oracle::ba_instance(rng, 2, 4);
  p.points[0] = p.poses[0].center() - p.poses[0].rotation.row(2).transpose();
  EXPECT_THROW(bundle_adjust(p), DegenerateError);
}
