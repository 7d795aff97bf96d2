#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pme;

namespace {

Sample s2(double x, double y, int camera, int local = 0) {
  return {FeatureVector(Eigen::Vector2d(x, y)), camera, local};
}

FeatureVector v2(double x, double y) { return FeatureVector(Eigen::Vector2d(x, y)); }

}  // namespace

// ---------------------------------------------------------------------------
// Step 1
// ---------------------------------------------------------------------------

TEST(SolveAssignment, SeparatedPairs) {
  const std::vector<Sample> s = {s2(0, 0, 0), s2(0.1, 0, 1), s2(5, 5, 0), s2(5, 5.2, 1)};
  const std::vector<FeatureVector> c = {v2(5, 5.1), v2(0.05, 0)};
  const auto labels = solve_assignment(s, c, 4);
  EXPECT_EQ(labels, (std::vector<int>{1, 1, 0, 0}));
  const double hand = 0.5 * (0.0025 + 0.0025 + 0.01 + 0.01);
  EXPECT_NEAR(clustering_objective(s, c, labels), hand, 1e-12);
}

TEST(SolveAssignment, DuplicatedCentersGiveZero) {
  const std::vector<FeatureVector> c = {v2(1, 0), v2(0, 1), v2(-1, 0)};
  std::vector<Sample> s;
  for (int rep = 0; rep < 2; ++rep)
    for (int k = 0; k < 3; ++k) s.push_back({c[k], rep, k});
  const auto labels = solve_assignment(s, c, 2);
  EXPECT_EQ(clustering_objective(s, c, labels), 0.0);
}

TEST(SolveAssignment, SizeBoundsOverrideNearestCenter) {
  // All four samples sit on center 0, but every cluster needs two members.
  const std::vector<Sample> s = {s2(0, 0, 0), s2(0, 0, 1), s2(0, 0, 2), s2(0, 0, 3)};
  const std::vector<FeatureVector> c = {v2(0, 0), v2(3, 0)};
  const auto labels = solve_assignment(s, c, 4);
  const int in_zero = static_cast<int>(std::count(labels.begin(), labels.end(), 0));
  EXPECT_EQ(in_zero, 2);
}

TEST(SolveAssignment, Infeasible) {
  const std::vector<Sample> s = {s2(0, 0, 0), s2(1, 0, 1), s2(2, 0, 2)};
  EXPECT_THROW(solve_assignment(s, std::vector<FeatureVector>{v2(0, 0), v2(1, 1)}, 4), InfeasibleError);
  const std::vector<Sample> five = {s2(0, 0, 0), s2(1, 0, 1), s2(2, 0, 2), s2(3, 0, 0), s2(4, 0, 1)};
  EXPECT_THROW(solve_assignment(five, std::vector<FeatureVector>{v2(0, 0), v2(1, 1)}, 2), InfeasibleError);
}

TEST(SolveAssignment, MatchesEnumeration) {
  std::mt19937_64 rng(101);
  std::uniform_int_distribution<int> kdist(1, 3), ndist(2, 8), cams(2, 4);
  int checked = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const int k = kdist(rng), n = ndist(rng), cap = cams(rng);
    if (2 * k > n || k * cap < n) continue;
    const auto samples = oracle::random_samples(rng, n, cap, 4);
    std::vector<FeatureVector> centers;
    for (int c = 0; c < k; ++c) centers.push_back(oracle::random_unit(rng, 4));
    const auto labels = solve_assignment(samples, centers, cap);
    std::vector<int> sizes(k, 0);
    for (int l : labels) ++sizes[l];
    for (int sz : sizes) {
      EXPECT_GE(sz, 2);
      EXPECT_LE(sz, cap);
    }
    EXPECT_NEAR(clustering_objective(samples, centers, labels), oracle::brute_assignment(samples, centers, cap), 1e-9)
        << "trial " << trial;
    ++checked;
  }
  EXPECT_GT(checked, 50);
}

TEST(Seeding, ReproducibleAndDistinct) {
  std::mt19937_64 rng(3);
  const auto s = oracle::random_samples(rng, 12, 3, 5);
  const auto a = seed_centers(s, 4, 77);
  const auto b = seed_centers(s, 4, 77);
  ASSERT_EQ(a.size(), 4u);
  for (int i = 0; i < 4; ++i) EXPECT_EQ(a[i], b[i]);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) EXPECT_NE(a[i], a[j]);
}

TEST(Seeding, CoincidentSamples) {
  std::vector<Sample> s(6, s2(1, 0, 0));
  const auto c = seed_centers(s, 3, 1);
  EXPECT_EQ(c.size(), 3u);
}

TEST(ConstrainedKMeans, NoiselessViewsGivePurityOne) {
  std::mt19937_64 rng(8);
  std::vector<FeatureVector> people;
  for (int p = 0; p < 4; ++p) people.push_back(oracle::random_unit(rng, 16));
  std::vector<Sample> s;
  std::vector<int> truth;
  for (int cam = 0; cam < 3; ++cam)
    for (int p = 0; p < 4; ++p) {
      s.push_back({people[p], cam, p});
      truth.push_back(p);
    }
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    ClusteringOptions o;
    o.seed = seed;
    const ClusterResult r = constrained_kmeans(s, 4, 3, o);
    EXPECT_EQ(clustering_scores(r.assignments, truth).purity, 1.0) << seed;
  }
}

TEST(ConstrainedKMeans, BoundsAndMonotoneObjective) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 40; ++trial) {
    const int k = 2 + trial % 3, cams = 4;
    const auto s = oracle::random_samples(rng, 2 * k + trial % (k * cams - 2 * k + 1), cams, 8);
    ClusteringOptions o;
    o.seed = trial;
    const ClusterResult r = constrained_kmeans(s, k, cams, o);
    for (int sz : r.cluster_sizes()) {
      EXPECT_GE(sz, 2);
      EXPECT_LE(sz, cams);
    }
    for (std::size_t i = 1; i < r.objective_trace.size(); ++i)
      EXPECT_LE(r.objective_trace[i], r.objective_trace[i - 1]);
    EXPECT_EQ(r.iterations, static_cast<int>(r.objective_trace.size()));
  }
}

TEST(ConstrainedKMeans, Deterministic) {
  std::mt19937_64 rng(10);
  const auto s = oracle::random_samples(rng, 14, 4, 8);
  ClusteringOptions o;
  o.seed = 5;
  const ClusterResult a = constrained_kmeans(s, 4, 4, o);
  const ClusterResult b = constrained_kmeans(s, 4, 4, o);
  EXPECT_EQ(a.assignments, b.assignments);
  EXPECT_EQ(a.objective_trace, b.objective_trace);
}

TEST(ConstrainedKMeans, IterationCap) {
  std::mt19937_64 rng(12);
  const auto s = oracle::random_samples(rng, 16, 4, 8);
  ClusteringOptions o;
  o.max_iterations = 1;
  EXPECT_EQ(constrained_kmeans(s, 4, 4, o).iterations, 1);
}

TEST(UnconstrainedKMeans, IgnoresSizeBounds) {
  std::vector<Sample> s = {s2(0, 0, 0), s2(0, 0.01, 1), s2(0.01, 0, 2), s2(10, 10, 0)};
  const ClusterResult r = unconstrained_kmeans(s, 2);
  auto sizes = r.cluster_sizes();
  std::sort(sizes.begin(), sizes.end());
  EXPECT_EQ(sizes, (std::vector<int>{1, 3}));
}

// ---------------------------------------------------------------------------
// Step 2
// ---------------------------------------------------------------------------

TEST(Conflicts, NoneWithoutSharedCameras) {
  ClusterResult r;
  r.num_clusters = 2;
  r.assignments = {0, 0, 1, 1};
  const std::vector<Sample> s = {s2(0, 0, 0), s2(0, 0, 1), s2(0, 0, 0), s2(0, 0, 1)};
  EXPECT_TRUE(detect_conflicts(r, s).empty());
}

TEST(Conflicts, PairFromOneCamera) {
  // cluster {cam1-p1, cam1-p2, cam2-p3}
  ClusterResult r;
  r.num_clusters = 1;
  r.assignments = {0, 0, 0};
  const std::vector<Sample> s = {s2(0, 0, 1, 1), s2(0, 0, 1, 2), s2(0, 0, 2, 3)};
  const auto g = detect_conflicts(r, s);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].camera_id, 1);
  EXPECT_EQ(g[0].members, (std::vector<int>{0, 1}));
}

TEST(Conflicts, TripleFromOneCamera) {
  ClusterResult r;
  r.num_clusters = 2;
  r.assignments = {1, 0, 1, 1, 0};
  const std::vector<Sample> s = {s2(0, 0, 2, 2), s2(0, 0, 2, 9), s2(0, 0, 2, 3), s2(0, 0, 2, 5), s2(0, 0, 1, 0)};
  const auto g = detect_conflicts(r, s);
  ASSERT_EQ(g.size(), 1u);
  EXPECT_EQ(g[0].cluster, 1);
  EXPECT_EQ(g[0].members, (std::vector<int>{0, 2, 3}));
}

// ---------------------------------------------------------------------------
// Step 3
// ---------------------------------------------------------------------------

TEST(Sds, SingleEligibleIsInfinite) {
  const std::vector<FeatureVector> c = {v2(0, 0), v2(1, 0)};
  const Occupancy occ = {{0}, {}};
  EXPECT_EQ(sds(s2(0.2, 0, 0), c, occ), std::numeric_limits<double>::infinity());
}

TEST(Sds, RatioOfTwoNearestEligible) {
  // The nearest center (index 3) already holds camera 0 and does not count.
  const std::vector<FeatureVector> c = {v2(1, 0), v2(0, 2), v2(5, 0), v2(0.1, 0)};
  const Occupancy occ = {{1}, {}, {2}, {0}};
  EXPECT_DOUBLE_EQ(sds(s2(0, 0, 0), c, occ), 2.0);
}

TEST(Sds, EquidistantIsOne) {
  const std::vector<FeatureVector> c = {v2(3, 0), v2(0, 3)};
  EXPECT_DOUBLE_EQ(sds(s2(0, 0, 0), c, Occupancy(2)), 1.0);
}

TEST(Sds, NoEligibleThrows) {
  const std::vector<FeatureVector> c = {v2(3, 0), v2(0, 3)};
  EXPECT_THROW(sds(s2(0, 0, 4), c, Occupancy{{4}, {4}}), NoEligibleClusterError);
}

TEST(Reassign, SingleFlaggedTakesOnlyEligibleCluster) {
  ClusterResult r;
  r.num_clusters = 2;
  r.centers = {v2(0, 0), v2(4, 0)};
  r.assignments = {0, 0, 1};
  const std::vector<Sample> s = {s2(0, 0, 0), s2(0.1, 0, 1), s2(4, 0, 0)};
  const std::vector<ConflictGroup> groups = {{0, 0, {0}}};
  std::vector<ReassignmentStep> log;
  const ClusterResult out = reassign_conflicts(r, groups, s, &log);
  // Cluster 1 already has camera 0, so cluster 0 is the only eligible one.
  EXPECT_EQ(out.assignments[0], 0);
  ASSERT_EQ(log.size(), 1u);
  EXPECT_EQ(log[0].score, std::numeric_limits<double>::infinity());
  EXPECT_FALSE(out.fallback_flags[0]);
}

TEST(Reassign, HigherSdsGoesFirstAndOrderMatters) {
  // A (index 0) and B (index 1), both camera 0, collide in cluster 2.
  //   A: d(c0) = 0.5, d(c1) = 2.5  -> SDS 5
  //   B: d(c0) = 0.9, d(c1) = 1.1  -> SDS 1.22
  // A claims c0; B then finds c0 taken by camera 0 and moves to c1, although
  // c0 is its own nearest center.
  ClusterResult r;
  r.num_clusters = 3;
  r.centers = {v2(0, 0), v2(2, 0), v2(100, 0)};
  r.assignments = {2, 2, 0, 1, 2};
  const std::vector<Sample> s = {s2(-0.5, 0, 0), s2(0.9, 0, 0), s2(0, 0.1, 1), s2(2, 0.1, 2), s2(100, 0, 3)};
  const auto groups = detect_conflicts(r, s);
  ASSERT_EQ(groups.size(), 1u);
  std::vector<ReassignmentStep> log;
  const ClusterResult out = reassign_conflicts(r, groups, s, &log);
  ASSERT_EQ(log.size(), 2u);
  EXPECT_EQ(log[0].sample, 0);
  EXPECT_EQ(log[0].cluster, 0);
  EXPECT_NEAR(log[0].score, 5.0, 1e-12);
  EXPECT_EQ(log[1].sample, 1);
  EXPECT_EQ(log[1].cluster, 1);
  EXPECT_EQ(out.assignments, (std::vector<int>{0, 1, 0, 1, 2}));
  EXPECT_TRUE(out.conflict_flags[0] && out.conflict_flags[1]);
  EXPECT_FALSE(out.conflict_flags[2]);

  // Serving B first would have given the opposite placement.
  EXPECT_GT(sds(s[1], r.centers, Occupancy{{1}, {2}, {3}}), 1.0);
  EXPECT_LT(sds(s[1], r.centers, Occupancy{{1}, {2}, {3}}), log[0].score);
}

TEST(Reassign, FallbackWhenEveryClusterHoldsTheCamera) {
  ClusterResult r;
  r.num_clusters = 2;
  r.centers = {v2(0, 0), v2(4, 0)};
  r.assignments = {0, 0, 1};
  const std::vector<Sample> s = {s2(0, 0, 0), s2(3.5, 0, 0), s2(4, 0, 0)};
  // Flag only sample 1; clusters 0 and 1 keep camera 0 through samples 0 and 2.
  const std::vector<ConflictGroup> groups = {{0, 0, {1}}};
  std::vector<ReassignmentStep> log;
  const ClusterResult out = reassign_conflicts(r, groups, s, &log);
  EXPECT_TRUE(out.fallback_flags[1]);
  EXPECT_EQ(out.assignments[1], 1);  // overall nearest
  ASSERT_EQ(log.size(), 1u);
  EXPECT_TRUE(log[0].fallback);
  EXPECT_TRUE(std::isnan(log[0].score));
}

TEST(Reassign, MatchesLiteralReimplementation) {
  std::mt19937_64 rng(404);
  int fallbacks = 0;
  for (int trial = 0; trial < 300; ++trial) {
    oracle::ConflictInstance in = oracle::random_conflict_instance(rng, trial);
    const auto groups = detect_conflicts(in.result, in.samples);
    std::vector<int> flagged;
    for (const auto& g : groups) flagged.insert(flagged.end(), g.members.begin(), g.members.end());
    std::vector<int> expected_fallbacks;
    const auto expected =
        oracle::literal_step3(in.result.assignments, in.result.centers, in.samples, flagged, &expected_fallbacks);
    const ClusterResult out = reassign_conflicts(in.result, groups, in.samples);
    EXPECT_EQ(out.assignments, expected) << "trial " << trial;
    for (int i : expected_fallbacks) EXPECT_TRUE(out.fallback_flags[i]);
    fallbacks += static_cast<int>(expected_fallbacks.size());
  }
  EXPECT_GT(fallbacks, 0);  // the random instances reach the fallback branch
}

TEST(Reassign, Properties) {
  std::mt19937_64 rng(505);
  for (int trial = 0; trial < 200; ++trial) {
    oracle::ConflictInstance in = oracle::random_conflict_instance(rng, trial);
    const auto groups = detect_conflicts(in.result, in.samples);
    std::vector<ReassignmentStep> log;
    const ClusterResult out = reassign_conflicts(in.result, groups, in.samples, &log);

    // Untouched outside conflict groups.
    for (std::size_t i = 0; i < in.samples.size(); ++i)
      if (!out.conflict_flags[i]) {
        EXPECT_EQ(out.assignments[i], in.result.assignments[i]);
      }

    // Source constraint except for fallbacks.
    std::map<std::pair<int, int>, int> count;
    for (std::size_t i = 0; i < in.samples.size(); ++i)
      if (!out.fallback_flags[i]) ++count[{out.assignments[i], in.samples[i].camera_id}];
    for (const auto& [key, c] : count) EXPECT_LE(c, 1) << "trial " << trial;

    // Each pick had the highest SDS among the samples still waiting.
    Occupancy occ(in.result.num_clusters);
    std::set<int> pending;
    for (std::size_t i = 0; i < in.samples.size(); ++i) {
      if (out.conflict_flags[i]) pending.insert(static_cast<int>(i));
      else occ[out.assignments[i]].insert(in.samples[i].camera_id);
    }
    for (const auto& step : log) {
      if (!step.fallback) {
        for (int other : pending) {
          if (eligible_distances(in.samples[other], out.centers, occ).sorted.empty()) continue;
          EXPECT_GE(step.score, sds(in.samples[other], out.centers, occ));
        }
      }
      occ[step.cluster].insert(in.samples[step.sample].camera_id);
      pending.erase(step.sample);
    }
    EXPECT_TRUE(pending.empty());
  }
}

// ---------------------------------------------------------------------------
// Steps 1-3
// ---------------------------------------------------------------------------

TEST(MatchPeople, TwoCamerasTwoPeople) {
  const std::vector<Sample> s = {s2(1, 0, 0, 0), s2(0, 1, 0, 1), s2(0.05, 1, 1, 0), s2(1, 0.05, 1, 1)};
  const ClusterResult r = match_people(s, 2, 2);
  EXPECT_EQ(r.assignments[0], r.assignments[3]);
  EXPECT_EQ(r.assignments[1], r.assignments[2]);
  EXPECT_NE(r.assignments[0], r.assignments[1]);
}

TEST(MatchPeople, RejectsTooFewClusters) {
  const std::vector<Sample> s = {s2(1, 0, 0), s2(0, 1, 0), s2(1, 1, 0), s2(0, 0, 1), s2(0, 0, 1), s2(1, 0, 1)};
  EXPECT_THROW(match_people(s, 2, 2), InfeasibleError);
}

TEST(MatchPeople, ResolvesConfusionThatKMeansViolates) {
  // People 0 and 1 look alike; the source constraint must pull them apart.
  SynthSpec spec;
  spec.num_people = 4;
  spec.num_frames = 1;
  spec.dim = 32;
  spec.sigma_view = 0.15;
  spec.sigma_frame = 0.02;
  spec.confusion_pairs = {{0, 1}, {2, 3}};
  spec.confusion_offset = 0.05;
  int kmeans_violations = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    spec.seed = seed;
    const SceneFile scene = generate(spec);
    std::vector<Sample> samples;
    std::map<int, int> per_camera;
    for (const auto& d : scene.frames[0].detections)
      samples.push_back({d.feature, d.camera_id, per_camera[d.camera_id]++});
    ClusteringOptions o;
    o.seed = seed;
    const ClusterResult full = match_people(samples, 4, spec.num_cameras, o);
    std::map<std::pair<int, int>, int> count;
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!full.fallback_flags[i]) {
        EXPECT_EQ((++count[{full.assignments[i], samples[i].camera_id}]), 1);
      }
    const ClusterResult plain = unconstrained_kmeans(samples, 4, o);
    kmeans_violations += detect_conflicts(plain, samples).empty() ? 0 : 1;
  }
  EXPECT_GT(kmeans_violations, 0);
}

TEST(MatchPeople, CleanSceneScoresPerfect) {
  SynthSpec spec;
  spec.seed = 2;
  spec.num_people = 3;
  spec.num_frames = 1;
  spec.sigma_view = 0.0;
  spec.sigma_frame = 0.0;
  const SceneFile scene = generate(spec);
  std::vector<Sample> samples;
  std::vector<int> truth;
  std::map<int, int> per_camera;
  for (const auto& d : scene.frames[0].detections) {
    samples.push_back({d.feature, d.camera_id, per_camera[d.camera_id]++});
    truth.push_back(*d.person_hint);
  }
  const ClusterResult r = match_people(samples, 3, spec.num_cameras);
  const ClusteringScores sc = clustering_scores(r.assignments, truth);
  EXPECT_EQ(sc.purity, 1.0);
  EXPECT_EQ(sc.ri, 1.0);
  EXPECT_EQ(sc.ari, 1.0);
  EXPECT_EQ(sc.f_score, 1.0);
}
