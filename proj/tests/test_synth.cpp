#include <sstream>

#include <gtest/gtest.h>

#include "oracles.hpp"

using namespace pme;

namespace {

std::string scene_bytes(const SceneFile& s) {
  std::ostringstream out;
  write_scene(out, s);
  return out.str();
}

SynthSpec small_spec(std::uint64_t seed) {
  SynthSpec spec;
  spec.seed = seed;
  spec.num_frames = 6;
  spec.dim = 16;
  return spec;
}

}  // namespace

TEST(Synth, SameSeedSameBytes) {
  const SynthSpec spec = small_spec(7);
  EXPECT_EQ(scene_bytes(generate(spec)), scene_bytes(generate(spec)));
  EXPECT_NE(scene_bytes(generate(spec)), scene_bytes(generate(small_spec(8))));
}

TEST(Synth, WriteReadReproducesValue) {
  const SceneFile s = generate(small_spec(3));
  std::istringstream in(scene_bytes(s));
  EXPECT_EQ(read_scene(in), s);
}

TEST(Synth, NoiselessFeaturesCollapseToBase) {
  SynthSpec spec = small_spec(1);
  spec.sigma_view = 0.0;
  spec.sigma_frame = 0.0;
  spec.p_flip = 0.0;
  const SceneFile s = generate(spec);
  std::map<int, FeatureVector> first;
  for (const auto& f : s.frames)
    for (const auto& d : f.detections) {
      auto [it, fresh] = first.emplace(*d.person_hint, d.feature);
      if (!fresh) {
        EXPECT_TRUE(same_feature(d.feature, it->second));
      }
      EXPECT_NEAR(d.feature.norm(), 1.0, 1e-8);
    }
  EXPECT_EQ(first.size(), 3u);
  // Distinct people keep distinct bases.
  EXPECT_FALSE(same_feature(first[0], first[1]));
}

TEST(Synth, LowerLegsHalfMetreAndRigidBones) {
  const SceneFile s = generate(small_spec(2));
  std::map<std::pair<int, int>, double> first_length;  // (person, limb)
  for (const auto& ts : s.truth_skeletons) {
    for (const auto& leg : kLowerLegs)
      EXPECT_NEAR((ts.skeleton.joints[index(leg.a)] - ts.skeleton.joints[index(leg.b)]).norm(), 0.5, 1e-8);
    for (int l = 0; l < static_cast<int>(kLimbs.size()); ++l) {
      const double len = (ts.skeleton.joints[index(kLimbs[l].a)] - ts.skeleton.joints[index(kLimbs[l].b)]).norm();
      auto [it, fresh] = first_length.emplace(std::make_pair(ts.skeleton.person_id, l), len);
      if (!fresh) {
        EXPECT_NEAR(len, it->second, 1e-8);
      }
    }
  }
}

TEST(Synth, JitterWindowTwoStaysWithinOnePixel) {
  SynthSpec spec = small_spec(4);
  const SceneFile clean = generate(spec);
  spec.noise_window = 2;
  const SceneFile noisy = generate(spec);
  ASSERT_EQ(clean.frames.size(), noisy.frames.size());
  double largest = 0.0;
  for (std::size_t f = 0; f < clean.frames.size(); ++f) {
    ASSERT_EQ(clean.frames[f].detections.size(), noisy.frames[f].detections.size());
    for (std::size_t i = 0; i < clean.frames[f].detections.size(); ++i) {
      const auto& a = clean.frames[f].detections[i];
      const auto& b = noisy.frames[f].detections[i];
      ASSERT_EQ(a.person_hint, b.person_hint);
      EXPECT_TRUE(same_feature(a.feature, b.feature));
      for (int j = 0; j < kNumJoints; ++j) {
        const double du = std::abs(a.joints[j].u - b.joints[j].u), dv = std::abs(a.joints[j].v - b.joints[j].v);
        EXPECT_LE(du, 1.0 + 1e-6);
        EXPECT_LE(dv, 1.0 + 1e-6);
        largest = std::max({largest, du, dv});
      }
    }
  }
  EXPECT_GT(largest, 0.9);  // the whole square is used
}

TEST(Synth, GroundTruthRetriangulates) {
  const SceneFile s = generate(small_spec(5));
  for (const auto& ts : s.truth_skeletons) {
    for (int j = 0; j < kNumJoints; ++j) {
      std::vector<ViewObservation> views;
      for (const auto& [id, pose] : s.truth_cameras)
        views.push_back({id, oracle::normalized_projection(pose, ts.skeleton.joints[j])});
      const auto x = triangulate_point(views, s.truth_cameras);
      ASSERT_TRUE(x.has_value());
      EXPECT_LT((*x - ts.skeleton.joints[j]).norm(), 1e-9);
    }
  }
}

TEST(Synth, DetectionsMatchProjections) {
  const SceneFile s = generate(small_spec(6));
  std::map<std::pair<int, int>, const Skeleton3D*> truth;
  for (const auto& ts : s.truth_skeletons) truth[{ts.frame_id, ts.skeleton.person_id}] = &ts.skeleton;
  for (const auto& f : s.frames)
    for (const auto& d : f.detections) {
      const Skeleton3D& sk = *truth.at({f.frame_id, *d.person_hint});
      for (int j = 0; j < kNumJoints; ++j) {
        const Eigen::Vector2d uv =
            project(sk.joints[j], s.truth_cameras.at(d.camera_id), s.header.intrinsics.at(d.camera_id));
        EXPECT_LT((uv - Eigen::Vector2d(d.joints[j].u, d.joints[j].v)).norm(), 1e-5);
      }
      EXPECT_TRUE(d.bbox.well_ordered());
    }
}

TEST(Synth, FeasibilityFlag) {
  SynthSpec spec = small_spec(9);
  EXPECT_TRUE(*generate(spec).header.feasible);
  spec.num_cameras = 2;
  spec.dropout = 0.5;
  spec.num_frames = 20;
  const SceneFile s = generate(spec);
  bool every_frame_ok = true;
  for (const auto& f : s.frames) {
    std::map<int, int> views;
    for (const auto& d : f.detections) ++views[*d.person_hint];
    for (int p = 0; p < spec.num_people; ++p) every_frame_ok = every_frame_ok && views[p] >= 2;
  }
  EXPECT_EQ(*s.header.feasible, every_frame_ok);
  EXPECT_FALSE(every_frame_ok);
}

TEST(Synth, ConfusionPairsShareAppearance) {
  SynthSpec spec = small_spec(10);
  spec.sigma_view = 0.0;
  spec.sigma_frame = 0.0;
  spec.confusion_pairs = {{0, 1}};
  spec.confusion_offset = 0.05;
  const SceneFile s = generate(spec);
  std::map<int, FeatureVector> f;
  for (const auto& d : s.frames[0].detections) f[*d.person_hint] = d.feature;
  EXPECT_LT((f[0] - f[1]).norm(), 0.5 * (f[0] - f[2]).norm());
}

TEST(Synth, InvalidSpecs) {
  SynthSpec spec;
  spec.num_cameras = 1;
  EXPECT_THROW(generate(spec), SpecError);
  spec = SynthSpec{};
  spec.p_flip = 1.5;
  EXPECT_THROW(generate(spec), SpecError);
  spec = SynthSpec{};
  spec.confusion_pairs = {{0, 7}};
  EXPECT_THROW(generate(spec), SpecError);
}

TEST(Sweep, CleanWindowScoresFullPcp) {
  SynthSpec spec = small_spec(0);
  const std::vector<int> windows = {0};
  const std::vector<std::uint64_t> seeds = {0, 1};
  PipelineConfig cfg;
  const auto rows = sweep_noise(spec, windows, seeds, cfg);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].runs, 2);
  EXPECT_EQ(rows[0].failed, 0);
  EXPECT_EQ(rows[0].pcp, 100.0);
  EXPECT_EQ(rows[0].scores.purity, 1.0);
}

TEST(Sweep, RejectsUnsortedWindows) {
  const std::vector<int> windows = {4, 2};
  const std::vector<std::uint64_t> seeds = {0};
  EXPECT_THROW(sweep_noise(small_spec(0), windows, seeds, PipelineConfig{}), SpecError);
}

TEST(Sweep, DoublingViewNoiseLowersPurity) {
  // Matching only; reconstruction does not affect purity.
  double low = 0.0, high = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    for (double sigma : {0.6, 1.2}) {
      SynthSpec spec = small_spec(seed);
      spec.num_people = 4;
      spec.sigma_view = sigma;
      const SceneFile scene = generate(spec);
      PipelineConfig cfg;
      cfg.seed = seed;
      resolve_k(cfg, scene.header.people);
      const ResultsFile m = run_matching(run_embedding(scene, run_tracking(scene, cfg), cfg), cfg);
      (sigma < 1.0 ? low : high) += evaluate(scene, m).mean_scores.purity;
    }
  }
  EXPECT_LT(high, low);
}

TEST(Sweep, TableFormat) {
  SweepRow r;
  r.window = 4;
  r.runs = 5;
  r.scores = {1.0, 0.5, 0.25, 0.125};
  r.pcp = 97.5;
  std::ostringstream out;
  const std::vector<SweepRow> rows = {r};
  write_sweep(out, rows);
  EXPECT_EQ(out.str(), "window\tpurity\tri\tari\tf_score\tpcp\truns\tfailed\n4\t1\t0.5\t0.25\t0.125\t97.5\t5\t0\n");
}
