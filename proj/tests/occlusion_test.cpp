// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrvox/occlusion.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <chrono>
#include <map>
#include <utility>

#include "mrvox/random.hpp"
#include "oracles.hpp"

namespace mrvox {
namespace {

using oracle::slab_oracle;
using oracle::WallFixture;

using L = OcclusionLabel;

TEST(CombineTest, FullTruthTable) {
  const L all[] = {L::kEmpty, L::kNonOccluded, L::kOccluded};
  for (L a : all) {
    for (L b : all) {
      L expected = L::kEmpty;
      if (a == L::kNonOccluded || b == L::kNonOccluded) {
        expected = L::kNonOccluded;
      } else if (a == L::kOccluded && b == L::kOccluded) {
        expected = L::kOccluded;
      }
      EXPECT_EQ(combine(a, b), expected);
      EXPECT_EQ(combine(a, b), combine(b, a));
    }
  }
  EXPECT_EQ(combine(L::kNonOccluded, L::kOccluded), L::kNonOccluded);
  EXPECT_EQ(combine(L::kOccluded, L::kOccluded), L::kOccluded);
  EXPECT_EQ(combine(L::kOccluded, L::kEmpty), L::kEmpty);
}

TEST(MergeTest, PriorityIsACommutativeMax) {
  const L all[] = {L::kEmpty, L::kNonOccluded, L::kOccluded};
  for (L a : all)
    for (L b : all) {
      EXPECT_EQ(merge(a, b), merge(b, a));
      for (L c : all) EXPECT_EQ(merge(merge(a, b), c), merge(a, merge(b, c)));
    }
  EXPECT_EQ(merge(L::kOccluded, L::kNonOccluded), L::kNonOccluded);
  EXPECT_EQ(merge(L::kEmpty, L::kOccluded), L::kOccluded);
}

GridGeometry cube(int n) {
  return GridGeometry{Eigen::Vector3d::Zero(), 1.0, {n, n, n}, 1};
}

TEST(TraverseTest, AxisAlignedRay) {
  const auto cells = traverse(Eigen::Vector3d(0.5, 0.5, 0.5), Eigen::Vector3d(5.5, 0.5, 0.5), cube(8));
  ASSERT_EQ(cells.size(), 6u);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(cells[static_cast<std::size_t>(i)], (VoxelIndex{i, 0, 0, 1}));
}

TEST(TraverseTest, OriginOutsideStartsAtEntryFace) {
  const auto cells = traverse(Eigen::Vector3d(-3.0, 2.5, 2.5), Eigen::Vector3d(1.5, 2.5, 2.5), cube(8));
  ASSERT_EQ(cells.size(), 2u);
  EXPECT_EQ(cells[0], (VoxelIndex{0, 2, 2, 1}));
  EXPECT_EQ(cells[1], (VoxelIndex{1, 2, 2, 1}));
  EXPECT_TRUE(traverse(Eigen::Vector3d(-3, -3, -3), Eigen::Vector3d(-1, -1, -1), cube(8)).empty());
}

TEST(TraverseTest, NegativeDirectionAndMargin) {
  const auto cells = traverse(Eigen::Vector3d(7.5, 0.5, 0.5), Eigen::Vector3d(5.5, 0.5, 0.5), cube(8), 2.0);
  std::vector<VoxelIndex> expected;
  for (int x = 7; x >= 3; --x) expected.push_back({x, 0, 0, 1});
  EXPECT_EQ(cells, expected);
}

TEST(TraverseTest, MatchesSlabOracleOnRandomRays) {
  Rng rng(314);
  const GridGeometry g = cube(32);
  const auto start = std::chrono::steady_clock::now();
  int agree = 0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector3d a(rng.uniform(-8, 40), rng.uniform(-8, 40), rng.uniform(-8, 40));
    const Eigen::Vector3d b(rng.uniform(-8, 40), rng.uniform(-8, 40), rng.uniform(-8, 40));
    const auto got = traverse(a, b, g);
    const auto want = slab_oracle(a, b, 32);
    ASSERT_EQ(got, want) << "ray " << i;
    ++agree;
  }
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_EQ(agree, 10000);
  EXPECT_LT(secs, 10.0);
}

TEST(TraverseTest, EachCellOnceAndFaceConnected) {
  Rng rng(2);
  const GridGeometry g{Eigen::Vector3d(-3.2, 1.0, -0.4), 0.2, {40, 30, 20}, 1};
  for (int i = 0; i < 2000; ++i) {
    const Eigen::Vector3d a = g.origin + Eigen::Vector3d(rng.uniform(-2, 10), rng.uniform(-2, 8), rng.uniform(-2, 6));
    const Eigen::Vector3d b = g.origin + Eigen::Vector3d(rng.uniform(-2, 10), rng.uniform(-2, 8), rng.uniform(-2, 6));
    const auto cells = traverse(a, b, g, rng.uniform(0, 3));
    std::vector<VoxelIndex> sorted = cells;
    std::sort(sorted.begin(), sorted.end());
    ASSERT_EQ(std::adjacent_find(sorted.begin(), sorted.end()), sorted.end());
    for (std::size_t k = 1; k < cells.size(); ++k) {
      const int dist = std::abs(cells[k].x - cells[k - 1].x) +
                       std::abs(cells[k].y - cells[k - 1].y) +
                       std::abs(cells[k].z - cells[k - 1].z);
      ASSERT_EQ(dist, 1);
    }
  }
}

TEST(LabelTest, WallFixtureLidar) {
  WallFixture fx;
  const OcclusionGrid l = label_lidar(fx.pc, fx.gt, fx.geom);
  EXPECT_EQ(l.at(5, 0, 0), L::kNonOccluded);
  EXPECT_EQ(l.at(7, 0, 0), L::kOccluded);
  EXPECT_EQ(l.at(9, 0, 0), L::kNonOccluded);  // Occluded from one ray, observed by another
  EXPECT_EQ(l.at(5, 1, 0), L::kEmpty);
  EXPECT_EQ(l.at(8, 1, 0), L::kEmpty);
  const auto h = histogram(l);
  EXPECT_EQ(h.non_occluded, 2u);
  EXPECT_EQ(h.occluded, 1u);
}

TEST(LabelTest, WallFixtureCamera) {
  WallFixture fx;
  const OcclusionGrid c = label_camera(fx.rig, fx.gt, fx.geom, 1);
  EXPECT_EQ(c.at(5, 0, 0), L::kNonOccluded);
  EXPECT_EQ(c.at(7, 0, 0), L::kOccluded);
  EXPECT_EQ(c.at(9, 0, 0), L::kOccluded);
  EXPECT_EQ(c.at(5, 1, 0), L::kNonOccluded);
  EXPECT_EQ(c.at(8, 1, 0), L::kOccluded);
  EXPECT_EQ(c.at(0, 0, 0), L::kEmpty);
}

TEST(LabelTest, WallFixtureCombined) {
  WallFixture fx;
  const OcclusionVolume vol = generate_occlusion_labels(fx.pc, fx.rig, fx.gt, fx.geom, 1);
  const OcclusionGrid expected = fx.expected();
  EXPECT_EQ(vol.occlusion, expected);
}

TEST(LabelTest, SinglePointNothingBehind) {
  const GridGeometry g = cube(6);
  SemanticVolume gt(g.dims(), 0);
  gt.at(3, 3, 3) = 4;
  PointCloud pc;
  pc.sensor_origin = Eigen::Vector3d(0.5, 0.5, 0.5);
  pc.points.push_back({Eigen::Vector3d(3.5, 3.5, 3.5), 0.1});
  const auto l = label_lidar(pc, gt, g);
  const auto h = histogram(l);
  EXPECT_EQ(l.at(3, 3, 3), L::kNonOccluded);
  EXPECT_EQ(h.non_occluded, 1u);
  EXPECT_EQ(h.occluded, 0u);
}

TEST(LabelTest, CameraRayWithoutLabelsLeavesEmpty) {
  const GridGeometry g = cube(6);
  const SemanticVolume gt(g.dims(), 0);
  const CameraRig rig{ring_camera(Eigen::Vector3d(-1, 3, 3), 0.0, 1.0, 8, 8)};
  EXPECT_EQ(histogram(label_camera(rig, gt, g, 1)).empty, 216u);
  EXPECT_THROW(label_camera({}, gt, g), Error);
  EXPECT_THROW(label_camera(rig, SemanticVolume({5, 6, 6}, 0), g), Error);
}

struct RandomScene {
  GridGeometry geom{Eigen::Vector3d::Zero(), 0.5, {24, 24, 8}, 1};
  SemanticVolume gt{{24, 24, 8}, 0};
  PointCloud pc;
  explicit RandomScene(std::uint64_t seed) {
    Rng rng(seed);
    for (int i = 0; i < 12; ++i) {
      const int x0 = static_cast<int>(rng.uniform_int(2, 20));
      const int y0 = static_cast<int>(rng.uniform_int(2, 20));
      const auto cls = static_cast<std::uint16_t>(rng.uniform_int(1, 17));
      for (int x = x0; x < x0 + 3; ++x)
        for (int y = y0; y < y0 + 2; ++y)
          for (int z = 0; z < 4; ++z) gt.at(x, y, z) = cls;
    }
    pc.sensor_origin = Eigen::Vector3d(6.0, 6.0, 2.0);
    for (int i = 0; i < 600; ++i) {
      pc.points.push_back({Eigen::Vector3d(rng.uniform(0, 12), rng.uniform(0, 12), rng.uniform(0, 4)), 0.3});
    }
  }
};

TEST(LabelTest, RayOrderIndependence) {
  RandomScene s(5);
  const auto a = label_lidar(s.pc, s.gt, s.geom);
  Rng rng(1);
  std::shuffle(s.pc.points.begin(), s.pc.points.end(), rng.engine());
  EXPECT_EQ(label_lidar(s.pc, s.gt, s.geom), a);
}

TEST(LabelTest, PointVoxelsAreNonOccludedAndOccludedLiesBehind) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RandomScene s(seed);
    const auto l = label_lidar(s.pc, s.gt, s.geom);
    for (const auto& p : s.pc.points) {
      const auto v = world_to_voxel(p.position, s.geom);
      if (v && is_labeled(s.gt.at(*v))) {
        ASSERT_EQ(l.at(*v), L::kNonOccluded);
      }
    }
    // Provenance: re-trace the rays and record which voxels appear strictly
    // behind a ray's hit voxel.
    OcclusionGrid behind(s.geom.dims(), L::kEmpty);
    for (const auto& p : s.pc.points) {
      const auto v = world_to_voxel(p.position, s.geom);
      if (!v) continue;
      const auto ray = traverse(s.pc.sensor_origin, p.position, s.geom, grid_diagonal(s.geom));
      const auto it = std::find(ray.begin(), ray.end(), *v);
      for (auto jt = it == ray.end() ? it : it + 1; jt != ray.end(); ++jt) {
        behind.at(*jt) = L::kOccluded;
      }
    }
    for (std::size_t i = 0; i < l.size(); ++i) {
      if (l.data()[i] == L::kOccluded) {
        ASSERT_EQ(behind.data()[i], L::kOccluded);
      }
      if (!is_labeled(s.gt.data()[i])) {
        ASSERT_EQ(l.data()[i], L::kEmpty);
      }
    }
  }
}

TEST(OutputLayoutTest, TwentyOneChannels) {
  EXPECT_EQ(kSemanticChannels, 18u);
  EXPECT_EQ(kOcclusionChannels, 3u);
  EXPECT_EQ(kOutputChannels, 21u);
  const VoxelTensor sem({2, 2, 2}, 4, 18, 0.5);
  VoxelTensor occ({2, 2, 2}, 4, 3, 0.0);
  for (std::size_t v = 0; v < occ.num_voxels(); ++v) occ.at(v)[0] = 1.0;
  const VoxelTensor out = assemble_output(sem, occ);
  EXPECT_EQ(out.channels, 21u);
  EXPECT_EQ(out.at(3)[17], 0.5);
  EXPECT_EQ(out.at(3)[18], 1.0);
  EXPECT_TRUE(decoder_input(out).empty());

  try {
    assemble_output(VoxelTensor({2, 2, 2}, 4, 17), occ);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::kShapeError);
  }
}

TEST(OutputLayoutTest, OneNonOccludedVoxelGivesSixtyFourChildren) {
  const VoxelTensor sem({4, 4, 4}, 4, 18);
  VoxelTensor occ({4, 4, 4}, 4, 3);
  for (std::size_t v = 0; v < occ.num_voxels(); ++v) occ.at(v)[0] = 1.0;
  occ.at(occ.voxel(1, 2, 3))[1] = 2.0;
  const auto in = decoder_input(assemble_output(sem, occ));
  ASSERT_EQ(in.size(), 1u);
  EXPECT_EQ(in[0], (VoxelIndex{1, 2, 3, 4}));
  EXPECT_EQ(subdivide(in[0], 4).size(), 64u);
}

TEST(OutputLayoutTest, DownsampleLabelsByPriority) {
  OcclusionGrid l({4, 4, 4}, L::kEmpty);
  l.at(0, 0, 0) = L::kOccluded;
  l.at(3, 3, 3) = L::kOccluded;
  l.at(2, 2, 2) = L::kNonOccluded;
  const auto d = downsample_labels(l, 2);
  EXPECT_EQ(d.at(0, 0, 0), L::kOccluded);
  EXPECT_EQ(d.at(1, 1, 1), L::kNonOccluded);
  EXPECT_EQ(d.at(1, 0, 0), L::kEmpty);
}

}  // namespace
}  // namespace mrvox
