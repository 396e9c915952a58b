// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#include "mrvox/synthetic.hpp"

#include <gtest/gtest.h>

#include <algorithm>

#include "mrvox/metrics.hpp"
#include "test_util.hpp"

namespace mrvox {
namespace {

using testing::code_of;

const GridGeometry kGeom{Eigen::Vector3d(-12.8, -12.8, -1.6), 0.2, {128, 128, 16}, 1};

TEST(RasterizeTest, LaterBoxesWinAndBoxesClip) {
  const GridGeometry g{Eigen::Vector3d::Zero(), 1.0, {4, 4, 4}, 1};
  const auto gt = rasterize(g, {{{0, 0, 0}, {4, 4, 1}, 1}, {{2, 2, 0}, {9, 9, 2}, 3}});
  EXPECT_EQ(gt.at(0, 0, 0), 1);
  EXPECT_EQ(gt.at(2, 2, 0), 3);
  EXPECT_EQ(gt.at(3, 3, 1), 3);
  EXPECT_EQ(gt.at(1, 1, 1), kEmptyClass);
  EXPECT_EQ(std::count(gt.data().begin(), gt.data().end(), 3), 8);
}

TEST(SyntheticTest, EveryReturnLiesInTheFirstLabeledCellOfItsBeam) {
  const SyntheticScene scene = build_scene(street_spec(kGeom, 3));
  ASSERT_GT(scene.cloud.points.size(), 1000u);
  const Eigen::Vector3d o = scene.cloud.sensor_origin;
  for (const auto& p : scene.cloud.points) {
    const auto v = world_to_voxel(p.position, kGeom);
    ASSERT_TRUE(v);
    const std::uint16_t cls = scene.gt.at(*v);
    ASSERT_TRUE(is_labeled(cls));
    ASSERT_EQ(p.intensity, class_intensity(cls));
    // Dense march from the sensor: nothing labeled before the hit cell.
    const Eigen::Vector3d d = p.position - o;
    const int steps = static_cast<int>(d.norm() / 0.01);
    for (int i = 0; i < steps; ++i) {
      const auto q = world_to_voxel(o + d * (static_cast<double>(i) / steps), kGeom);
      if (!q || *q == *v) continue;
      ASSERT_FALSE(is_labeled(scene.gt.at(*q)));
    }
  }
}

TEST(SyntheticTest, ImagesShowClassColorsOrSky) {
  const SyntheticScene scene = build_scene(street_spec(kGeom, 4, 5));
  ASSERT_EQ(scene.images.images.size(), 6u);
  std::vector<std::vector<double>> palette;
  for (std::uint16_t c : {kGroundClass, kWallClass, kCarClass, kPedestrianClass}) {
    palette.push_back(class_color(c, 5));
  }
  std::size_t sky = 0, seen = 0;
  for (const auto& im : scene.images.images) {
    ASSERT_EQ(im.channels, 5u);
    for (int v = 0; v < im.height; ++v)
      for (int u = 0; u < im.width; ++u) {
        const auto px = im.pixel(u, v);
        const std::vector<double> value(px.begin(), px.end());
        if (std::all_of(value.begin(), value.end(), [](double x) { return x == 0.0; })) {
          ++sky;
          continue;
        }
        ASSERT_NE(std::find(palette.begin(), palette.end(), value), palette.end());
        ++seen;
      }
  }
  EXPECT_GT(sky, 0u);
  EXPECT_GT(seen, sky);
}

TEST(SyntheticTest, SameSeedSameSceneAndSeedsDiffer) {
  const SyntheticScene a = build_scene(street_spec(kGeom, 9));
  const SyntheticScene b = build_scene(street_spec(kGeom, 9));
  EXPECT_EQ(a.gt, b.gt);
  ASSERT_EQ(a.cloud.points.size(), b.cloud.points.size());
  for (std::size_t i = 0; i < a.cloud.points.size(); ++i) {
    ASSERT_EQ(a.cloud.points[i].position, b.cloud.points[i].position);
  }
  EXPECT_EQ(a.images.images[0].data, b.images.images[0].data);
  EXPECT_NE(build_scene(street_spec(kGeom, 10)).gt, a.gt);
}

TEST(SyntheticTest, StreetObjectsStayApartAndInside) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const SceneSpec spec = street_spec(kGeom, seed);
    std::vector<SceneBox> things;
    for (const auto& b : spec.boxes) {
      if (is_thing(b.cls)) things.push_back(b);
    }
    ASSERT_GE(things.size(), 3u) << seed;
    for (std::size_t i = 0; i < things.size(); ++i) {
      for (int k = 0; k < 3; ++k) {
        ASSERT_GE(things[i].lo[k], 0);
        ASSERT_LE(things[i].hi[k], kGeom.dims_scale1[k]);
      }
      ASSERT_EQ(things[i].lo[2], 1);  // standing on the ground slab
      for (std::size_t j = i + 1; j < things.size(); ++j) {
        const bool apart = things[i].hi[0] <= things[j].lo[0] ||
                           things[j].hi[0] <= things[i].lo[0] ||
                           things[i].hi[1] <= things[j].lo[1] ||
                           things[j].hi[1] <= things[i].lo[1];
        ASSERT_TRUE(apart) << seed;
      }
    }
  }
}

TEST(SyntheticTest, WallAndEmptyScenes) {
  const SyntheticScene wall = build_scene(wall_spec(kGeom));
  const int x = 96;
  EXPECT_EQ(wall.gt.at(x, 0, 0), kWallClass);
  EXPECT_EQ(wall.gt.at(x + 1, 127, 15), kWallClass);
  EXPECT_EQ(wall.gt.at(x - 1, 64, 5), kEmptyClass);
  EXPECT_EQ(std::count(wall.gt.data().begin(), wall.gt.data().end(), kWallClass),
            2 * 128 * 16);
  for (const auto& p : wall.cloud.points) {
    EXPECT_EQ(world_to_voxel(p.position, kGeom)->x, x);
  }

  const SyntheticScene empty = build_scene(empty_spec(kGeom));
  EXPECT_TRUE(empty.cloud.points.empty());
  for (const auto& im : empty.images.images) {
    EXPECT_TRUE(std::all_of(im.data.begin(), im.data.end(), [](double v) { return v == 0.0; }));
  }
}

TEST(SyntheticTest, NamedScenes) {
  EXPECT_EQ(named_scene_spec("wall", kGeom, 0).boxes.size(), 1u);
  EXPECT_TRUE(named_scene_spec("empty", kGeom, 0).boxes.empty());
  EXPECT_EQ(code_of([] { named_scene_spec("forest", kGeom, 0); }), Errc::kConfigError);
}

TEST(SyntheticTest, SelfEvaluationIsPerfect) {
  const SyntheticScene scene = build_scene(street_spec(kGeom, 1));
  const auto m = compute_metrics(scene.gt.data(), scene.gt.data(), {}, 20);
  EXPECT_EQ(m.iou, 1.0);
  EXPECT_EQ(m.miou, 1.0);
}

}  // namespace
}  // namespace mrvox
