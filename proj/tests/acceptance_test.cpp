// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mrvox/bench.hpp"
#include "mrvox/camera.hpp"
#include "mrvox/cli.hpp"
#include "mrvox/densifier.hpp"
#include "mrvox/fusion.hpp"
#include "mrvox/hvfr.hpp"
#include "mrvox/lidar.hpp"
#include "mrvox/losses.hpp"
#include "mrvox/metrics.hpp"
#include "mrvox/occlusion.hpp"
#include "mrvox/pipeline.hpp"
#include "mrvox/random.hpp"
#include "mrvox/synthetic.hpp"
#include "mrvox/voxel_core.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace mrvox {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

struct CliRun {
  int code = -1;
  std::string out;
  std::string err;
};

CliRun run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "mrvox");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliRun r;
  r.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

void write_text(const fs::path& p, const std::string& text) {
  io::write_bytes(p, {text.begin(), text.end()});
}

// ---------------------------------------------------------------------------

Outcome densifier_oracle() {
  const GridGeometry base{Eigen::Vector3d(-10.0, -10.0, -2.0), 0.25, {128, 128, 32}, 1};
  Rng rng(2024);
  const auto t0 = Clock::now();
  int instances = 0, bad = 0;
  std::size_t max_rows = 0;
  double worst = 0.0;
  while (instances < 200) {
    const auto inst = oracle::random_densify_instance(rng, base);
    if (inst.rows.empty()) continue;
    ++instances;
    max_rows = std::max(max_rows, inst.rows.size());
    const SparseVoxelGrid out = densify(inst.ms);
    const auto want = oracle::brute_force_densify(inst.rows);
    if (out.size() != want.size()) {
      ++bad;
      continue;
    }
    std::size_t r = 0;
    for (const auto& [v, slot] : want) {
      if (out.coord(r) != v) ++bad;
      for (std::size_t c = 0; c < slot.first.size(); ++c) {
        worst = std::max(worst, std::abs(out.row(r)[c] - slot.first[c]));
      }
      ++r;
    }
  }
  const double secs = seconds_since(t0);
  const bool ok = bad == 0 && worst <= 1e-6 && max_rows <= 10000 && secs < 5.0;
  return {ok, fmt("%d instances, max %zu voxels, max |err| %.2e, %.2f s", instances, max_rows,
                  worst, secs)};
}

Outcome subdivision_exactness() {
  Rng rng(7);
  int failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    // Scale 4 parents allow both 2x and 4x subdivision.
    const VoxelIndex p{static_cast<int>(rng.uniform_int(0, 200)),
                       static_cast<int>(rng.uniform_int(0, 200)),
                       static_cast<int>(rng.uniform_int(0, 40)), 4};
    for (int factor : {2, 4}) {
      const auto kids = subdivide(p, factor);
      const std::size_t n = static_cast<std::size_t>(factor * factor * factor);
      std::set<VoxelIndex> unique(kids.begin(), kids.end());
      bool ok = kids.size() == n && unique.size() == n;
      // Tiling: exactly the scale-(4/factor) cells inside the parent box.
      const int s = 4 / factor;
      for (int x = p.x * factor; x < (p.x + 1) * factor; ++x)
        for (int y = p.y * factor; y < (p.y + 1) * factor; ++y)
          for (int z = p.z * factor; z < (p.z + 1) * factor; ++z) {
            ok = ok && unique.count({x, y, z, s}) == 1;
          }
      for (const auto& k : kids) ok = ok && align_scale(k, 4) == p;
      failures += ok ? 0 : 1;
    }
  }
  return {failures == 0, fmt("1000 parents, 8-way and 64-way, %d failures", failures)};
}

Outcome sparse_conv_oracle() {
  Rng rng(99);
  double worst = 0.0;
  int support_errors = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = static_cast<int>(rng.uniform_int(2, 16));
    const auto cin = static_cast<std::size_t>(rng.uniform_int(1, 4));
    const auto cout = static_cast<std::size_t>(rng.uniform_int(1, 4));
    oracle::DenseField dense(n, cin);
    const SparseVoxelGrid g =
        oracle::random_sparse_grid(rng, n, cin, rng.uniform(0.02, 0.3), dense);
    const int variant = trial % 3;
    SparseConvSpec spec =
        variant == 2 ? SparseConvSpec::seeded(2, 2, cin, cout, 1000 + trial)
                     : SparseConvSpec::seeded(3, 1, cin, cout, 1000 + trial,
                                              variant == 0 ? ConvMode::kSubmanifold
                                                           : ConvMode::kExpanding);
    for (double& b : spec.bias) b = rng.uniform(-0.5, 0.5);
    const SparseVoxelGrid out = sparse_conv(g, spec);
    const auto support = oracle::expected_conv_support(g, spec, n);
    if (out.size() != support.size()) ++support_errors;
    for (const auto& v : support) {
      const auto r = out.lookup(v);
      if (!r) {
        ++support_errors;
        continue;
      }
      const auto want = oracle::dense_conv_at(dense, spec, v.x, v.y, v.z);
      for (std::size_t o = 0; o < cout; ++o) {
        worst = std::max(worst, std::abs(out.row(*r)[o] - want[o]));
      }
    }
  }
  return {support_errors == 0 && worst <= 1e-6,
          fmt("100 grids, %d support mismatches, max |err| %.2e", support_errors, worst)};
}

Outcome fusion_invariance() {
  const GridGeometry geom{Eigen::Vector3d(-12.8, -12.8, -1.6), 0.2, {128, 128, 32}, 1};
  Rng rng(5);
  const CameraRig rig = oracle::six_ring_small();

  // Constant field with identity projections.
  const std::vector<double> c{0.3, -1.7, 2.0 / 3.0};
  const FeatureMap2D flat = oracle::constant_maps(rig.size(), 96, 64, c);
  const auto seeded = DeformableAttnParams::seeded(3, 3, 4, 11);
  const auto identity = DeformableAttnParams::identity(3, seeded.offsets, seeded.weight_logits);
  const SparseVoxelGrid dense = oracle::random_scale4(rng, geom, 3, 2000, 0.0);
  const QuerySet zero_q = guide_queries(dense, SparseVoxelGrid(dense.geometry(), 3));
  const FusionResult res = fuse(zero_q, rig, flat, identity);
  std::size_t hits = 0, wrong = 0;
  for (std::size_t r = 0; r < res.fused.size(); ++r) {
    const VoxelIndex v = res.fused.coord(r);
    if (visible_cameras(rig, voxel_center(v, res.fused.geometry())).empty()) continue;
    ++hits;
    for (std::size_t k = 0; k < 3; ++k) wrong += res.fused.row(r)[k] == c[k] ? 0 : 1;
  }

  // A voxel seen by no camera returns its guided query.
  const CameraRig one{CameraModel::pinhole(50, 50, 10, 10, 20, 20)};
  SparseVoxelGrid behind(geom.at_scale(4), 2);
  behind.insert({16, 16, 0, 4}, std::vector<double>{0.5, -0.25});
  const QuerySet bq = guide_queries(behind, 9);
  const FusionResult miss =
      fuse(bq, one, oracle::constant_maps(1, 20, 20, {5.0, 5.0}),
           DeformableAttnParams::seeded(2, 2, 4, 3));
  const bool miss_ok = miss.misses == 1 && miss.fused.row(0)[0] == bq.guided.row(0)[0] &&
                       miss.fused.row(0)[1] == bq.guided.row(0)[1];

  // Bit determinism for a fixed seed.
  const SparseVoxelGrid d2 = oracle::random_scale4(rng, geom, 4, 1500, 1.0);
  const FeatureMap2D maps = oracle::random_maps(rng, rig.size(), 96, 64, 4);
  const auto params = DeformableAttnParams::seeded(4, 4, 4, 21);
  const FusionResult a = fuse(guide_queries(d2, 3), rig, maps, params);
  const FusionResult b = fuse(guide_queries(d2, 3), rig, maps, params);
  const bool deterministic = a.fused == b.fused && a.fused.raw_features() == b.fused.raw_features();

  const bool ok = hits > 0 && wrong == 0 && miss_ok && deterministic;
  return {ok, fmt("%zu hit voxels, %zu inexact channels, miss rule %s, determinism %s", hits,
                  wrong, miss_ok ? "ok" : "broken", deterministic ? "ok" : "broken")};
}

Outcome projection_roundtrip() {
  Rng rng(1234);
  double worst = 0.0;
  int hits = 0;
  for (int i = 0; i < 1000; ++i) {
    const int w = static_cast<int>(rng.uniform_int(64, 1600));
    const int h = static_cast<int>(rng.uniform_int(64, 900));
    const auto cam = CameraModel::pinhole(rng.uniform(100, 2000), rng.uniform(100, 2000),
                                          rng.uniform(0, w), rng.uniform(0, h), w, h,
                                          oracle::random_pose(rng));
    const Eigen::Vector3d p = back_project(cam, rng.uniform(0, w - 1e-6),
                                           rng.uniform(0, h - 1e-6), rng.uniform(0.2, 80.0));
    const auto r = roundtrip_check(cam, p);
    if (!r) continue;
    ++hits;
    worst = std::max(worst, *r);
  }
  return {hits >= 990 && worst < 1e-4,
          fmt("%d of 1000 rigs projected, max residual %.2e px", hits, worst)};
}

Outcome dda_traversal() {
  Rng rng(314);
  const GridGeometry g{Eigen::Vector3d::Zero(), 1.0, {32, 32, 32}, 1};
  const auto t0 = Clock::now();
  int agree = 0;
  for (int i = 0; i < 10000; ++i) {
    const Eigen::Vector3d a(rng.uniform(-8, 40), rng.uniform(-8, 40), rng.uniform(-8, 40));
    const Eigen::Vector3d b(rng.uniform(-8, 40), rng.uniform(-8, 40), rng.uniform(-8, 40));
    agree += traverse(a, b, g) == oracle::slab_oracle(a, b, 32) ? 1 : 0;
  }
  const double secs = seconds_since(t0);
  return {agree == 10000 && secs < 10.0, fmt("%d/10000 rays agree, %.2f s", agree, secs)};
}

Outcome occlusion_rules() {
  using L = OcclusionLabel;
  int table_errors = 0;
  for (L a : {L::kEmpty, L::kNonOccluded, L::kOccluded})
    for (L b : {L::kEmpty, L::kNonOccluded, L::kOccluded}) {
      table_errors += combine(a, b) == oracle::combine_table(a, b) ? 0 : 1;
    }
  const oracle::WallFixture fx;
  const OcclusionGrid got =
      generate_occlusion_labels(fx.pc, fx.rig, fx.gt, fx.geom, 1).occlusion;
  const bool wall_ok = got == fx.expected();
  return {table_errors == 0 && wall_ok,
          fmt("%d of 9 pairs wrong, wall fixture %s", table_errors, wall_ok ? "exact" : "differs")};
}

Outcome losses() {
  const auto t0 = Clock::now();
  long cases = 0;
  double worst = 0.0;
  double worst_perm = 0.0;
  for (std::size_t k = 1; k <= 3; ++k) {
    for (std::size_t n = 1; n <= 6; ++n) {
      oracle::for_each_lattice_multiset(n, k, [&](const ProbTable& p, const std::vector<int>& l) {
        worst = std::max(worst, std::abs(lovasz_softmax(p, l).value - oracle::lovasz_oracle(p, l)));
        // The multiset enumeration relies on voxel-order invariance; check
        // it on a sample with the rows reversed.
        if (n > 1 && cases % 101 == 0) {
          ProbTable rp(n, k);
          std::vector<int> rl(l.rbegin(), l.rend());
          for (std::size_t i = 0; i < n; ++i)
            for (std::size_t c = 0; c < k; ++c) rp.at(i, c) = p.at(n - 1 - i, c);
          worst_perm = std::max(worst_perm,
                                std::abs(lovasz_softmax(rp, rl).value - lovasz_softmax(p, l).value));
        }
        ++cases;
        return true;
      });
    }
  }
  const double lovasz_secs = seconds_since(t0);

  const std::vector<int> many(10, 7);
  const double ce_err =
      std::abs(cross_entropy(ProbTable(10, 18, 1.0 / 18.0), many).value - std::log(18.0));

  LossInputs in;
  in.semantic_labels = {0, 4, 4, 17, 0, 9};
  in.semantic_probs = ProbTable::one_hot(in.semantic_labels, 18);
  in.importance_targets = {1, 0, 1};
  in.importance_scores = {1, 0, 1};
  in.occlusion_labels = {0, 1, 1, 2, 0, 2};
  in.occlusion_probs = ProbTable::one_hot(in.occlusion_labels, 3);
  const LossReport r = compute_losses(in);
  bool perfect_zero = r.total == 0.0;
  for (const LossTerm* t : {&r.ce, &r.lovasz, &r.geo_scal, &r.sem_scal, &r.rie_bce, &r.occlusion_ce}) {
    perfect_zero = perfect_zero && t->value == 0.0;
  }

  const bool ok = worst <= 1e-9 && worst_perm <= 1e-9 && ce_err <= 1e-9 && perfect_zero;
  return {ok, fmt("Lovasz %ld multisets max |err| %.1e (order %.1e, %.1f s); "
                  "CE-ln18 %.1e; perfect fixtures %s",
                  cases, worst, worst_perm, lovasz_secs, ce_err, perfect_zero ? "zero" : "nonzero")};
}

Outcome metrics() {
  const oracle::FourCubedFixture fx;
  const auto m = compute_metrics(fx.pred, fx.gt, {}, 3);
  const bool hand = std::abs(m.iou - 1.0 / 3.0) < 1e-12 && m.per_class_iou.size() == 3 &&
                    !m.per_class_iou[0] && m.per_class_iou[1] && *m.per_class_iou[1] == 1.0 &&
                    m.per_class_iou[2] && *m.per_class_iou[2] == 0.0 && m.miou == 0.5;
  Rng rng(1);
  std::vector<std::uint16_t> a(4096);
  for (auto& v : a) {
    v = static_cast<std::uint16_t>(rng.uniform() < 0.6 ? 0 : rng.uniform_int(1, 19));
  }
  const auto same = compute_metrics(a, a, {}, 20);
  return {hand && same.miou == 1.0,
          fmt("4^3 fixture IoU %.6f mIoU %.3f; identical volumes mIoU %.3f", m.iou, m.miou,
              same.miou)};
}

PipelineConfig small_config() {
  PipelineConfig cfg;
  cfg.geometry.dims_scale1 = {64, 64, 16};
  cfg.channels = 8;
  cfg.image_channels = 4;
  return cfg;
}

Outcome hvfr_structure() {
  // Nesting on random importance maps.
  Rng rng(10);
  int nest_failures = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    ImportanceMap m;
    const auto n = static_cast<std::size_t>(rng.uniform_int(0, 300));
    for (std::size_t i = 0; i < n; ++i) {
      m.coords.push_back({static_cast<int>(i % 32), static_cast<int>(i / 32), 0, 4});
      m.scores.push_back(rng.uniform() < 0.1 ? (rng.uniform() < 0.5 ? 0.4 : 0.7) : rng.uniform());
    }
    const double t1 = trial % 2 == 0 ? kDefaultTau1 : rng.uniform();
    const double t2 = trial % 2 == 0 ? kDefaultTau2 : t1 + rng.uniform() * (1.0 - t1);
    const auto sets = select_sets(m, t1, t2);
    const std::set<VoxelIndex> s(sets.semi_fine.begin(), sets.semi_fine.end());
    for (const auto& v : sets.fine) nest_failures += s.count(v) ? 0 : 1;
  }

  // Empty sets leave the fused features untouched.
  const GridGeometry base{Eigen::Vector3d::Zero(), 0.5, {16, 16, 16}, 1};
  SparseVoxelGrid fm(base.at_scale(4), 3);
  for (int x = 0; x < 4; ++x)
    for (int y = 0; y < 4; ++y)
      for (int z = 0; z < 4; ++z) {
        if (rng.uniform() < 0.5) {
          fm.insert({x, y, z, 4}, std::vector<double>{rng.uniform(-1, 1), rng.uniform(-1, 1),
                                                     rng.uniform(-1, 1)});
        }
      }
  const auto out = fuse_refined(SparseVoxelGrid(base, 3), SparseVoxelGrid(base.at_scale(2), 3),
                                fm, SparseConvSpec::seeded(2, 2, 3, 3, 1),
                                SparseConvSpec::seeded(2, 2, 3, 3, 2));
  SparseVoxelGrid sorted = fm;
  sorted.sort_lexicographic();
  const bool unit_identity =
      out.coords() == sorted.coords() && out.raw_features() == sorted.raw_features();

  PipelineConfig cfg = small_config();
  cfg.tau1 = cfg.tau2 = 1.01;
  const auto scene = build_scene(
      named_scene_spec("street", cfg.geometry, cfg.seed_for("scene"), cfg.image_channels));
  const ForwardResult r = run_forward(cfg, {scene.cloud, scene.rig(), scene.images, &scene.gt});
  const bool pipeline_identity = r.sets.semi_fine.empty() && r.sets.fine.empty() &&
                                 r.residual_identity &&
                                 r.refined4.raw_features() == r.fused4.raw_features();
  const bool layout = r.o4.channels == 21 && kSemanticChannels == 18 && kOcclusionChannels == 3 &&
                      r.o1.channels() == 21;

  const bool ok = nest_failures == 0 && unit_identity && pipeline_identity && layout;
  return {ok, fmt("1000 maps, %d F-not-in-S; empty-set residual %s/%s; O^4 channels %zu", nest_failures,
                  unit_identity ? "exact" : "differs", pipeline_identity ? "exact" : "differs",
                  r.o4.channels)};
}

// A scale-4 voxel is foreground when most of its labeled children are things.
bool is_foreground(const SemanticVolume& gt, const VoxelIndex& v4) {
  int things = 0, occupied = 0;
  for (const auto& c : subdivide(v4, 4)) {
    if (!gt.in_bounds(c.x, c.y, c.z)) continue;
    const auto k = gt.at(c);
    if (!is_labeled(k)) continue;
    ++occupied;
    things += is_thing(k) ? 1 : 0;
  }
  return occupied > 0 && 2 * things > occupied;
}

Outcome foreground_focus() {
  PipelineConfig cfg;
  cfg.scorer = "oracle";
  const PipelineWeights weights = PipelineWeights::seeded(cfg);
  int passed = 0;
  double lo[3] = {1, 1, 1}, hi[3] = {0, 0, 0};
  for (int s = 0; s < 50; ++s) {
    const auto scene = build_scene(street_spec(cfg.geometry, 1000 + s, cfg.image_channels));
    const ForwardResult r =
        run_forward(cfg, weights, {scene.cloud, scene.rig(), scene.images, &scene.gt});
    const std::set<VoxelIndex> semi(r.sets.semi_fine.begin(), r.sets.semi_fine.end());
    double fg[3] = {0, 0, 0}, n[3] = {0, 0, 0};
    for (const auto& v : r.fused4.coords()) {
      if (semi.count(v)) continue;
      n[0] += 1;
      fg[0] += is_foreground(scene.gt, v);
    }
    for (const auto& v : r.sets.semi_fine) {
      n[1] += 1;
      fg[1] += is_foreground(scene.gt, v);
    }
    for (const auto& v : r.sets.fine) {
      n[2] += 1;
      fg[2] += is_foreground(scene.gt, v);
    }
    if (n[0] == 0 || n[1] == 0 || n[2] == 0) continue;
    double f[3];
    for (int i = 0; i < 3; ++i) {
      f[i] = fg[i] / n[i];
      lo[i] = std::min(lo[i], f[i]);
      hi[i] = std::max(hi[i], f[i]);
    }
    passed += f[0] < f[1] && f[1] < f[2] ? 1 : 0;
  }
  return {passed == 50, fmt("%d/50 scenes; foreground share coarse %.2f-%.2f, S %.2f-%.2f, "
                            "F %.2f-%.2f",
                            passed, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2])};
}

struct BenchPoint {
  int multiplier;
  std::size_t refined;  // |S| + |F|
  std::size_t nonempty4;
  double hvfr_seconds;
};

std::vector<BenchPoint> bench_hvfr(const fs::path& config, const std::string& sizes, int repeats) {
  const auto r = run_cli({"bench", "--config", config.string(), "--sizes", sizes, "--repeats",
                          std::to_string(repeats)});
  std::vector<BenchPoint> out;
  if (r.code != 0) return out;
  std::istringstream csv(r.out);
  std::string line;
  std::getline(csv, line);  // header
  while (std::getline(csv, line)) {
    std::vector<std::string> f;
    std::istringstream row(line);
    for (std::string cell; std::getline(row, cell, ',');) f.push_back(cell);
    if (f.size() < 12 || f[9] != "hvfr") continue;
    out.push_back({std::stoi(f[0]), std::stoul(f[7]) + std::stoul(f[8]), std::stoul(f[6]),
                   std::stod(f[10])});
  }
  return out;
}

Outcome efficiency() {
  testing::TempDir dir("acceptance");
  // Volume: 8x the lattice (2x per axis) at a fixed scene.
  write_text(dir / "default.ini", "");
  const auto sizes = bench_hvfr(dir / "default.ini", "1,2", 5);
  if (sizes.size() != 2) return {false, "bench over sizes 1,2 failed"};
  const double volume_ratio = sizes[1].hvfr_seconds / sizes[0].hvfr_seconds;
  const bool same_count = sizes[0].nonempty4 == sizes[1].nonempty4;

  // Refined-set size: raise |S|+|F| through the thresholds at fixed volume.
  std::vector<BenchPoint> sweep;
  const std::pair<const char*, const char*> taus[] = {{"1.01", "1.01"}, {"0.4", "0.7"}, {"0", "0"}};
  for (const auto& [t1, t2] : taus) {
    write_text(dir / "sweep.ini",
               std::string("[hvfr]\ntau1 = ") + t1 + "\ntau2 = " + t2 + "\n");
    const auto p = bench_hvfr(dir / "sweep.ini", "1", 5);
    if (p.size() != 1) return {false, "bench threshold sweep failed"};
    sweep.push_back(p[0]);
  }
  bool grows = true;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    grows = grows && sweep[i].refined > sweep[i - 1].refined &&
            sweep[i].hvfr_seconds > sweep[i - 1].hvfr_seconds;
  }
  const bool ok = same_count && volume_ratio < 2.0 && grows;
  return {ok, fmt("8x volume: hvfr %.4f s -> %.4f s (x%.2f, %zu non-empty); |S|+|F| %zu/%zu/%zu "
                  "-> hvfr %.4f/%.4f/%.4f s",
                  sizes[0].hvfr_seconds, sizes[1].hvfr_seconds, volume_ratio, sizes[0].nonempty4,
                  sweep[0].refined, sweep[1].refined, sweep[2].refined, sweep[0].hvfr_seconds,
                  sweep[1].hvfr_seconds, sweep[2].hvfr_seconds)};
}

Outcome end_to_end() {
  testing::TempDir dir("acceptance");
  const auto t0 = Clock::now();
  const auto r = run_cli({"forward", "--scene", "street", "--out", (dir / "f").string()});
  const double secs = seconds_since(t0);
  if (r.code != 0) return {false, "forward exited " + std::to_string(r.code) + ": " + r.err};
  const PipelineConfig cfg;
  const auto d1 = cfg.geometry.dims_scale1;
  const auto d4 = cfg.geometry.dims_at(4);
  const json rep = json::parse(io::read_text(dir / "f/report.json"));
  const bool shapes = rep["o4"]["dims"] == json({d4[0], d4[1], d4[2]}) &&
                      rep["o4"]["channels"] == 21 &&
                      rep["o1"]["dims"] == json({d1[0], d1[1], d1[2]}) &&
                      rep["o1"]["channels"] == 21 &&
                      io::read_header(dir / "f/pred_scale4.label").dims == d4 &&
                      io::read_header(dir / "f/pred_scale1.label").dims == d1;
  const auto e = run_cli({"eval", "--pred", (dir / "f/gt.label").string(), "--gt",
                          (dir / "f/gt.label").string()});
  const double miou = e.code == 0 ? json::parse(e.out)["miou"].get<double>() : -1.0;
  return {secs < 30.0 && shapes && miou == 1.0,
          fmt("forward %.2f s, shapes %s, GT self-eval mIoU %.3f", secs,
              shapes ? "ok" : "wrong", miou)};
}

}  // namespace
}  // namespace mrvox

int main() {
  using mrvox::Outcome;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"densifier oracle equivalence", mrvox::densifier_oracle},
      {"subdivision exactness", mrvox::subdivision_exactness},
      {"sparse conv matches dense oracle", mrvox::sparse_conv_oracle},
      {"deformable fusion invariance", mrvox::fusion_invariance},
      {"projection round-trip", mrvox::projection_roundtrip},
      {"DDA traversal matches slab oracle", mrvox::dda_traversal},
      {"occlusion truth table and wall fixture", mrvox::occlusion_rules},
      {"losses match definitions", mrvox::losses},
      {"metrics fixtures", mrvox::metrics},
      {"HVFR structure", mrvox::hvfr_structure},
      {"foreground focus", mrvox::foreground_focus},
      {"efficiency", mrvox::efficiency},
      {"end-to-end forward", mrvox::end_to_end},
  };
  int failed = 0;
  for (const auto& [name, check] : criteria) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed,
              criteria.size());
  return failed == 0 ? 0 : 1;
}
