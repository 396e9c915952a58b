// Copyright 2026 The mrvox Authors
// SPDX-License-Identifier: Apache-2.0

#ifndef MRVOX_BENCH_HPP
#define MRVOX_BENCH_HPP

#include <sys/resource.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mrvox/config.hpp"
#include "mrvox/pipeline.hpp"
#include "mrvox/synthetic.hpp"

namespace mrvox {

inline constexpr const char* kBenchCsvHeader =
    "multiplier,dim_x,dim_y,dim_z,volume,nonempty_scale1,nonempty_scale4,"
    "semi_fine,fine,stage,seconds,peak_rss_kb";

struct BenchRow {
  int multiplier = 1;
  std::array<int, 3> dims = {0, 0, 0};
  std::size_t volume = 0;
  std::size_t nonempty1 = 0;
  std::size_t nonempty4 = 0;
  std::size_t semi_fine = 0;
  std::size_t fine = 0;
  std::string stage;
  double seconds = 0.0;  // minimum over repeats
  long peak_rss_kb = 0;
};

inline long peak_rss_kb() {
  rusage usage{};
  getrusage(RUSAGE_SELF, &usage);
  return usage.ru_maxrss;  // kilobytes on Linux
}

/// Runs the forward pass on one fixed scene embedded in lattices whose dims
/// are the configured dims times each multiplier. Scene content (boxes, scan,
/// images) is built once at multiplier 1, so the non-empty voxel count is the
/// same for every size and only the lattice volume changes. Each stage
/// reports its fastest of `repeats` runs; the "hvfr" row sums the HVFR stages
/// of the fastest run.
inline std::vector<BenchRow> run_bench(const PipelineConfig& cfg,
                                       const std::vector<int>& multipliers,
                                       int repeats = 3,
                                       const std::string& scene_name = "street") {
  if (repeats < 1) throw Error(Errc::kConfigError, "repeats must be positive");
  const SyntheticScene scene =
      build_scene(named_scene_spec(scene_name, cfg.geometry, cfg.seed_for("scene"),
                                   cfg.image_channels));
  const PipelineWeights weights = PipelineWeights::seeded(cfg);
  std::vector<BenchRow> rows;
  for (int m : multipliers) {
    if (m < 1) throw Error(Errc::kConfigError, "size multipliers must be positive");
    PipelineConfig sized = cfg;
    for (auto& d : sized.geometry.dims_scale1) d *= m;
    const SemanticVolume gt = rasterize(sized.geometry, scene.spec.boxes);
    FrameInput in{scene.cloud, scene.rig(), scene.images, &gt};

    std::vector<double> best;
    double best_hvfr = std::numeric_limits<double>::infinity();
    ForwardResult last;
    for (int rep = 0; rep < repeats; ++rep) {
      ForwardResult r = run_forward(sized, weights, in);
      if (best.empty()) best.assign(r.stages.size(), std::numeric_limits<double>::infinity());
      for (std::size_t i = 0; i < r.stages.size(); ++i) {
        best[i] = std::min(best[i], r.stages[i].seconds);
      }
      best_hvfr = std::min(best_hvfr, r.hvfr_seconds);
      last = std::move(r);
    }
    BenchRow base;
    base.multiplier = m;
    base.dims = sized.geometry.dims_scale1;
    base.volume = sized.geometry.at_scale(1).num_cells();
    base.nonempty1 = last.lidar.at(1).size();
    base.nonempty4 = last.fused4.size();
    base.semi_fine = last.sets.semi_fine.size();
    base.fine = last.sets.fine.size();
    base.peak_rss_kb = peak_rss_kb();
    for (std::size_t i = 0; i < last.stages.size(); ++i) {
      BenchRow row = base;
      row.stage = last.stages[i].name;
      row.seconds = best[i];
      rows.push_back(row);
    }
    BenchRow total = base;
    total.stage = "hvfr";
    total.seconds = best_hvfr;
    rows.push_back(total);
  }
  return rows;
}

inline void write_bench_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << kBenchCsvHeader << '\n';
  for (const auto& r : rows) {
    std::ostringstream sec;
    sec.precision(9);
    sec << r.seconds;
    out << r.multiplier << ',' << r.dims[0] << ',' << r.dims[1] << ',' << r.dims[2] << ','
        << r.volume << ',' << r.nonempty1 << ',' << r.nonempty4 << ',' << r.semi_fine << ','
        << r.fine << ',' << r.stage << ',' << sec.str() << ',' << r.peak_rss_kb << '\n';
  }
}

}  // namespace mrvox

#endif  // MRVOX_BENCH_HPP
