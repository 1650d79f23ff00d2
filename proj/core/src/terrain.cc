// Copyright 2026 The redest Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "redest/terrain.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

#include "redest/error.h"

namespace redest {
namespace {

Real Lerp(Real lo, Real hi, int level) {
  return lo + (hi - lo) * static_cast<Real>(level) / (kNumLevels - 1);
}

// Sets cells whose centers fall inside [x0, x1).
void Fill(Heightfield& f, Real x0, Real x1, Real h, bool is_void) {
  for (int i = 0; i < f.num_cells(); ++i) {
    const Real c = f.CellStart(i) + 0.5 * f.cell_size;
    if (c >= x0 && c < x1) {
      f.heights[i] = h;
      f.void_mask[i] = is_void ? 1 : 0;
    }
  }
}

}  // namespace

const char* TerrainKindName(TerrainKind kind) {
  switch (kind) {
    case TerrainKind::kFlat: return "flat";
    case TerrainKind::kRough: return "rough";
    case TerrainKind::kStairsUp: return "stairs_up";
    case TerrainKind::kStairsDown: return "stairs_down";
    case TerrainKind::kGap: return "gap";
    case TerrainKind::kPlatform: return "platform";
  }
  return "?";
}

TerrainKind TerrainKindFromName(const std::string& name) {
  for (TerrainKind k : {TerrainKind::kFlat, TerrainKind::kRough,
                        TerrainKind::kStairsUp, TerrainKind::kStairsDown,
                        TerrainKind::kGap, TerrainKind::kPlatform}) {
    if (name == TerrainKindName(k)) return k;
  }
  throw ContractError("unknown terrain kind '" + name + "'");
}

bool IsDifficult(TerrainKind kind) {
  return kind == TerrainKind::kGap || kind == TerrainKind::kPlatform;
}

Real DifficultySchedule::GapWidth(int level) const {
  return Lerp(gap_min, gap_max, level);
}
Real DifficultySchedule::PlatformHeight(int level) const {
  return Lerp(platform_min, platform_max, level);
}
Real DifficultySchedule::StepHeight(int level) const {
  return Lerp(step_min, step_max, level);
}
Real DifficultySchedule::RoughAmplitude(int level) const {
  return Lerp(rough_min, rough_max, level);
}

int Heightfield::CellIndex(Real x) const {
  const Real f = std::floor((x - origin_x) / cell_size);
  if (!(f >= 0.0)) return 0;  // also catches NaN
  return std::min(static_cast<int>(f), num_cells() - 1);
}

Real Heightfield::MinHeight() const {
  Real m = 0.0;
  bool any = false;
  for (int i = 0; i < num_cells(); ++i) {
    if (void_mask[i]) continue;
    m = any ? std::min(m, heights[i]) : heights[i];
    any = true;
  }
  return m;
}

Heightfield GenerateTerrain(TerrainKind kind, int level, std::uint64_t seed,
                            const TerrainLayout& layout) {
  Require(level >= 0 && level < kNumLevels,
          "terrain level must be in 0..9, got " + std::to_string(level));
  Require(layout.cell_size > 0.0 && layout.length > 0.0,
          "terrain layout must be positive");
  Heightfield f;
  f.cell_size = layout.cell_size;
  f.origin_x = layout.origin_x;
  const int n = static_cast<int>(std::lround(layout.length / layout.cell_size));
  f.heights.assign(n, 0.0);
  f.void_mask.assign(n, 0);
  f.kind = kind;
  f.level = level;
  const DifficultySchedule& sched = layout.schedule;
  f.gap_width = sched.GapWidth(level);
  f.platform_height = sched.PlatformHeight(level);
  f.step_height = sched.StepHeight(level);

  std::mt19937_64 rng(seed ^ (0x9e3779b97f4a7c15ULL * (level + 1)) ^
                      (static_cast<std::uint64_t>(kind) << 40));
  std::uniform_real_distribution<Real> unit(0.0, 1.0);
  const Real end = f.end_x();
  Real x = layout.start_clear + 0.5 * unit(rng);

  switch (kind) {
    case TerrainKind::kFlat:
      break;
    case TerrainKind::kRough: {
      const Real amp = sched.RoughAmplitude(level);
      Vec raw(n);
      for (Real& v : raw) v = amp * (2.0 * unit(rng) - 1.0);
      for (int i = 0; i < n; ++i) {
        if (f.CellStart(i) < layout.start_clear) continue;
        const Real a = raw[std::max(0, i - 1)], b = raw[i],
                   c = raw[std::min(n - 1, i + 1)];
        f.heights[i] = (a + 2.0 * b + c) / 4.0;
      }
      break;
    }
    case TerrainKind::kStairsUp:
    case TerrainKind::kStairsDown: {
      const Real dir = kind == TerrainKind::kStairsUp ? 1.0 : -1.0;
      Real h = 0.0;
      while (x < end) {
        for (int s = 0; s < layout.steps_per_flight && x < end; ++s) {
          h += dir * f.step_height;
          Fill(f, x, x + layout.tread, h, false);
          x += layout.tread;
        }
        Fill(f, x, x + layout.landing, h, false);
        x += layout.landing;
        // Everything past the current flight continues at the landing height
        // until the next flight overwrites it.
        Fill(f, x, end, h, false);
      }
      break;
    }
    case TerrainKind::kGap:
      while (x < end) {
        Fill(f, x, x + f.gap_width, 0.0, true);
        x += f.gap_width + 1.5 + unit(rng);
      }
      break;
    case TerrainKind::kPlatform:
      while (x < end) {
        const Real len = 1.0 + 0.5 * unit(rng);
        Fill(f, x, x + len, f.platform_height, false);
        x += len + 1.5 + unit(rng);
      }
      break;
  }
  return f;
}

std::string DumpTerrain(const Heightfield& f) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "terrain v1\n";
  os << "kind " << TerrainKindName(f.kind) << "\n";
  os << "level " << f.level << "\n";
  os << "cell_size " << f.cell_size << "\n";
  os << "origin_x " << f.origin_x << "\n";
  os << "gap_width " << f.gap_width << "\n";
  os << "platform_height " << f.platform_height << "\n";
  os << "step_height " << f.step_height << "\n";
  os << "cells " << f.num_cells() << "\n";
  for (int i = 0; i < f.num_cells(); ++i) {
    os << f.heights[i] << " " << static_cast<int>(f.void_mask[i]) << "\n";
  }
  return os.str();
}

Heightfield ParseTerrain(const std::string& text) {
  std::istringstream is(text);
  std::string tag, version;
  is >> tag >> version;
  Require(tag == "terrain" && version == "v1", "not a terrain v1 dump");
  Heightfield f;
  int cells = -1;
  while (cells < 0 && is >> tag) {
    if (tag == "kind") {
      std::string k;
      is >> k;
      f.kind = TerrainKindFromName(k);
    } else if (tag == "level") {
      is >> f.level;
    } else if (tag == "cell_size") {
      is >> f.cell_size;
    } else if (tag == "origin_x") {
      is >> f.origin_x;
    } else if (tag == "gap_width") {
      is >> f.gap_width;
    } else if (tag == "platform_height") {
      is >> f.platform_height;
    } else if (tag == "step_height") {
      is >> f.step_height;
    } else if (tag == "cells") {
      is >> cells;
    } else {
      throw ContractError("unknown terrain dump field '" + tag + "'");
    }
  }
  Require(cells > 0, "terrain dump has no cells");
  f.heights.resize(cells);
  f.void_mask.resize(cells);
  for (int i = 0; i < cells; ++i) {
    int v = 0;
    is >> f.heights[i] >> v;
    f.void_mask[i] = v ? 1 : 0;
  }
  Require(static_cast<bool>(is), "terrain dump truncated");
  return f;
}

}  // namespace redest
