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

#ifndef REDEST_TERRAIN_H_
#define REDEST_TERRAIN_H_

#include <cstdint>
#include <string>
#include <vector>

#include "redest/nn.h"

namespace redest {

inline constexpr int kNumLevels = 10;

enum class TerrainKind { kFlat, kRough, kStairsUp, kStairsDown, kGap, kPlatform };

const char* TerrainKindName(TerrainKind kind);
TerrainKind TerrainKindFromName(const std::string& name);
// Gaps and platforms cannot be crossed reliably without vision.
bool IsDifficult(TerrainKind kind);

// Linear difficulty schedule across levels 0..9.
struct DifficultySchedule {
  Real gap_min = 0.1, gap_max = 0.8;
  Real platform_min = 0.1, platform_max = 0.5;
  Real step_min = 0.05, step_max = 0.2;
  Real rough_min = 0.01, rough_max = 0.04;

  Real GapWidth(int level) const;
  Real PlatformHeight(int level) const;
  Real StepHeight(int level) const;
  Real RoughAmplitude(int level) const;
};

struct TerrainLayout {
  Real cell_size = 0.05;
  Real origin_x = -2.0;
  Real length = 24.0;
  // Terrain features start after this x so every episode begins on flat
  // ground.
  Real start_clear = 1.5;
  Real tread = 0.3;
  int steps_per_flight = 6;
  Real landing = 1.5;
  DifficultySchedule schedule;
};

// Piecewise-constant heightfield over x. Void cells are bottomless.
struct Heightfield {
  Real cell_size = 0.05;
  Real origin_x = 0.0;
  std::vector<Real> heights;
  std::vector<std::uint8_t> void_mask;
  TerrainKind kind = TerrainKind::kFlat;
  int level = 0;
  Real gap_width = 0.0;
  Real platform_height = 0.0;
  Real step_height = 0.0;

  int num_cells() const { return static_cast<int>(heights.size()); }
  Real end_x() const { return origin_x + cell_size * num_cells(); }
  // Index of the cell containing x, clamped to the field.
  int CellIndex(Real x) const;
  Real CellStart(int i) const { return origin_x + cell_size * i; }
  Real HeightAt(Real x) const { return heights[CellIndex(x)]; }
  bool IsVoid(Real x) const { return void_mask[CellIndex(x)] != 0; }
  Real MinHeight() const;
};

// Deterministic per (kind, level, seed).
Heightfield GenerateTerrain(TerrainKind kind, int level, std::uint64_t seed,
                            const TerrainLayout& layout = {});

// Self-describing text grid:
//   terrain v1
//   kind <name>
//   level <n>
//   cell_size <m>
//   origin_x <m>
//   gap_width / platform_height / step_height <m>
//   cells <n>
//   <height> <void 0|1>   (one line per cell)
std::string DumpTerrain(const Heightfield& field);
Heightfield ParseTerrain(const std::string& text);

}  // namespace redest

#endif  // REDEST_TERRAIN_H_
