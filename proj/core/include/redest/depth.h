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

// Depth camera over the planar heightfield. Rows fan in elevation; columns
// fan in yaw across the same sagittal profile, so a ray with elevation theta
// and yaw psi advances cos(theta) cos(psi) in x per meter of range.

#ifndef REDEST_DEPTH_H_
#define REDEST_DEPTH_H_

#include <iosfwd>
#include <random>
#include <string>

#include "redest/nn.h"
#include "redest/terrain.h"

namespace redest {

class World;

inline constexpr Real kMinRange = 0.01;

struct CameraModel {
  // Mount point relative to the body, rotated with body pitch.
  Real mount_x = 0.25;
  Real mount_z = 0.05;
  // Negative looks down.
  Real mount_pitch = -0.6;
  Real fov_v = 1.0;
  Real fov_h = 1.2;
  int height = 48;
  int width = 64;
  Real max_range = 2.0;

  void Validate() const;
};

struct CameraPose {
  Real x = 0.0, z = 0.0;
  Real pitch = 0.0;  // elevation of the optical axis
  Real yaw = 0.0;
};

enum class DepthStage { kRaw, kRandomized, kDeploymentNoised };
const char* DepthStageName(DepthStage stage);

struct DepthImage {
  int height = 0, width = 0;
  Vec data;  // row-major, meters
  CameraPose pose_used;
  DepthStage stage = DepthStage::kRaw;

  Real& at(int r, int c) { return data[static_cast<size_t>(r) * width + c]; }
  Real at(int r, int c) const {
    return data[static_cast<size_t>(r) * width + c];
  }
  int size() const { return height * width; }
};

struct DepthRandomization {
  Real position_jitter = 0.01;
  Real angle_jitter = 5.0 * 3.14159265358979323846 / 180.0;
  // Sub-column yaw jitter as a fraction of the column pitch.
  Real column_jitter = 0.5;
  Real proportional_noise = 0.01;
  Real additive_std = 0.1;
};

// Nominal camera pose for the current body state.
CameraPose MountPose(const World& world, const CameraModel& camera);

// Elevation of row r and yaw of column c relative to the optical axis.
Real RowElevation(const CameraModel& camera, int r);
Real ColumnYaw(const CameraModel& camera, int c);

// Range along a ray until it meets a top surface or a vertical face. A ray
// dropping below the rim of a void cell is lost and reads max_range.
Real CastRay(const Heightfield& field, Real x0, Real z0, Real elevation,
             Real yaw, Real max_range);

DepthImage RenderAtPose(const Heightfield& field, const CameraModel& camera,
                        const CameraPose& pose);

// Raw render when `randomize` is false. Otherwise pose jitter, per-column yaw
// jitter, proportional range noise, additive Gaussian noise, then clipping,
// in that order.
DepthImage Render(const World& world, const CameraModel& camera,
                  std::mt19937_64& rng, bool randomize,
                  const DepthRandomization& rand = {});

// Removes `border` pixels on each side and resamples the center back to the
// original size (bilinear, half-pixel centers).
DepthImage EdgeTruncateResize(const DepthImage& image, int border);

inline constexpr Real kGaussianNoiseMaxStd = 0.5;

DepthImage InjectGaussian(const DepthImage& image, Real level_pct,
                          std::mt19937_64& rng, Real max_range = 2.0);
// Exactly round(level_pct% of pixels) distinct pixels flip to kMinRange or
// max_range. A pixel that already holds the drawn extreme takes the other one,
// so every chosen pixel changes.
DepthImage InjectSaltPepper(const DepthImage& image, Real level_pct,
                            std::mt19937_64& rng, Real max_range = 2.0);
// Every pixel at the near floor, as when the lens is covered.
DepthImage FullOcclusion(const DepthImage& image);
// Readings closer than `near` become invalid (near floor), like a real
// stereo sensor's minimum range.
DepthImage ApplyDeadZone(const DepthImage& image, Real near = 0.1);

// Text frame: "depth v1 <H> <W> <stage>" then H rows of W values.
void WriteDepthFrame(std::ostream& os, const DepthImage& image);
DepthImage ReadDepthFrame(std::istream& is);

}  // namespace redest

#endif  // REDEST_DEPTH_H_
