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

#include "redest/depth.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "redest/error.h"
#include "redest/world.h"

namespace redest {
namespace {

Real Clip(Real d, Real max_range) {
  return std::clamp(d, kMinRange, max_range);
}

}  // namespace

void CameraModel::Validate() const {
  Require(height >= 4 && width >= 4, "camera resolution must be at least 4x4");
  Require(max_range > kMinRange, "camera max_range must exceed the near floor");
  Require(fov_v > 0.0 && fov_h > 0.0 && fov_h < 3.0,
          "camera field of view out of range");
}

const char* DepthStageName(DepthStage stage) {
  switch (stage) {
    case DepthStage::kRaw: return "raw";
    case DepthStage::kRandomized: return "randomized";
    case DepthStage::kDeploymentNoised: return "deployment_noised";
  }
  return "?";
}

CameraPose MountPose(const World& world, const CameraModel& camera) {
  const RobotState& r = world.robot();
  const Real c = std::cos(r.pitch), s = std::sin(r.pitch);
  CameraPose pose;
  pose.x = r.x + camera.mount_x * c - camera.mount_z * s;
  pose.z = r.z + camera.mount_x * s + camera.mount_z * c;
  pose.pitch = camera.mount_pitch + r.pitch;
  pose.yaw = 0.0;
  return pose;
}

Real RowElevation(const CameraModel& camera, int r) {
  return camera.fov_v * (0.5 - (r + 0.5) / camera.height);
}

Real ColumnYaw(const CameraModel& camera, int c) {
  return camera.fov_h * ((c + 0.5) / camera.width - 0.5);
}

Real CastRay(const Heightfield& f, Real x0, Real z0, Real elevation, Real yaw,
             Real max_range) {
  const Real a = std::cos(elevation) * std::cos(yaw);
  const Real b = std::sin(elevation);
  int i = f.CellIndex(x0);
  if (!f.void_mask[i] && z0 <= f.heights[i]) return kMinRange;
  // A body pitched past vertical looks backwards; march toward -x then.
  const int step = a >= 0.0 ? 1 : -1;
  while (true) {
    const Real h = f.heights[i];
    const Real t_out =
        a == 0.0 ? max_range
                 : ((step > 0 ? f.CellStart(i + 1) : f.CellStart(i)) - x0) / a;
    const Real t_end = std::min(t_out, max_range);
    if (b < 0.0) {
      const Real t_hit = (z0 - h) / (-b);
      if (t_hit <= t_end) return f.void_mask[i] ? max_range : t_hit;
    }
    const int next = i + step;
    if (t_out >= max_range || next < 0 || next >= f.num_cells()) {
      return max_range;
    }
    i = next;
    const Real z_in = z0 + b * t_out;
    if (!f.void_mask[i] && z_in < f.heights[i]) return t_out;
  }
}

DepthImage RenderAtPose(const Heightfield& field, const CameraModel& camera,
                        const CameraPose& pose) {
  camera.Validate();
  DepthImage img;
  img.height = camera.height;
  img.width = camera.width;
  img.data.resize(static_cast<size_t>(img.height) * img.width);
  img.pose_used = pose;
  for (int r = 0; r < img.height; ++r) {
    const Real elev = pose.pitch + RowElevation(camera, r);
    for (int c = 0; c < img.width; ++c) {
      const Real yaw = pose.yaw + ColumnYaw(camera, c);
      img.at(r, c) = Clip(
          CastRay(field, pose.x, pose.z, elev, yaw, camera.max_range),
          camera.max_range);
    }
  }
  return img;
}

DepthImage Render(const World& world, const CameraModel& camera,
                  std::mt19937_64& rng, bool randomize,
                  const DepthRandomization& rand) {
  CameraPose pose = MountPose(world, camera);
  if (!randomize) return RenderAtPose(world.terrain(), camera, pose);

  std::uniform_real_distribution<Real> u(-1.0, 1.0);
  pose.x += rand.position_jitter * u(rng);
  pose.z += rand.position_jitter * u(rng);
  pose.pitch += rand.angle_jitter * u(rng);
  pose.yaw += rand.angle_jitter * u(rng);

  camera.Validate();
  DepthImage img;
  img.height = camera.height;
  img.width = camera.width;
  img.data.resize(static_cast<size_t>(img.height) * img.width);
  img.pose_used = pose;
  img.stage = DepthStage::kRandomized;
  const Real col_pitch = camera.fov_h / camera.width;
  for (int c = 0; c < img.width; ++c) {
    const Real yaw =
        pose.yaw + ColumnYaw(camera, c) + rand.column_jitter * col_pitch * u(rng);
    for (int r = 0; r < img.height; ++r) {
      const Real elev = pose.pitch + RowElevation(camera, r);
      img.at(r, c) =
          CastRay(world.terrain(), pose.x, pose.z, elev, yaw, camera.max_range);
    }
  }
  std::normal_distribution<Real> n(0.0, 1.0);
  for (Real& d : img.data) {
    d += rand.proportional_noise * d * n(rng);
    d += rand.additive_std * n(rng);
    d = Clip(d, camera.max_range);
  }
  return img;
}

DepthImage EdgeTruncateResize(const DepthImage& image, int border) {
  Require(border >= 0 && 2 * border < std::min(image.height, image.width),
          "border " + std::to_string(border) + " too large for " +
              std::to_string(image.height) + "x" + std::to_string(image.width));
  if (border == 0) return image;
  const int h = image.height - 2 * border, w = image.width - 2 * border;
  DepthImage out = image;
  auto src = [](int i, int out_n, int in_n, int* lo, int* hi, Real* frac) {
    Real s = (i + 0.5) * in_n / out_n - 0.5;
    s = std::clamp(s, 0.0, static_cast<Real>(in_n - 1));
    *lo = static_cast<int>(std::floor(s));
    *hi = std::min(*lo + 1, in_n - 1);
    *frac = s - *lo;
  };
  for (int r = 0; r < image.height; ++r) {
    int r0, r1;
    Real fr;
    src(r, image.height, h, &r0, &r1, &fr);
    for (int c = 0; c < image.width; ++c) {
      int c0, c1;
      Real fc;
      src(c, image.width, w, &c0, &c1, &fc);
      const Real v00 = image.at(border + r0, border + c0);
      const Real v01 = image.at(border + r0, border + c1);
      const Real v10 = image.at(border + r1, border + c0);
      const Real v11 = image.at(border + r1, border + c1);
      const Real top = v00 + fc * (v01 - v00);
      const Real bot = v10 + fc * (v11 - v10);
      out.at(r, c) = top + fr * (bot - top);
    }
  }
  return out;
}

DepthImage InjectGaussian(const DepthImage& image, Real level_pct,
                          std::mt19937_64& rng, Real max_range) {
  Require(level_pct >= 0.0 && level_pct <= 100.0,
          "noise level must be in [0, 100]");
  DepthImage out = image;
  if (level_pct == 0.0) return out;
  out.stage = DepthStage::kDeploymentNoised;
  std::normal_distribution<Real> n(0.0, level_pct / 100.0 * kGaussianNoiseMaxStd);
  for (Real& d : out.data) d = Clip(d + n(rng), max_range);
  return out;
}

DepthImage InjectSaltPepper(const DepthImage& image, Real level_pct,
                            std::mt19937_64& rng, Real max_range) {
  Require(level_pct >= 0.0 && level_pct <= 100.0,
          "noise level must be in [0, 100]");
  DepthImage out = image;
  if (level_pct == 0.0) return out;
  out.stage = DepthStage::kDeploymentNoised;
  const int n = image.size();
  const int count = static_cast<int>(std::lround(level_pct / 100.0 * n));
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  std::bernoulli_distribution coin(0.5);
  for (int k = 0; k < count; ++k) {
    const int j = std::uniform_int_distribution<int>(k, n - 1)(rng);
    std::swap(idx[k], idx[j]);
    Real& d = out.data[idx[k]];
    Real v = coin(rng) ? max_range : kMinRange;
    if (v == d) v = v == max_range ? kMinRange : max_range;
    d = v;
  }
  return out;
}

DepthImage FullOcclusion(const DepthImage& image) {
  DepthImage out = image;
  std::fill(out.data.begin(), out.data.end(), kMinRange);
  out.stage = DepthStage::kDeploymentNoised;
  return out;
}

DepthImage ApplyDeadZone(const DepthImage& image, Real near) {
  DepthImage out = image;
  for (Real& d : out.data) {
    if (d < near) d = kMinRange;
  }
  return out;
}

void WriteDepthFrame(std::ostream& os, const DepthImage& image) {
  os << "depth v1 " << image.height << " " << image.width << " "
     << DepthStageName(image.stage) << "\n";
  os << std::setprecision(17);
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      os << (c ? " " : "") << image.at(r, c);
    }
    os << "\n";
  }
}

DepthImage ReadDepthFrame(std::istream& is) {
  std::string tag, version, stage;
  DepthImage img;
  is >> tag >> version >> img.height >> img.width >> stage;
  Require(static_cast<bool>(is) && tag == "depth" && version == "v1",
          "not a depth v1 frame");
  Require(img.height > 0 && img.width > 0, "depth frame has no pixels");
  if (stage == "raw") {
    img.stage = DepthStage::kRaw;
  } else if (stage == "randomized") {
    img.stage = DepthStage::kRandomized;
  } else if (stage == "deployment_noised") {
    img.stage = DepthStage::kDeploymentNoised;
  } else {
    throw ContractError("unknown depth stage '" + stage + "'");
  }
  img.data.resize(static_cast<size_t>(img.height) * img.width);
  for (Real& d : img.data) is >> d;
  Require(static_cast<bool>(is), "depth frame truncated");
  return img;
}

}  // namespace redest
