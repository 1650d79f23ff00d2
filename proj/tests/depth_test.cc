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

#include <cmath>
#include <cstring>
#include <random>
#include <sstream>

#include <gtest/gtest.h>

#include "redest/depth.h"
#include "redest/error.h"
#include "redest/terrain.h"
#include "redest/world.h"

namespace redest {
namespace {

Heightfield FlatField() { return GenerateTerrain(TerrainKind::kFlat, 0, 1); }

// Field that is 0 before xs and `hs` from xs on. xs sits on a cell boundary.
Heightfield StepField(double xs, double hs) {
  Heightfield f = FlatField();
  for (int i = 0; i < f.num_cells(); ++i) {
    if (f.CellStart(i) >= xs - 1e-9) f.heights[i] = hs;
  }
  return f;
}

// Closed-form range over a single step: ground hit before the face, face hit,
// or top hit. Ranges are along the 3D ray.
double StepOracle(double cx, double cz, double elev, double yaw, double xs,
                  double hs, double max_range) {
  const double a = std::cos(elev) * std::cos(yaw), b = std::sin(elev);
  double t = max_range;
  if (b < 0.0) {
    const double tg = cz / -b;
    if (cx + a * tg < xs) return std::min(tg, max_range);
  }
  const double tf = (xs - cx) / a;
  if (tf >= 0.0 && cz + b * tf < hs) return std::min(tf, max_range);
  if (b < 0.0) t = std::min(t, (cz - hs) / -b);
  return t;
}

bool AllInRange(const DepthImage& img, double max_range = 2.0) {
  for (double d : img.data) {
    if (!(d > 0.0 && d <= max_range)) return false;
  }
  return true;
}

std::uint64_t Bits(double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, sizeof u);
  return u;
}

TEST(Raycast, FortyFiveDegreesOverFlatGround) {
  const double d = CastRay(FlatField(), 0.0, 0.3, -M_PI / 4.0, 0.0, 2.0);
  EXPECT_NEAR(d, 0.3 / std::sin(M_PI / 4.0), 1e-12);
  EXPECT_NEAR(d, 0.42426, 1e-5);
}

TEST(Raycast, HorizontalRayReadsMaxRange) {
  EXPECT_EQ(CastRay(FlatField(), 0.0, 0.3, 0.0, 0.0, 2.0), 2.0);
  EXPECT_EQ(CastRay(FlatField(), 0.0, 0.3, 0.2, 0.3, 2.0), 2.0);
}

TEST(Raycast, FlatImageMatchesClosedForm) {
  CameraModel cam;
  const Heightfield f = FlatField();
  for (double pitch : {-0.3, -0.6, -0.9}) {
    const CameraPose pose{0.13, 0.35, pitch, 0.02};
    const DepthImage img = RenderAtPose(f, cam, pose);
    for (int r = 0; r < cam.height; ++r) {
      const double elev = pitch + cam.fov_v * (0.5 - (r + 0.5) / cam.height);
      const double expect = elev < 0.0 ? std::min(0.35 / -std::sin(elev), 2.0) : 2.0;
      for (int c = 0; c < cam.width; ++c) {
        ASSERT_NEAR(img.at(r, c), expect, 1e-6) << r << "," << c;
      }
    }
    EXPECT_TRUE(AllInRange(img));
  }
}

TEST(Raycast, SingleStepMatchesClosedForm) {
  CameraModel cam;
  for (double hs : {0.1, 0.25, 0.5, -0.15}) {
    const double xs = 0.6;
    const Heightfield f = StepField(xs, hs);
    const CameraPose pose{0.02, 0.33, -0.55, -0.04};
    const DepthImage img = RenderAtPose(f, cam, pose);
    int faces = 0;
    for (int r = 0; r < cam.height; ++r) {
      const double elev = pose.pitch + cam.fov_v * (0.5 - (r + 0.5) / cam.height);
      for (int c = 0; c < cam.width; ++c) {
        const double yaw = pose.yaw + cam.fov_h * ((c + 0.5) / cam.width - 0.5);
        const double expect = StepOracle(pose.x, pose.z, elev, yaw, xs, hs, 2.0);
        ASSERT_NEAR(img.at(r, c), expect, 1e-6) << "h " << hs << " " << r << "," << c;
        const double tf = (xs - pose.x) / (std::cos(elev) * std::cos(yaw));
        faces += std::abs(img.at(r, c) - tf) < 1e-9;
      }
    }
    if (hs > 0.2) EXPECT_GT(faces, 0);
    EXPECT_TRUE(AllInRange(img));
  }
}

TEST(Raycast, RaysIntoVoidReadMaxRange) {
  Heightfield f = FlatField();
  for (int i = 0; i < f.num_cells(); ++i) {
    if (f.CellStart(i) >= 0.4 - 1e-9 && f.CellStart(i) < 1.2 - 1e-9) f.void_mask[i] = 1;
  }
  int checked = 0;
  for (double elev = -1.2; elev < -0.05; elev += 0.01) {
    const double xg = 0.3 / std::tan(-elev);
    const double d = CastRay(f, 0.0, 0.3, elev, 0.0, 2.0);
    if (xg > 0.41 && xg < 1.19) {
      EXPECT_EQ(d, 2.0) << elev;
      ++checked;
    } else if (xg < 0.39) {
      EXPECT_NEAR(d, 0.3 / -std::sin(elev), 1e-12);
    }
  }
  EXPECT_GT(checked, 10);
}

TEST(Raycast, BackwardRaysMirrorForwardOnes) {
  const Heightfield f = FlatField();
  for (double e : {0.2, 0.5, 0.9, 1.3}) {
    const double back = CastRay(f, 3.0, 0.3, -M_PI + e, 0.0, 2.0);
    EXPECT_NEAR(back, CastRay(f, 3.0, 0.3, -e, 0.0, 2.0), 1e-12) << e;
  }
  EXPECT_NEAR(CastRay(f, 3.0, 0.3, -M_PI / 2.0, 0.0, 2.0), 0.3, 1e-12);
  EXPECT_EQ(CastRay(f, 3.0, 0.3, M_PI / 2.0, 0.0, 2.0), 2.0);
  EXPECT_EQ(CastRay(f, 3.0, 0.3, M_PI, 0.0, 2.0), 2.0);
}

TEST(Raycast, BackwardRayMeetsFaceBehind) {
  // Ground at 0.4 behind x = 0.6, camera above the lower part at x = 1.0.
  Heightfield f = FlatField();
  for (int i = 0; i < f.num_cells(); ++i) {
    if (f.CellStart(i) < 0.6 - 1e-9) f.heights[i] = 0.4;
  }
  const double e = 0.1;
  const double expect = (1.0 - 0.6) / std::cos(e);
  EXPECT_NEAR(CastRay(f, 1.0, 0.3, -M_PI + e, 0.0, 2.0), expect, 1e-12);
}

TEST(Raycast, CameraInsideTerrainReadsFloor) {
  EXPECT_EQ(CastRay(StepField(-5.0, 1.0), 0.0, 0.5, -0.3, 0.0, 2.0), kMinRange);
}

TEST(Render, RawIsDeterministicAndMountFollowsBody) {
  World w(GenerateTerrain(TerrainKind::kStairsUp, 4, 3), {0.5, 0.0, false}, 2);
  CameraModel cam;
  cam.height = 12;
  cam.width = 16;
  std::mt19937_64 r1(1), r2(99);
  const DepthImage a = Render(w, cam, r1, false);
  const DepthImage b = Render(w, cam, r2, false);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.stage, DepthStage::kRaw);
  EXPECT_DOUBLE_EQ(a.pose_used.x, w.robot().x + cam.mount_x);
  EXPECT_DOUBLE_EQ(a.pose_used.z, w.robot().z + cam.mount_z);
}

TEST(Render, RandomizedIsDeterministicPerSeed) {
  World w(GenerateTerrain(TerrainKind::kGap, 6, 3), {0.5, 0.0, false}, 2);
  CameraModel cam;
  std::mt19937_64 r1(5), r2(5), r3(6);
  const DepthImage a = Render(w, cam, r1, true);
  const DepthImage b = Render(w, cam, r2, true);
  const DepthImage c = Render(w, cam, r3, true);
  EXPECT_EQ(a.data, b.data);
  EXPECT_NE(a.data, c.data);
  EXPECT_EQ(a.stage, DepthStage::kRandomized);
  EXPECT_TRUE(AllInRange(a));
  EXPECT_LE(std::abs(a.pose_used.pitch - cam.mount_pitch), 5.0 * M_PI / 180.0 + 1e-12);
}

// Residual std per depth band against sqrt(0.01 + (0.01 d)^2).
TEST(Render, RangeNoiseMatchesModel) {
  World w(FlatField(), {0.0, 0.0, true}, 2);
  CameraModel cam;
  DepthRandomization rand;
  rand.position_jitter = rand.angle_jitter = rand.column_jitter = 0.0;
  std::mt19937_64 rng(8), unused(0);
  const DepthImage raw = Render(w, cam, unused, false);
  const double edges[] = {0.35, 0.6, 0.9, 1.3};
  double sum[3] = {}, sq[3] = {}, dd[3] = {};
  int n[3] = {};
  int pixels = 0;
  while (pixels < 100000) {
    const DepthImage img = Render(w, cam, rng, true, rand);
    for (int i = 0; i < img.size(); ++i, ++pixels) {
      const double d = raw.data[i];
      for (int b = 0; b < 3; ++b) {
        if (d >= edges[b] && d < edges[b + 1]) {
          const double e = img.data[i] - d;
          sum[b] += e;
          sq[b] += e * e;
          dd[b] += d * d;
          ++n[b];
        }
      }
    }
  }
  for (int b = 0; b < 3; ++b) {
    ASSERT_GT(n[b], 1000);
    const double mean = sum[b] / n[b];
    const double sd = std::sqrt(sq[b] / n[b] - mean * mean);
    const double model = std::sqrt(0.01 + 0.0001 * dd[b] / n[b]);
    EXPECT_NEAR(sd / model, 1.0, 0.1) << "band " << b;
  }
}

TEST(Resize, BorderZeroIsIdentity) {
  World w(GenerateTerrain(TerrainKind::kPlatform, 5, 3), {0.5, 0.0, false}, 2);
  std::mt19937_64 rng(1);
  const DepthImage img = Render(w, CameraModel{}, rng, true);
  const DepthImage out = EdgeTruncateResize(img, 0);
  EXPECT_EQ(out.data, img.data);
  EXPECT_EQ(out.stage, img.stage);
}

TEST(Resize, ConstantStaysConstant) {
  DepthImage img;
  img.height = 48;
  img.width = 64;
  img.data.assign(48 * 64, 0.7312);
  for (int border : {1, 4, 10}) {
    const DepthImage out = EdgeTruncateResize(img, border);
    for (double d : out.data) ASSERT_EQ(Bits(d), Bits(0.7312));
  }
}

TEST(Resize, OutputIgnoresBorderPixels) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.1, 2.0);
  DepthImage a;
  a.height = 48;
  a.width = 64;
  a.data.resize(48 * 64);
  for (double& d : a.data) d = u(rng);
  DepthImage b = a;
  const int border = 4;
  for (int r = 0; r < 48; ++r) {
    for (int c = 0; c < 64; ++c) {
      if (r < border || r >= 48 - border || c < border || c >= 64 - border) {
        b.at(r, c) = 1.999;
      }
    }
  }
  const DepthImage oa = EdgeTruncateResize(a, border);
  const DepthImage ob = EdgeTruncateResize(b, border);
  EXPECT_EQ(oa.data, ob.data);
  EXPECT_EQ(oa.height, 48);
  EXPECT_EQ(oa.width, 64);
  // Corner pixel maps onto the first interior pixel exactly.
  EXPECT_EQ(oa.at(0, 0), a.at(border, border));
  EXPECT_EQ(oa.at(47, 63), a.at(47 - border, 63 - border));
}

TEST(Resize, BorderTooLarge) {
  DepthImage img;
  img.height = 12;
  img.width = 16;
  img.data.assign(12 * 16, 1.0);
  EXPECT_THROW(EdgeTruncateResize(img, 6), ContractError);
  EXPECT_THROW(EdgeTruncateResize(img, -1), ContractError);
  EXPECT_NO_THROW(EdgeTruncateResize(img, 5));
}

DepthImage SceneImage() {
  World w(GenerateTerrain(TerrainKind::kStairsUp, 6, 3), {0.5, 0.0, false}, 2);
  std::mt19937_64 rng(4);
  return Render(w, CameraModel{}, rng, true);
}

TEST(Noise, LevelZeroIsIdentity) {
  const DepthImage img = SceneImage();
  std::mt19937_64 rng(1);
  EXPECT_EQ(InjectGaussian(img, 0.0, rng).data, img.data);
  EXPECT_EQ(InjectSaltPepper(img, 0.0, rng).data, img.data);
}

TEST(Noise, SaltPepperAltersExactCount) {
  const DepthImage img = SceneImage();
  for (double level : {10.0, 30.0, 70.0, 100.0}) {
    std::mt19937_64 rng(static_cast<std::uint64_t>(level));
    const DepthImage out = InjectSaltPepper(img, level, rng);
    int changed = 0, salt = 0;
    for (int i = 0; i < img.size(); ++i) {
      if (Bits(out.data[i]) != Bits(img.data[i])) {
        ++changed;
        ASSERT_TRUE(out.data[i] == kMinRange || out.data[i] == 2.0);
        salt += out.data[i] == 2.0;
      }
    }
    EXPECT_EQ(changed, static_cast<int>(std::lround(level / 100.0 * 3072)));
    if (level == 10.0) EXPECT_EQ(changed, 307);
    EXPECT_GT(salt, 0);
    EXPECT_LT(salt, changed);
    EXPECT_EQ(out.stage, DepthStage::kDeploymentNoised);
    EXPECT_TRUE(AllInRange(out));
  }
}

TEST(Noise, GaussianFullLevelStd) {
  DepthImage img;
  img.height = 100;
  img.width = 1000;
  img.data.assign(100000, 10.0);
  std::mt19937_64 rng(7);
  const DepthImage out = InjectGaussian(img, 100.0, rng, 100.0);
  double s = 0.0, s2 = 0.0;
  for (double d : out.data) {
    s += d - 10.0;
    s2 += (d - 10.0) * (d - 10.0);
  }
  const double n = out.data.size();
  const double sd = std::sqrt(s2 / n - (s / n) * (s / n));
  EXPECT_NEAR(sd, 0.5, 0.025);
}

TEST(Noise, EveryStageStaysInRange) {
  const DepthImage img = SceneImage();
  std::mt19937_64 rng(2);
  for (double level : {30.0, 70.0, 100.0}) {
    EXPECT_TRUE(AllInRange(InjectGaussian(img, level, rng)));
    EXPECT_TRUE(AllInRange(EdgeTruncateResize(InjectGaussian(img, level, rng), 4)));
  }
  EXPECT_TRUE(AllInRange(FullOcclusion(img)));
  EXPECT_TRUE(AllInRange(ApplyDeadZone(img)));
  EXPECT_THROW(InjectGaussian(img, 101.0, rng), ContractError);
  EXPECT_THROW(InjectSaltPepper(img, -1.0, rng), ContractError);
}

TEST(Noise, DeadZoneFloorsCloseReadings) {
  DepthImage img;
  img.height = 4;
  img.width = 4;
  img.data.assign(16, 0.5);
  img.data[3] = 0.05;
  const DepthImage out = ApplyDeadZone(img, 0.1);
  EXPECT_EQ(out.data[3], kMinRange);
  EXPECT_EQ(out.data[4], 0.5);
}

TEST(Frames, TextRoundTrip) {
  const DepthImage img = SceneImage();
  std::stringstream ss;
  WriteDepthFrame(ss, img);
  const DepthImage back = ReadDepthFrame(ss);
  EXPECT_EQ(back.data, img.data);
  EXPECT_EQ(back.stage, img.stage);
  std::stringstream bad("depth v9 1 1 raw\n1\n");
  EXPECT_THROW(ReadDepthFrame(bad), ContractError);
}

TEST(Camera, RejectsTinyResolution) {
  CameraModel cam;
  cam.height = 3;
  EXPECT_THROW(RenderAtPose(FlatField(), cam, {}), ContractError);
}

}  // namespace
}  // namespace redest
