// Copyright 2026 The GCFS Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <array>
#include <cmath>
#include <complex>

#include "gcfs/audio.hpp"

namespace gcfs {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
  friend double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
  friend double norm(Vec3 a) { return std::sqrt(dot(a, a)); }
};

inline double deg2rad(double deg) { return deg * kPi / 180.0; }
inline double rad2deg(double rad) { return rad * 180.0 / kPi; }

/// Unit vector pointing towards a source. Head-centred frame: x to the
/// front, y to the left, z up; azimuth is counter-clockwise (positive = left).
inline Vec3 direction(double azimuth_deg, double elevation_deg = 0.0) {
  const double az = deg2rad(azimuth_deg), el = deg2rad(elevation_deg);
  return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
}

/// Positions of the four hearing-aid microphones in engine channel order
/// (front-left, front-right, back-left, back-right).
struct ArrayGeometry {
  std::array<Vec3, kNumMics> mic{};
  double speed_of_sound = kSpeedOfSound;

  /// Two behind-the-ear devices: front/back pairs `spacing` apart along x,
  /// devices `head_width` apart along y.
  static ArrayGeometry hearing_aids(double spacing = 0.011, double head_width = 0.15) {
    ArrayGeometry g;
    const double hx = spacing / 2.0, hy = head_width / 2.0;
    g.mic[kFrontLeft] = {hx, hy, 0.0};
    g.mic[kFrontRight] = {hx, -hy, 0.0};
    g.mic[kBackLeft] = {-hx, hy, 0.0};
    g.mic[kBackRight] = {-hx, -hy, 0.0};
    return g;
  }

  double distance(std::size_t i, std::size_t j) const { return norm(mic[i] - mic[j]); }

  /// Plane-wave arrival time at mic m relative to the origin.
  double plane_wave_delay(std::size_t m, double azimuth_deg, double elevation_deg = 0.0) const {
    return -dot(direction(azimuth_deg, elevation_deg), mic[m]) / speed_of_sound;
  }

  /// True when the left mics mirror the right ones about the median (x-z) plane.
  bool is_mirror_symmetric(double tol = 1e-9) const {
    auto mirrored = [](Vec3 v) { return Vec3{v.x, -v.y, v.z}; };
    return norm(mirrored(mic[kFrontLeft]) - mic[kFrontRight]) < tol &&
           norm(mirrored(mic[kBackLeft]) - mic[kBackRight]) < tol;
  }
};

/// Channel permutation mapping left-ear roles onto right-ear roles.
inline constexpr std::array<std::size_t, kNumMics> kMirrorChannels{kFrontRight, kFrontLeft,
                                                                   kBackRight, kBackLeft};

}  // namespace gcfs
