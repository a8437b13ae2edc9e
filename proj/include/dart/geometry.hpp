#pragma once

#include <cmath>

namespace dart {

inline constexpr double kPi = 3.14159265358979323846;

// Wraps an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a <= 0.0) a += 2.0 * kPi;
  return a - kPi;
}

struct Pose {
  double x = 0.0;        // m
  double y = 0.0;        // m
  double heading = 0.0;  // rad, kept in (-pi, pi]
};

// Pose of another entity in an observer-centric polar frame.
struct PolarRel {
  double rho = 0.0;    // m, >= 0
  double theta = 0.0;  // rad, bearing in the observer's frame
  double phi = 0.0;    // rad, relative orientation
};

// Network input encoding of one entity: distance normalized by rho_max
// (not clipped; entities beyond rho_max encode > 1), angles as cos/sin pairs.
struct EntityFeature {
  double rho_norm = 0.0;
  double cos_theta = 1.0;
  double sin_theta = 0.0;
  double cos_phi = 1.0;
  double sin_phi = 0.0;
};

inline PolarRel relative_pose(const Pose& observer, const Pose& other) {
  const double dx = other.x - observer.x;
  const double dy = other.y - observer.y;
  PolarRel rel;
  rel.rho = std::sqrt(dx * dx + dy * dy);
  // Bearing is undefined at coincident positions; define theta = 0 there so
  // no NaN can reach a policy input.
  rel.theta = rel.rho < 1e-9
                  ? 0.0
                  : wrap_angle(std::atan2(dy, dx) - observer.heading);
  rel.phi = wrap_angle(other.heading - observer.heading);
  return rel;
}

inline EntityFeature encode_entity(const PolarRel& rel, double rho_max) {
  EntityFeature f;
  f.rho_norm = rel.rho / rho_max;
  f.cos_theta = std::cos(rel.theta);
  f.sin_theta = std::sin(rel.theta);
  f.cos_phi = std::cos(rel.phi);
  f.sin_phi = std::sin(rel.phi);
  return f;
}

}  // namespace dart
