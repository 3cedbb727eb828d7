#pragma once

#include <array>
#include <cmath>

namespace immf::bodysim {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a[0] + b[0], a[1] + b[1], a[2] + b[2]}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2]}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a[0], s * a[1], s * a[2]}; }
inline double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline Vec3 normalized(const Vec3& a) {
  const double n = norm(a);
  return n > 0 ? (1.0 / n) * a : Vec3{0, 0, 0};
}

Mat3 identity3();
Mat3 matmul3(const Mat3& a, const Mat3& b);
Vec3 rotate(const Mat3& m, const Vec3& v);
/// Rodrigues rotation for an axis-angle vector (angle = |v|).
Mat3 axis_angle_to_matrix(const Vec3& v);

struct ClosestPoint {
  Vec3 point;
  std::array<double, 3> bary;  // weights of the triangle's vertices a, b, c
  double distance_sq;
};

/// Closest point on triangle abc to p (Ericson, Real-Time Collision Detection 5.1.5).
ClosestPoint closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace immf::bodysim
