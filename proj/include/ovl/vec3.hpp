#pragma once

#include <cmath>

namespace ovl {

struct Vec3 {
  double x1 = 0.0;
  double x2 = 0.0;
  double x3 = 0.0;
};

constexpr Vec3 operator+(Vec3 a, Vec3 b) { return {a.x1 + b.x1, a.x2 + b.x2, a.x3 + b.x3}; }
constexpr Vec3 operator-(Vec3 a, Vec3 b) { return {a.x1 - b.x1, a.x2 - b.x2, a.x3 - b.x3}; }
constexpr Vec3 operator-(Vec3 a) { return {-a.x1, -a.x2, -a.x3}; }
constexpr Vec3 operator*(double s, Vec3 a) { return {s * a.x1, s * a.x2, s * a.x3}; }
constexpr Vec3 operator*(Vec3 a, double s) { return s * a; }
constexpr Vec3 operator/(Vec3 a, double s) { return {a.x1 / s, a.x2 / s, a.x3 / s}; }

constexpr Vec3& operator+=(Vec3& a, Vec3 b) { a = a + b; return a; }
constexpr Vec3& operator-=(Vec3& a, Vec3 b) { a = a - b; return a; }

constexpr bool operator==(Vec3 a, Vec3 b) {
  return a.x1 == b.x1 && a.x2 == b.x2 && a.x3 == b.x3;
}

constexpr double dot(Vec3 a, Vec3 b) { return a.x1 * b.x1 + a.x2 * b.x2 + a.x3 * b.x3; }

constexpr Vec3 cross(Vec3 a, Vec3 b) {
  return {a.x2 * b.x3 - a.x3 * b.x2,
          a.x3 * b.x1 - a.x1 * b.x3,
          a.x1 * b.x2 - a.x2 * b.x1};
}

constexpr double norm_sq(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(norm_sq(a)); }

inline bool is_finite(Vec3 a) {
  return std::isfinite(a.x1) && std::isfinite(a.x2) && std::isfinite(a.x3);
}

}
