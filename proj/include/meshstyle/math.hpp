//
// Small fixed-size vector types used by the geometry code.
//

#ifndef MESHSTYLE_MATH_HPP
#define MESHSTYLE_MATH_HPP

#include <algorithm>
#include <array>
#include <cmath>

namespace meshstyle {

struct vec2 {
  double x = 0, y = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : y; }
  constexpr double  operator[](int i) const { return i == 0 ? x : y; }
};

struct vec3 {
  double x = 0, y = 0, z = 0;

  constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  constexpr double  operator[](int i) const {
    return i == 0 ? x : (i == 1 ? y : z);
  }
};

constexpr vec2 operator+(vec2 a, vec2 b) { return {a.x + b.x, a.y + b.y}; }
constexpr vec2 operator-(vec2 a, vec2 b) { return {a.x - b.x, a.y - b.y}; }
constexpr vec2 operator*(vec2 a, double b) { return {a.x * b, a.y * b}; }
constexpr vec2 operator*(double a, vec2 b) { return {a * b.x, a * b.y}; }
constexpr bool operator==(vec2 a, vec2 b) { return a.x == b.x && a.y == b.y; }
constexpr double dot(vec2 a, vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(vec2 a, vec2 b) { return a.x * b.y - a.y * b.x; }
inline double    length(vec2 a) { return std::sqrt(dot(a, a)); }

constexpr vec3 operator+(vec3 a, vec3 b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
constexpr vec3 operator-(vec3 a, vec3 b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
constexpr vec3 operator-(vec3 a) { return {-a.x, -a.y, -a.z}; }
constexpr vec3 operator*(vec3 a, double b) { return {a.x * b, a.y * b, a.z * b}; }
constexpr vec3 operator*(double a, vec3 b) { return {a * b.x, a * b.y, a * b.z}; }
constexpr vec3 operator/(vec3 a, double b) { return {a.x / b, a.y / b, a.z / b}; }
constexpr vec3& operator+=(vec3& a, vec3 b) { return a = a + b; }
constexpr bool  operator==(vec3 a, vec3 b) {
  return a.x == b.x && a.y == b.y && a.z == b.z;
}
constexpr double dot(vec3 a, vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
constexpr vec3   cross(vec3 a, vec3 b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(vec3 a) { return std::sqrt(dot(a, a)); }
inline vec3   normalize(vec3 a) {
  auto l = length(a);
  return l > 0 ? a / l : a;
}

// Closest point on triangle (a, b, c) to p, returned as barycentric weights.
// Ericson, Real-Time Collision Detection, 5.1.5.
inline std::array<double, 3> closest_point_barycentric(
    vec3 p, vec3 a, vec3 b, vec3 c) {
  auto ab = b - a, ac = c - a, ap = p - a;
  auto d1 = dot(ab, ap), d2 = dot(ac, ap);
  if (d1 <= 0 && d2 <= 0) return {1, 0, 0};
  auto bp = p - b;
  auto d3 = dot(ab, bp), d4 = dot(ac, bp);
  if (d3 >= 0 && d4 <= d3) return {0, 1, 0};
  auto vc = d1 * d4 - d3 * d2;
  if (vc <= 0 && d1 >= 0 && d3 <= 0) {
    auto v = d1 / (d1 - d3);
    return {1 - v, v, 0};
  }
  auto cp = p - c;
  auto d5 = dot(ab, cp), d6 = dot(ac, cp);
  if (d6 >= 0 && d5 <= d6) return {0, 0, 1};
  auto vb = d5 * d2 - d1 * d6;
  if (vb <= 0 && d2 >= 0 && d6 <= 0) {
    auto w = d2 / (d2 - d6);
    return {1 - w, 0, w};
  }
  auto va = d3 * d6 - d5 * d4;
  if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) {
    auto w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
    return {0, 1 - w, w};
  }
  auto denom = 1 / (va + vb + vc);
  auto v = vb * denom, w = vc * denom;
  return {1 - v - w, v, w};
}

}  // namespace meshstyle

#endif
