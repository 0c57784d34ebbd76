#pragma once

/// @file types.hpp
/// Small shared vocabulary: 2D points/vectors and index aliases.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cipad {

using index_t = std::int64_t;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
};

inline Vec2 operator*(double s, const Vec2& v) { return v * s; }
inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double norm(const Vec2& v) { return std::sqrt(dot(v, v)); }

/// Counter-clockwise 90-degree rotation; used to turn edge tangents into normals.
inline Vec2 perp(const Vec2& v) { return {-v.y, v.x}; }

[[noreturn]] inline void fail(const std::string& msg) { throw std::runtime_error(msg); }

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace cipad
