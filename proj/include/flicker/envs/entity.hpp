#pragma once

#include <cmath>
#include <cstdint>

namespace flicker {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Vec2 operator*(Vec2 a, double k) { return {a.x * k, a.y * k}; }
  friend bool operator==(Vec2 a, Vec2 b) = default;
  double norm() const { return std::hypot(x, y); }
};

struct Entity {
  std::int64_t id = -1;
  int kind = 0;
  Vec2 pos;
  Vec2 vel;
  double radius = 0.0;
  bool active = true;
  // Agents: previous action index, -1 before the first step.
  int last_action = -1;
  // Wandering entities: current unit heading.
  Vec2 heading;

  friend bool operator==(const Entity&, const Entity&) = default;
};

// Surface-to-surface distance; negative when the bodies overlap.
inline double distance(const Entity& a, const Entity& b) {
  const double dx = a.pos.x - b.pos.x;
  const double dy = a.pos.y - b.pos.y;
  return std::sqrt(dx * dx + dy * dy) - a.radius - b.radius;
}

inline bool collides(const Entity& a, const Entity& b) { return distance(a, b) < 0.0; }

}  // namespace flicker
