#pragma once

#include <charconv>
#include <cmath>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "navgym/geometry.hpp"

namespace navgym {

struct Rect {
  Vec2 min;
  Vec2 max;

  bool contains(Vec2 p) const { return p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y; }
  friend bool operator==(const Rect&, const Rect&) = default;
};

struct Disk {
  Vec2 center;
  double radius = 0.0;
  friend bool operator==(const Disk&, const Disk&) = default;
};

using Region = std::variant<Rect, Disk>;

struct WorldMap {
  std::string name;
  Rect bounds;
  std::vector<Obstacle> obstacles;
  std::vector<Region> spawn_regions;
  std::vector<Region> goal_regions;

  friend bool operator==(const WorldMap&, const WorldMap&) = default;
};

/// Syntax error in a map document; `line` is 1-based.
class MapParseError : public std::runtime_error {
 public:
  MapParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

class MapValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised by sample_free_pose when no admissible pose is found.
class InfeasibleRegionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline bool segment_intersects_rect(const Segment& s, const Rect& r) {
  if (r.contains(s.a) || r.contains(s.b)) return true;
  const Vec2 c[4] = {r.min, {r.max.x, r.min.y}, r.max, {r.min.x, r.max.y}};
  auto orient = [](Vec2 a, Vec2 b, Vec2 p) { return cross(b - a, p - a); };
  for (int i = 0; i < 4; ++i) {
    const Vec2 p = c[i];
    const Vec2 q = c[(i + 1) % 4];
    const double d1 = orient(s.a, s.b, p);
    const double d2 = orient(s.a, s.b, q);
    const double d3 = orient(p, q, s.a);
    const double d4 = orient(p, q, s.b);
    if (((d1 <= 0 && d2 >= 0) || (d1 >= 0 && d2 <= 0)) && ((d3 <= 0 && d4 >= 0) || (d3 >= 0 && d4 <= 0)))
      return true;
  }
  return false;
}

inline bool circle_intersects_rect(const Circle& c, const Rect& r) {
  const double cx = std::clamp(c.center.x, r.min.x, r.max.x);
  const double cy = std::clamp(c.center.y, r.min.y, r.max.y);
  return norm(c.center - Vec2{cx, cy}) <= c.radius;
}

inline void validate_region(const Region& region, const Rect& bounds, const char* kind) {
  const std::string k(kind);
  if (const auto* r = std::get_if<Rect>(&region)) {
    if (!is_finite(r->min) || !is_finite(r->max)) throw MapValidationError(k + " region must be finite");
    if (!(r->min.x < r->max.x && r->min.y < r->max.y)) throw MapValidationError(k + " rect requires min < max");
    if (!bounds.contains(r->min) || !bounds.contains(r->max))
      throw MapValidationError(k + " region must lie within bounds");
  } else {
    const auto& d = std::get<Disk>(region);
    if (!is_finite(d.center) || !std::isfinite(d.radius)) throw MapValidationError(k + " region must be finite");
    if (!(d.radius > 0.0)) throw MapValidationError(k + " disk radius > 0");
    const Rect box{{d.center.x - d.radius, d.center.y - d.radius}, {d.center.x + d.radius, d.center.y + d.radius}};
    if (!bounds.contains(box.min) || !bounds.contains(box.max))
      throw MapValidationError(k + " region must lie within bounds");
  }
}

}  // namespace detail

/// Throws MapValidationError naming the first violated invariant.
inline void validate(const WorldMap& map) {
  const auto& b = map.bounds;
  if (!is_finite(b.min) || !is_finite(b.max) || !(b.min.x < b.max.x && b.min.y < b.max.y))
    throw MapValidationError("bounds require xmin < xmax and ymin < ymax");
  for (std::size_t i = 0; i < map.obstacles.size(); ++i) {
    const auto& o = map.obstacles[i];
    try {
      navgym::validate(o);
    } catch (const std::invalid_argument& e) {
      throw MapValidationError("obstacle " + std::to_string(i) + ": " + e.what());
    }
    const bool touches = std::holds_alternative<Segment>(o) ? detail::segment_intersects_rect(std::get<Segment>(o), b)
                                                             : detail::circle_intersects_rect(std::get<Circle>(o), b);
    if (!touches) throw MapValidationError("obstacle " + std::to_string(i) + " must intersect bounds");
  }
  if (map.spawn_regions.empty()) throw MapValidationError("map needs at least one spawn region");
  if (map.goal_regions.empty()) throw MapValidationError("map needs at least one goal region");
  for (const auto& r : map.spawn_regions) detail::validate_region(r, b, "spawn");
  for (const auto& r : map.goal_regions) detail::validate_region(r, b, "goal");
}

// ---------------------------------------------------------------------------
// Native text format
//
//   # comment
//   map { name: <identifier>, bounds: [xmin, ymin, xmax, ymax] }
//   segment x1 y1 x2 y2
//   circle cx cy r
//   spawn rect xmin ymin xmax ymax | spawn disk cx cy r
//   goal  rect xmin ymin xmax ymax | goal  disk cx cy r
//
// The header must come first and appear exactly once.

namespace detail {

inline std::string format_double(double v) {
  if (v == 0.0) v = 0.0;  // drop negative zero
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

inline std::vector<std::string> tokenize_map_line(std::string_view line) {
  std::vector<std::string> tokens;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) tokens.push_back(std::move(cur));
    cur.clear();
  };
  for (char ch : line) {
    if (ch == ' ' || ch == '\t' || ch == '\r') {
      flush();
    } else if (ch == '{' || ch == '}' || ch == '[' || ch == ']' || ch == ',' || ch == ':') {
      flush();
      tokens.emplace_back(1, ch);
    } else {
      cur.push_back(ch);
    }
  }
  flush();
  return tokens;
}

inline double parse_number(const std::string& tok, int line, const char* field) {
  double v = 0.0;
  const char* first = tok.data();
  if (!tok.empty() && tok[0] == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, tok.data() + tok.size(), v);
  if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v))
    throw MapParseError(line, std::string("field '") + field + "': expected a number, got '" + tok + "'");
  return v;
}

inline Region parse_region(const std::vector<std::string>& t, int line) {
  if (t.size() < 2) throw MapParseError(line, "'" + t[0] + "' needs 'rect' or 'disk'");
  if (t[1] == "rect") {
    if (t.size() != 6) throw MapParseError(line, "'" + t[0] + " rect' takes 4 numbers");
    return Rect{{parse_number(t[2], line, "xmin"), parse_number(t[3], line, "ymin")},
                {parse_number(t[4], line, "xmax"), parse_number(t[5], line, "ymax")}};
  }
  if (t[1] == "disk") {
    if (t.size() != 5) throw MapParseError(line, "'" + t[0] + " disk' takes 3 numbers");
    return Disk{{parse_number(t[2], line, "cx"), parse_number(t[3], line, "cy")}, parse_number(t[4], line, "r")};
  }
  throw MapParseError(line, "unknown region kind '" + t[1] + "'");
}

inline void parse_header(const std::vector<std::string>& t, int line, WorldMap& map) {
  // map { name : NAME , bounds : [ a , b , c , d ] }
  static const char* const shape[] = {"map", "{", "name", ":", nullptr, ",", "bounds", ":", "[", nullptr,
                                      ",",   nullptr, ",", nullptr, ",", nullptr, "]", "}"};
  constexpr std::size_t n = sizeof shape / sizeof shape[0];
  if (t.size() != n) throw MapParseError(line, "malformed map header; expected 'map { name: <id>, bounds: [xmin, ymin, xmax, ymax] }'");
  for (std::size_t i = 0; i < n; ++i) {
    if (shape[i] != nullptr && t[i] != shape[i])
      throw MapParseError(line, std::string("map header: expected '") + shape[i] + "', got '" + t[i] + "'");
  }
  map.name = t[4];
  map.bounds = {{parse_number(t[9], line, "xmin"), parse_number(t[11], line, "ymin")},
                {parse_number(t[13], line, "xmax"), parse_number(t[15], line, "ymax")}};
}

}  // namespace detail

/// Parses and validates a native map document.
inline WorldMap load_map(std::string_view document) {
  WorldMap map;
  bool have_header = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= document.size()) {
    const std::size_t eol = std::min(document.find('\n', pos), document.size());
    std::string_view line = document.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    const auto t = detail::tokenize_map_line(line);
    if (t.empty()) continue;
    const std::string& kw = t[0];
    if (kw == "map") {
      if (have_header) throw MapParseError(line_no, "duplicate map header");
      detail::parse_header(t, line_no, map);
      have_header = true;
      continue;
    }
    if (!have_header) throw MapParseError(line_no, "map header must come first");
    if (kw == "segment") {
      if (t.size() != 5) throw MapParseError(line_no, "'segment' takes 4 numbers");
      map.obstacles.emplace_back(Segment{{detail::parse_number(t[1], line_no, "x1"), detail::parse_number(t[2], line_no, "y1")},
                                         {detail::parse_number(t[3], line_no, "x2"), detail::parse_number(t[4], line_no, "y2")}});
    } else if (kw == "circle") {
      if (t.size() != 4) throw MapParseError(line_no, "'circle' takes 3 numbers");
      map.obstacles.emplace_back(Circle{{detail::parse_number(t[1], line_no, "cx"), detail::parse_number(t[2], line_no, "cy")},
                                        detail::parse_number(t[3], line_no, "r")});
    } else if (kw == "spawn") {
      map.spawn_regions.push_back(detail::parse_region(t, line_no));
    } else if (kw == "goal") {
      map.goal_regions.push_back(detail::parse_region(t, line_no));
    } else {
      throw MapParseError(line_no, "unknown keyword '" + kw + "'");
    }
  }
  if (!have_header) throw MapParseError(line_no, "missing map header");
  validate(map);
  return map;
}

/// Canonical serialization; doubles use the shortest round-trip form.
inline std::string save_map(const WorldMap& map) {
  using detail::format_double;
  std::ostringstream out;
  out << "map { name: " << map.name << ", bounds: [" << format_double(map.bounds.min.x) << ", "
      << format_double(map.bounds.min.y) << ", " << format_double(map.bounds.max.x) << ", "
      << format_double(map.bounds.max.y) << "] }\n";
  for (const auto& o : map.obstacles) {
    if (const auto* s = std::get_if<Segment>(&o)) {
      out << "segment " << format_double(s->a.x) << ' ' << format_double(s->a.y) << ' ' << format_double(s->b.x)
          << ' ' << format_double(s->b.y) << '\n';
    } else {
      const auto& c = std::get<Circle>(o);
      out << "circle " << format_double(c.center.x) << ' ' << format_double(c.center.y) << ' '
          << format_double(c.radius) << '\n';
    }
  }
  auto regions = [&](const char* kw, const std::vector<Region>& rs) {
    for (const auto& r : rs) {
      if (const auto* rect = std::get_if<Rect>(&r)) {
        out << kw << " rect " << format_double(rect->min.x) << ' ' << format_double(rect->min.y) << ' '
            << format_double(rect->max.x) << ' ' << format_double(rect->max.y) << '\n';
      } else {
        const auto& d = std::get<Disk>(r);
        out << kw << " disk " << format_double(d.center.x) << ' ' << format_double(d.center.y) << ' '
            << format_double(d.radius) << '\n';
      }
    }
  };
  regions("spawn", map.spawn_regions);
  regions("goal", map.goal_regions);
  return out.str();
}

// ---------------------------------------------------------------------------
// Sampling

inline constexpr int kMaxPoseRejections = 10000;

/// True when a robot disc of radius `clearance` centered at `p` stays inside
/// the bounds and off every obstacle.
inline bool has_clearance(const WorldMap& map, Vec2 p, double clearance) {
  const auto& b = map.bounds;
  if (p.x - b.min.x < clearance || b.max.x - p.x < clearance || p.y - b.min.y < clearance ||
      b.max.y - p.y < clearance)
    return false;
  for (const auto& o : map.obstacles) {
    const auto d = distance_to_obstacle(p, o);
    if (d.inside || d.distance < clearance) return false;
  }
  return true;
}

inline Vec2 sample_in_region(const Region& region, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  if (const auto* r = std::get_if<Rect>(&region)) {
    return {r->min.x + unit(rng) * (r->max.x - r->min.x), r->min.y + unit(rng) * (r->max.y - r->min.y)};
  }
  const auto& d = std::get<Disk>(region);
  const double rad = d.radius * std::sqrt(unit(rng));
  const double ang = 2.0 * std::numbers::pi * unit(rng);
  return {d.center.x + rad * std::cos(ang), d.center.y + rad * std::sin(ang)};
}

/// Rejection-samples a pose with the given clearance from a uniformly chosen
/// region. An optional predicate adds extra acceptance conditions.
template <class Accept>
Pose sample_free_pose(const WorldMap& map, std::span<const Region> regions, double clearance, Rng& rng,
                      Accept&& accept) {
  if (regions.empty()) throw InfeasibleRegionError("no regions to sample from");
  std::uniform_int_distribution<std::size_t> pick(0, regions.size() - 1);
  std::uniform_real_distribution<double> heading(-std::numbers::pi, std::numbers::pi);
  for (int attempt = 0; attempt < kMaxPoseRejections; ++attempt) {
    const Vec2 p = sample_in_region(regions[pick(rng)], rng);
    if (!has_clearance(map, p, clearance) || !accept(p)) continue;
    return {p, wrap_angle(heading(rng))};
  }
  throw InfeasibleRegionError("region infeasible: no free pose after " + std::to_string(kMaxPoseRejections) +
                              " samples in map '" + map.name + "'");
}

inline Pose sample_free_pose(const WorldMap& map, std::span<const Region> regions, double clearance, Rng& rng) {
  return sample_free_pose(map, regions, clearance, rng, [](Vec2) { return true; });
}

}  // namespace navgym
