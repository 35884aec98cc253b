#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

namespace navgym {

using Rng = std::mt19937_64;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  friend constexpr Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
  friend constexpr Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
  friend constexpr Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }
  friend constexpr bool operator==(Vec2, Vec2) = default;
};

inline constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }
inline bool is_finite(Vec2 a) { return std::isfinite(a.x) && std::isfinite(a.y); }

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double w = std::fmod(a + std::numbers::pi, two_pi);
  if (w < 0.0) w += two_pi;
  w -= std::numbers::pi;
  // fmod can land exactly on +pi after the shift for inputs like -pi - eps.
  if (w >= std::numbers::pi) w -= two_pi;
  return w;
}

inline constexpr double deg_to_rad(double d) { return d * std::numbers::pi / 180.0; }

struct Pose {
  Vec2 position;
  double heading = 0.0;  // radians, [-pi, pi)

  friend bool operator==(const Pose&, const Pose&) = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
  friend bool operator==(const Segment&, const Segment&) = default;
};

struct Circle {
  Vec2 center;
  double radius = 0.0;
  friend bool operator==(const Circle&, const Circle&) = default;
};

using Obstacle = std::variant<Segment, Circle>;

/// Throws std::invalid_argument when the obstacle breaks its invariants.
inline void validate(const Obstacle& obstacle) {
  if (const auto* s = std::get_if<Segment>(&obstacle)) {
    if (!is_finite(s->a) || !is_finite(s->b)) throw std::invalid_argument("segment endpoints must be finite");
    if (s->a == s->b) throw std::invalid_argument("segment endpoints must be distinct");
  } else {
    const auto& c = std::get<Circle>(obstacle);
    if (!is_finite(c.center) || !std::isfinite(c.radius)) throw std::invalid_argument("circle must be finite");
    if (!(c.radius > 0.0)) throw std::invalid_argument("radius > 0");
  }
}

/// Planar range finder parameters. Defaults match a Hokuyo UST-20LX.
struct ScannerSpec {
  int num_beams = 1081;
  double fov_deg = 270.0;
  double angular_step_deg = 0.25;
  double max_range = 20.0;
  double min_range = 0.06;
  double noise_sigma = 0.02;

  void validate() const {
    if (num_beams < 2) throw std::invalid_argument("scanner num_beams must be >= 2");
    if (std::abs((num_beams - 1) * angular_step_deg - fov_deg) > 1e-9)
      throw std::invalid_argument("scanner (num_beams - 1) * angular_step must equal fov");
    if (!(min_range >= 0.0 && min_range < max_range))
      throw std::invalid_argument("scanner requires 0 <= min_range < max_range");
    if (!(noise_sigma >= 0.0)) throw std::invalid_argument("scanner noise_sigma must be >= 0");
  }

  /// Bearing of beam `j` relative to the sensor heading, radians.
  double beam_bearing(int j) const { return deg_to_rad(-0.5 * fov_deg + j * angular_step_deg); }

  friend bool operator==(const ScannerSpec&, const ScannerSpec&) = default;
};

struct Scan {
  std::vector<double> ranges;
  double max_range = 20.0;

  friend bool operator==(const Scan&, const Scan&) = default;
};

// ---------------------------------------------------------------------------
// Single ray queries

/// Smallest t >= 0 with origin + t*direction on the circle boundary. Tangent
/// contact counts as a hit.
inline std::optional<double> ray_circle_intersect(Vec2 origin, Vec2 direction, const Circle& circle) {
  const double mx = origin.x - circle.center.x;
  const double my = origin.y - circle.center.y;
  const double c = mx * mx + my * my - circle.radius * circle.radius;
  const double b = mx * direction.x + my * direction.y;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  const double t0 = -b - sq;
  const double t1 = -b + sq;
  const double t = t0 >= 0.0 ? t0 : t1;
  if (t < 0.0) return std::nullopt;
  return t;
}

namespace detail {

// |cross(d, e)| <= kParallelTol * |e| means the ray and segment are parallel.
inline constexpr double kParallelTol = 1e-12;

inline std::optional<double> collinear_overlap(Vec2 origin, Vec2 direction, const Segment& s) {
  const Vec2 w = s.a - origin;
  if (std::abs(cross(w, direction)) > kParallelTol * std::max(1.0, norm(w))) return std::nullopt;
  const double ta = dot(s.a - origin, direction);
  const double tb = dot(s.b - origin, direction);
  const double lo = std::min(ta, tb);
  const double hi = std::max(ta, tb);
  if (hi < 0.0) return std::nullopt;
  return std::max(lo, 0.0);
}

}  // namespace detail

/// Smallest t >= 0 where the ray meets the closed segment. A collinear
/// overlap reports the nearest overlapped point.
inline std::optional<double> ray_segment_intersect(Vec2 origin, Vec2 direction, const Segment& segment) {
  const double wx = segment.a.x - origin.x;
  const double wy = segment.a.y - origin.y;
  const double ex = segment.b.x - segment.a.x;
  const double ey = segment.b.y - segment.a.y;
  const double denom = direction.x * ey - direction.y * ex;
  const double tol = detail::kParallelTol * std::sqrt(ex * ex + ey * ey);
  if (std::abs(denom) <= tol) return detail::collinear_overlap(origin, direction, segment);
  const double t = (wx * ey - wy * ex) / denom;
  const double u = (wx * direction.y - wy * direction.x) / denom;
  if (t >= 0.0 && u >= 0.0 && u <= 1.0) return t;
  return std::nullopt;
}

inline std::optional<double> ray_intersect(Vec2 origin, Vec2 direction, const Obstacle& obstacle) {
  return std::visit([&](const auto& o) {
    using T = std::decay_t<decltype(o)>;
    if constexpr (std::is_same_v<T, Segment>)
      return ray_segment_intersect(origin, direction, o);
    else
      return ray_circle_intersect(origin, direction, o);
  }, obstacle);
}

/// Distance from a point to the nearest boundary point of an obstacle.
/// `inside` is set only for points strictly inside a circle.
struct ObstacleDistance {
  double distance = 0.0;
  bool inside = false;
};

inline Vec2 closest_point_on_segment(Vec2 p, const Segment& s) {
  const Vec2 e = s.b - s.a;
  const double len2 = dot(e, e);
  double u = len2 > 0.0 ? dot(p - s.a, e) / len2 : 0.0;
  u = std::clamp(u, 0.0, 1.0);
  return s.a + u * e;
}

inline ObstacleDistance distance_to_obstacle(Vec2 point, const Obstacle& obstacle) {
  if (const auto* s = std::get_if<Segment>(&obstacle)) {
    return {norm(point - closest_point_on_segment(point, *s)), false};
  }
  const auto& c = std::get<Circle>(obstacle);
  const double d = norm(point - c.center);
  return {std::abs(d - c.radius), d < c.radius};
}

// ---------------------------------------------------------------------------
// Full scans

/// Unit beam directions relative to the sensor frame, cached per spec.
class BeamTable {
 public:
  BeamTable() = default;
  explicit BeamTable(const ScannerSpec& spec) : spec_(spec) {
    spec.validate();
    cos_.resize(spec.num_beams);
    sin_.resize(spec.num_beams);
    for (int j = 0; j < spec.num_beams; ++j) {
      const double a = spec.beam_bearing(j);
      cos_[j] = std::cos(a);
      sin_[j] = std::sin(a);
    }
  }

  const ScannerSpec& spec() const { return spec_; }
  int size() const { return spec_.num_beams; }

  /// World-frame beam directions for `heading`, written as separate x/y arrays.
  void directions(double heading, std::span<double> dx, std::span<double> dy) const {
    const double ch = std::cos(heading);
    const double sh = std::sin(heading);
    const std::size_t n = cos_.size();
    for (std::size_t j = 0; j < n; ++j) {
      dx[j] = ch * cos_[j] - sh * sin_[j];
      dy[j] = sh * cos_[j] + ch * sin_[j];
    }
  }

 private:
  ScannerSpec spec_;
  std::vector<double> cos_;
  std::vector<double> sin_;
};

namespace detail {

struct BeamScratch {
  std::vector<double> dx;
  std::vector<double> dy;
  void resize(std::size_t n) {
    dx.resize(n);
    dy.resize(n);
  }
};

inline BeamScratch& thread_scratch() {
  thread_local BeamScratch scratch;
  return scratch;
}

// Batched circle kernel: one obstacle against every beam.
inline void circle_kernel(double ox, double oy, const Circle& circle, const double* __restrict dx,
                          const double* __restrict dy, double* __restrict ranges, std::size_t n) {
  const double mx = ox - circle.center.x;
  const double my = oy - circle.center.y;
  const double c = mx * mx + my * my - circle.radius * circle.radius;
  for (std::size_t j = 0; j < n; ++j) {
    const double b = mx * dx[j] + my * dy[j];
    const double disc = b * b - c;
    const double sq = std::sqrt(disc >= 0.0 ? disc : 0.0);
    const double t0 = -b - sq;
    const double t1 = -b + sq;
    const double t = t0 >= 0.0 ? t0 : t1;
    const bool hit = disc >= 0.0 && t >= 0.0 && t < ranges[j];
    ranges[j] = hit ? t : ranges[j];
  }
}

// Batched segment kernel. Returns true when at least one beam was parallel to
// the segment; those lanes are left untouched for the scalar fallback.
inline bool segment_kernel(double ox, double oy, const Segment& s, const double* __restrict dx,
                           const double* __restrict dy, double* __restrict ranges, std::size_t n) {
  const double wx = s.a.x - ox;
  const double wy = s.a.y - oy;
  const double ex = s.b.x - s.a.x;
  const double ey = s.b.y - s.a.y;
  const double tol = kParallelTol * std::sqrt(ex * ex + ey * ey);
  const double num_t = wx * ey - wy * ex;
  int parallel = 0;
  for (std::size_t j = 0; j < n; ++j) {
    const double denom = dx[j] * ey - dy[j] * ex;
    const bool par = std::abs(denom) <= tol;
    const double safe = par ? 1.0 : denom;
    const double t = num_t / safe;
    const double u = (wx * dy[j] - wy * dx[j]) / safe;
    const bool hit = !par && t >= 0.0 && u >= 0.0 && u <= 1.0 && t < ranges[j];
    ranges[j] = hit ? t : ranges[j];
    parallel |= par;
  }
  return parallel != 0;
}

}  // namespace detail

/// Scalar reference: beams outer, obstacles inner.
inline Scan cast_scan_scalar(const Pose& pose, std::span<const Obstacle> obstacles, const BeamTable& beams) {
  const auto n = static_cast<std::size_t>(beams.size());
  auto& scratch = detail::thread_scratch();
  scratch.resize(n);
  beams.directions(pose.heading, scratch.dx, scratch.dy);
  Scan scan{std::vector<double>(n, beams.spec().max_range), beams.spec().max_range};
  for (std::size_t j = 0; j < n; ++j) {
    const Vec2 dir{scratch.dx[j], scratch.dy[j]};
    double best = scan.max_range;
    for (const auto& o : obstacles) {
      if (auto t = ray_intersect(pose.position, dir, o); t && *t < best) best = *t;
    }
    scan.ranges[j] = best;
  }
  return scan;
}

/// Batched path: obstacles outer, every beam evaluated together per obstacle.
inline Scan cast_scan(const Pose& pose, std::span<const Obstacle> obstacles, const BeamTable& beams) {
  const auto n = static_cast<std::size_t>(beams.size());
  auto& scratch = detail::thread_scratch();
  scratch.resize(n);
  beams.directions(pose.heading, scratch.dx, scratch.dy);
  Scan scan{std::vector<double>(n, beams.spec().max_range), beams.spec().max_range};
  const double ox = pose.position.x;
  const double oy = pose.position.y;
  const double* dx = scratch.dx.data();
  const double* dy = scratch.dy.data();
  double* r = scan.ranges.data();
  for (const auto& o : obstacles) {
    if (const auto* c = std::get_if<Circle>(&o)) {
      detail::circle_kernel(ox, oy, *c, dx, dy, r, n);
    } else {
      const auto& s = std::get<Segment>(o);
      if (detail::segment_kernel(ox, oy, s, dx, dy, r, n)) {
        const double tol = detail::kParallelTol * norm(s.b - s.a);
        for (std::size_t j = 0; j < n; ++j) {
          const double denom = dx[j] * (s.b.y - s.a.y) - dy[j] * (s.b.x - s.a.x);
          if (std::abs(denom) > tol) continue;
          if (auto t = detail::collinear_overlap(pose.position, {dx[j], dy[j]}, s); t && *t < r[j]) r[j] = *t;
        }
      }
    }
  }
  return scan;
}

inline Scan cast_scan(const Pose& pose, std::span<const Obstacle> obstacles, const ScannerSpec& spec) {
  return cast_scan(pose, obstacles, BeamTable(spec));
}

/// Adds independent N(0, sigma^2) noise per beam, then clamps into [0, max_range].
inline Scan apply_noise(Scan scan, double sigma, Rng& rng) {
  if (sigma < 0.0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0.0) return scan;
  std::normal_distribution<double> noise(0.0, sigma);
  for (auto& r : scan.ranges) r = std::clamp(r + noise(rng), 0.0, scan.max_range);
  return scan;
}

}  // namespace navgym
