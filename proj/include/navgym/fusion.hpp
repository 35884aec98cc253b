#pragma once

#include <array>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "navgym/geometry.hpp"

namespace navgym {

struct Point3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

/// Points in the robot body frame: x forward, y left, z up.
using PointCloud = std::vector<Point3>;

/// Depth camera footprint used to synthesize a planar scan from a cloud.
struct VirtualScanSpec {
  double fov_deg = 90.0;
  double z_min = 0.02;
  double z_max = 0.42;
  double min_depth = 0.2;

  void validate(const ScannerSpec& laser) const {
    if (!(fov_deg > 0.0 && fov_deg <= laser.fov_deg)) throw std::invalid_argument("virtual scan fov must be in (0, laser fov]");
    if (!(z_min < z_max)) throw std::invalid_argument("virtual scan height band needs z_min < z_max");
    if (!(min_depth >= 0.0)) throw std::invalid_argument("virtual scan min_depth must be >= 0");
  }
};

/// Projects the height-filtered cloud onto the laser's beam grid. Each bin
/// keeps the nearest planar range; empty bins and bins outside the camera's
/// field of view read max_range.
inline Scan pointcloud_to_scan(const PointCloud& cloud, const VirtualScanSpec& vspec, const ScannerSpec& laser) {
  vspec.validate(laser);
  Scan scan{std::vector<double>(static_cast<std::size_t>(laser.num_beams), laser.max_range), laser.max_range};
  const double half_cam = deg_to_rad(0.5 * vspec.fov_deg);
  const double half_laser = deg_to_rad(0.5 * laser.fov_deg);
  const double step = deg_to_rad(laser.angular_step_deg);
  for (const auto& p : cloud) {
    if (!(std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z)))
      throw std::invalid_argument("point cloud contains a non-finite coordinate");
    if (p.z < vspec.z_min || p.z > vspec.z_max) continue;
    const double range = std::hypot(p.x, p.y);
    if (range < vspec.min_depth) continue;
    const double bearing = std::atan2(p.y, p.x);
    if (std::abs(bearing) > half_cam) continue;
    const long bin = std::lround((bearing + half_laser) / step);
    if (bin < 0 || bin >= laser.num_beams) continue;
    auto& slot = scan.ranges[static_cast<std::size_t>(bin)];
    slot = std::min(slot, std::min(range, laser.max_range));
  }
  return scan;
}

/// Elementwise minimum of two scans on the same grid.
inline Scan fuse_scans(const Scan& laser, const Scan& virtual_scan) {
  if (laser.ranges.size() != virtual_scan.ranges.size())
    throw std::invalid_argument("fuse_scans: scan lengths differ (" + std::to_string(laser.ranges.size()) + " vs " +
                                std::to_string(virtual_scan.ranges.size()) + ")");
  Scan out = laser;
  for (std::size_t j = 0; j < out.ranges.size(); ++j) out.ranges[j] = std::min(laser.ranges[j], virtual_scan.ranges[j]);
  return out;
}

// ---------------------------------------------------------------------------
// Text I/O. Both formats are whitespace separated with '#' comments.

namespace detail {

inline std::vector<std::vector<double>> read_numeric_rows(std::istream& in, std::size_t width, const char* what) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
    std::istringstream ss(line);
    std::vector<double> row;
    std::string tok;
    while (ss >> tok) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(tok, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used != tok.size() || !std::isfinite(v))
        throw std::runtime_error(std::string(what) + " line " + std::to_string(line_no) + ": bad number '" + tok + "'");
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (row.size() != width)
      throw std::runtime_error(std::string(what) + " line " + std::to_string(line_no) + ": expected " +
                               std::to_string(width) + " value(s), got " + std::to_string(row.size()));
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace detail

/// One `x y z` triple per line, meters.
inline PointCloud read_point_cloud(std::istream& in) {
  PointCloud cloud;
  for (const auto& r : detail::read_numeric_rows(in, 3, "point cloud")) cloud.push_back({r[0], r[1], r[2]});
  return cloud;
}

/// One range per line; the line count must equal the scanner's beam count.
inline Scan read_scan(std::istream& in, const ScannerSpec& spec) {
  Scan scan{{}, spec.max_range};
  for (const auto& r : detail::read_numeric_rows(in, 1, "scan")) {
    if (r[0] < 0.0) throw std::runtime_error("scan: negative range");
    scan.ranges.push_back(std::min(r[0], spec.max_range));
  }
  if (static_cast<int>(scan.ranges.size()) != spec.num_beams)
    throw std::runtime_error("scan: expected " + std::to_string(spec.num_beams) + " ranges, got " +
                             std::to_string(scan.ranges.size()));
  return scan;
}

inline void write_scan(std::ostream& out, const Scan& scan) {
  char buf[64];
  for (double r : scan.ranges) {
    std::snprintf(buf, sizeof buf, "%.17g\n", r);
    out << buf;
  }
}

}  // namespace navgym
