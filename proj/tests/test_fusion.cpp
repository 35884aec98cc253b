#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <sstream>

#include "navgym/fusion.hpp"

using namespace navgym;

namespace {

const ScannerSpec kLaser;
const std::string kData = std::string(NAVGYM_SOURCE_DIR) + "/tests/data/";

Scan read_scan_file(const std::string& path) {
  std::ifstream in(path);
  return read_scan(in, kLaser);
}

}  // namespace

TEST(Fusion, SinglePointLandsInCenterBin) {
  const Scan s = pointcloud_to_scan({{1.0, 0.0, 0.2}}, {}, kLaser);
  ASSERT_EQ(s.ranges.size(), 1081u);
  for (int j = 0; j < 1081; ++j) EXPECT_EQ(s.ranges[j], j == 540 ? 1.0 : 20.0) << j;
}

TEST(Fusion, PointAboveBandIgnored) {
  const Scan s = pointcloud_to_scan({{1.0, 0.0, 1.5}}, {}, kLaser);
  for (double r : s.ranges) EXPECT_EQ(r, 20.0);
}

TEST(Fusion, BinKeepsMinimum) {
  const Scan s = pointcloud_to_scan({{2.0, 0.0, 0.2}, {1.0, 0.0, 0.2}}, {}, kLaser);
  EXPECT_EQ(s.ranges[540], 1.0);
}

TEST(Fusion, OutsideCameraFovAndTooCloseIgnored) {
  const Scan s = pointcloud_to_scan({{0.0, 1.0, 0.2}, {0.1, 0.0, 0.2}, {-1.0, 0.0, 0.2}}, {}, kLaser);
  for (double r : s.ranges) EXPECT_EQ(r, 20.0);
}

TEST(Fusion, BearingBinsFollowGrid) {
  // 10 degrees left is 40 bins above center.
  const double a = deg_to_rad(10.0);
  const Scan s = pointcloud_to_scan({{2 * std::cos(a), 2 * std::sin(a), 0.1}}, {}, kLaser);
  EXPECT_NEAR(s.ranges[580], 2.0, 1e-12);
}

TEST(Fusion, PermutationInvariant) {
  Rng rng(4);
  std::uniform_real_distribution<double> u(-3, 3), z(0, 0.5);
  PointCloud c;
  for (int i = 0; i < 2000; ++i) c.push_back({u(rng), u(rng), z(rng)});
  const Scan a = pointcloud_to_scan(c, {}, kLaser);
  std::shuffle(c.begin(), c.end(), rng);
  EXPECT_EQ(pointcloud_to_scan(c, {}, kLaser), a);
}

TEST(Fusion, FuseIsMin) {
  const Scan a{{2.0, 1.0, 20.0}, 20.0}, b{{1.5, 3.0, 20.0}, 20.0};
  EXPECT_EQ(fuse_scans(a, b).ranges, (std::vector<double>{1.5, 1.0, 20.0}));
  EXPECT_EQ(fuse_scans(a, a), a);
}

TEST(Fusion, LengthMismatchThrows) {
  EXPECT_THROW(fuse_scans(Scan{{1.0}, 20}, Scan{{1.0, 2.0}, 20}), std::invalid_argument);
}

TEST(Fusion, NonFinitePointThrows) {
  EXPECT_THROW(pointcloud_to_scan({{NAN, 0, 0.1}}, {}, kLaser), std::invalid_argument);
}

TEST(Fusion, GoldenBoxBelowLaser) {
  const Scan laser = read_scan_file(kData + "room_laser.scan");
  std::ifstream cf(kData + "box_cloud.xyz");
  const PointCloud cloud = read_point_cloud(cf);
  const Scan golden = read_scan_file(kData + "box_fused.golden");
  const Scan fused = fuse_scans(laser, pointcloud_to_scan(cloud, {}, kLaser));
  int changed = 0;
  for (int j = 0; j < 1081; ++j) {
    ASSERT_NEAR(fused.ranges[j], golden.ranges[j], 1e-12) << j;
    changed += fused.ranges[j] < laser.ranges[j];
  }
  // the box is invisible to the laser alone
  EXPECT_TRUE(std::all_of(laser.ranges.begin(), laser.ranges.end(), [](double r) { return r == 3.0; }));
  EXPECT_EQ(changed, 62);
}

TEST(Fusion, ScanIoRoundTrip) {
  Scan s{std::vector<double>(1081, 20.0), 20.0};
  s.ranges[7] = 1.0 / 3.0;
  std::stringstream io;
  write_scan(io, s);
  EXPECT_EQ(read_scan(io, kLaser), s);
}

TEST(Fusion, ScanWithWrongLengthRejected) {
  std::istringstream in("1\n2\n3\n");
  EXPECT_THROW(read_scan(in, kLaser), std::runtime_error);
}

TEST(Fusion, CloudParseErrorNamesLine) {
  std::istringstream in("1 2 3\n# c\n1 2\n");
  try {
    read_point_cloud(in);
    FAIL();
  } catch (const std::runtime_error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
}
