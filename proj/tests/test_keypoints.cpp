#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>
#include <vector>

#include "coopfuse/keypoints.hpp"
#include "coopfuse/rng.hpp"
#include "support.hpp"

using namespace coopfuse;
using coopfuse::testing::box;

namespace {

double min_pairwise(const std::vector<Vec2>& pts, const std::vector<int>& idx) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < idx.size(); ++i)
    for (std::size_t j = i + 1; j < idx.size(); ++j) {
      const Vec2& a = pts[static_cast<std::size_t>(idx[i])];
      const Vec2& b = pts[static_cast<std::size_t>(idx[j])];
      best = std::min(best, std::hypot(a.x - b.x, a.y - b.y));
    }
  return best;
}

}  // namespace

TEST_CASE("fps_sample basics") {
  std::vector<Vec2> pts{{0, 0}, {1, 0}, {4, 0}};

  // n covering the cloud returns every index
  auto all = fps_sample(pts, 3);
  CHECK(std::set<int>(all.begin(), all.end()) == std::set<int>{0, 1, 2});
  CHECK(fps_sample(pts, 10).size() == 3);

  // n = 1 picks the point farthest from the centroid
  auto one = fps_sample(pts, 1);
  REQUIRE(one.size() == 1);
  CHECK(one[0] == 2);

  CHECK(fps_sample(pts, 0).empty());
  CHECK_THROWS_AS(fps_sample(std::vector<Vec2>{}, 1), std::invalid_argument);
  CHECK_THROWS_AS(fps_sample(pts, -1), std::invalid_argument);
}

TEST_CASE("fps_sample of a square picks a diagonal") {
  std::vector<Vec2> corners{{0, 0}, {1, 0}, {1, 1}, {0, 1}};
  auto idx = fps_sample(corners, 2);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == 0);
  CHECK(idx[1] == 2);
}

TEST_CASE("fps_sample indices are distinct") {
  Rng rng(61);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<Vec3> pts;
    for (int i = 0; i < 40; ++i)
      pts.push_back(Vec3{rng.uniform(-5, 5), rng.uniform(-5, 5), rng.uniform(-1, 1)});
    auto idx = fps_sample(pts, 12);
    CHECK(idx.size() == 12);
    CHECK(std::set<int>(idx.begin(), idx.end()).size() == idx.size());
  }
}

TEST_CASE("fps_sample spreads better than random subsets") {
  Rng rng(62);
  std::vector<double> fps_d, rand_d;
  for (int cloud = 0; cloud < 100; ++cloud) {
    std::vector<Vec2> pts;
    for (int i = 0; i < 60; ++i) pts.push_back(Vec2{rng.uniform(0, 20), rng.uniform(0, 20)});
    fps_d.push_back(min_pairwise(pts, fps_sample(pts, 8)));

    std::vector<int> idx(pts.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (std::size_t i = 0; i < 8; ++i)
      std::swap(idx[i], idx[i + rng.uniform_int(idx.size() - i)]);
    rand_d.push_back(min_pairwise(pts, std::vector<int>(idx.begin(), idx.begin() + 8)));
  }
  std::sort(fps_d.begin(), fps_d.end());
  std::sort(rand_d.begin(), rand_d.end());
  CHECK(fps_d[50] >= rand_d[50]);
}

TEST_CASE("points_in_boxes containment rules") {
  std::vector<BBox7> boxes{box(0, 0, 1, 1, 0.0, 0.0, 1.0)};
  std::vector<Vec3> pts{
      {0.0, 0.0, 0.0},   // center
      {2.0, 0.0, 0.0},   // 2 lengths away along the axis
      {0.5, 0.0, 0.0},   // on the footprint edge
      {0.0, 0.0, 0.5},   // on the top face
      {0.0, 0.0, 0.7},   // above the box
  };
  auto hit = points_in_boxes(pts, boxes);
  CHECK(hit == std::vector<int>{0, -1, 0, 0, -1});
}

TEST_CASE("points_in_boxes reports the first containing box") {
  std::vector<BBox7> boxes{box(0, 0, 2, 2), box(0.5, 0, 2, 2)};
  auto hit = points_in_boxes({{0.5, 0.0, 0.0}}, boxes);
  CHECK(hit == std::vector<int>{0});
}

TEST_CASE("points_in_boxes invariant under a shared rigid transform") {
  Rng rng(63);
  Pose2 origin{};
  for (int trial = 0; trial < 20; ++trial) {
    Pose2 to{rng.uniform(-10, 10), rng.uniform(-10, 10), normalize_angle(rng.uniform(-3, 3))};
    std::vector<BBox7> boxes;
    for (int i = 0; i < 3; ++i)
      boxes.push_back(box(rng.uniform(-8, 8), rng.uniform(-8, 8), rng.uniform(1, 3),
                          rng.uniform(2, 5), normalize_angle(rng.uniform(-3, 3)), 0.0, 2.0));
    std::vector<Vec3> pts;
    for (int i = 0; i < 50; ++i)
      pts.push_back(Vec3{rng.uniform(-10, 10), rng.uniform(-10, 10), rng.uniform(-0.8, 0.8)});

    std::vector<BBox7> moved_boxes;
    for (const BBox7& b : boxes) moved_boxes.push_back(transform_box(b, origin, to));
    std::vector<Vec3> moved_pts = transform_points(pts, origin, to);

    CHECK(points_in_boxes(pts, boxes) == points_in_boxes(moved_pts, moved_boxes));
  }
}

TEST_CASE("select_correction_points keeps small classes intact") {
  std::vector<LandmarkPoint> lms{{0, 0, LandmarkClass::kPole},
                                 {1, 0, LandmarkClass::kPole},
                                 {5, 5, LandmarkClass::kVehicleCenter}};
  auto out = select_correction_points(lms, 16, 32);
  REQUIRE(out.size() == 3);
  CHECK(out[0].x == 0.0);
  CHECK(out[1].x == 1.0);
  CHECK(out[2].cls == LandmarkClass::kVehicleCenter);

  CHECK(select_correction_points({}, 16, 32).empty());
}

TEST_CASE("select_correction_points reduces a fence line to its endpoints") {
  std::vector<LandmarkPoint> fence;
  for (int i = 0; i < 100; ++i)
    fence.push_back(LandmarkPoint{0.1 * i, 0.0, LandmarkClass::kWallFence});
  auto out = select_correction_points(fence, 16, 2);
  REQUIRE(out.size() == 2);
  CHECK(out[0].x == doctest::Approx(0.0));
  CHECK(out[1].x == doctest::Approx(9.9));
}

TEST_CASE("select_correction_points caps poles and walls independently") {
  Rng rng(64);
  std::vector<LandmarkPoint> lms;
  for (int i = 0; i < 30; ++i)
    lms.push_back(LandmarkPoint{rng.uniform(-20, 20), rng.uniform(-20, 20),
                                LandmarkClass::kPole});
  for (int i = 0; i < 50; ++i)
    lms.push_back(LandmarkPoint{rng.uniform(-20, 20), rng.uniform(-20, 20),
                                LandmarkClass::kWallFence});
  for (int i = 0; i < 5; ++i)
    lms.push_back(LandmarkPoint{rng.uniform(-20, 20), rng.uniform(-20, 20),
                                LandmarkClass::kVehicleCenter});
  auto out = select_correction_points(lms, 16, 32);
  int poles = 0, walls = 0, centers = 0;
  for (const LandmarkPoint& p : out) {
    if (p.cls == LandmarkClass::kPole) ++poles;
    if (p.cls == LandmarkClass::kWallFence) ++walls;
    if (p.cls == LandmarkClass::kVehicleCenter) ++centers;
  }
  CHECK(poles == 16);
  CHECK(walls == 32);
  CHECK(centers == 5);
}

TEST_CASE("synthesize_features deterministic and bounded") {
  std::vector<Vec3> pts{{1.0, 2.0, 0.5}, {-3.0, 0.25, 1.0}};
  auto a = synthesize_features(pts, 32, 99);
  auto b = synthesize_features(pts, 32, 99);
  CHECK(a == b);
  CHECK(a.size() == 64);
  for (float v : a) {
    CHECK(v >= 0.0f);
    CHECK(v < 1.0f);
  }
  CHECK(synthesize_features(pts, 32, 100) != a);
}
