#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <string>

#include <unistd.h>

#include "coopfuse/geometry.hpp"
#include "coopfuse/rng.hpp"

namespace coopfuse::testing {

// Self-cleaning unique directory under the system temp root.
struct TempDir {
  std::filesystem::path path;
  TempDir() {
    static int counter = 0;
    path = std::filesystem::temp_directory_path() /
           ("coopfuse_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path);
  }
  ~TempDir() { std::filesystem::remove_all(path); }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
};

inline BBox7 box(double x, double y, double w, double l, double r = 0.0, double z = 0.0,
                 double h = 1.0) {
  return BBox7{x, y, z, w, l, h, r};
}

inline bool inside_footprint(const BBox7& b, double px, double py) {
  double c = std::cos(b.r), s = std::sin(b.r);
  double dx = px - b.x, dy = py - b.y;
  double lx = c * dx + s * dy;
  double ly = -s * dx + c * dy;
  return std::fabs(lx) <= 0.5 * b.l && std::fabs(ly) <= 0.5 * b.w;
}

// Monte-Carlo BEV IoU: uniform samples over the joint bounding rectangle,
// IoU estimated as (hits in both) / (hits in either).
inline double mc_bev_iou(const BBox7& a, const BBox7& b, int samples, std::uint64_t seed) {
  double lo_x = 1e300, hi_x = -1e300, lo_y = 1e300, hi_y = -1e300;
  for (const BBox7* bx : {&a, &b}) {
    for (const Vec2& c : box_corners(*bx)) {
      lo_x = std::min(lo_x, c.x);
      hi_x = std::max(hi_x, c.x);
      lo_y = std::min(lo_y, c.y);
      hi_y = std::max(hi_y, c.y);
    }
  }
  Rng rng(seed);
  long long n_union = 0, n_inter = 0;
  for (int i = 0; i < samples; ++i) {
    double px = rng.uniform(lo_x, hi_x);
    double py = rng.uniform(lo_y, hi_y);
    bool in_a = inside_footprint(a, px, py);
    bool in_b = inside_footprint(b, px, py);
    if (in_a || in_b) ++n_union;
    if (in_a && in_b) ++n_inter;
  }
  if (n_union == 0) return 0.0;
  return static_cast<double>(n_inter) / static_cast<double>(n_union);
}

// Random box with sides in [1, 6] m, center within 6 m of the origin.
inline BBox7 random_box(Rng& rng) {
  BBox7 b;
  b.x = rng.uniform(-6.0, 6.0);
  b.y = rng.uniform(-6.0, 6.0);
  b.z = rng.uniform(-1.0, 1.0);
  b.w = rng.uniform(1.0, 6.0);
  b.l = rng.uniform(1.0, 6.0);
  b.h = rng.uniform(1.0, 3.0);
  b.r = rng.uniform(-3.14159, 3.14159);
  return b;
}

}  // namespace coopfuse::testing
