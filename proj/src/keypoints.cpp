#include "coopfuse/keypoints.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "coopfuse/rng.hpp"

namespace coopfuse {
namespace {

template <typename P>
double dist2(const P& a, const P& b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  double d = dx * dx + dy * dy;
  if constexpr (requires { a.z; }) {
    double dz = a.z - b.z;
    d += dz * dz;
  }
  return d;
}

template <typename P>
std::vector<int> fps_impl(const std::vector<P>& pts, int n) {
  if (n < 0) throw std::invalid_argument("fps_sample: negative sample count");
  if (n == 0) return {};
  if (pts.empty()) throw std::invalid_argument("fps_sample: empty point cloud");
  std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(n), pts.size());

  P centroid{};
  for (const P& p : pts) {
    centroid.x += p.x;
    centroid.y += p.y;
    if constexpr (requires { p.z; }) centroid.z += p.z;
  }
  double inv = 1.0 / static_cast<double>(pts.size());
  centroid.x *= inv;
  centroid.y *= inv;
  if constexpr (requires { centroid.z; }) centroid.z *= inv;

  std::size_t first = 0;
  double best = -1.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d = dist2(pts[i], centroid);
    if (d > best) {
      best = d;
      first = i;
    }
  }

  std::vector<int> picked;
  picked.reserve(count);
  std::vector<double> min_d2(pts.size(), std::numeric_limits<double>::infinity());
  std::size_t cur = first;
  for (std::size_t k = 0; k < count; ++k) {
    picked.push_back(static_cast<int>(cur));
    std::size_t next = 0;
    double far = -1.0;
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double d = dist2(pts[i], pts[cur]);
      if (d < min_d2[i]) min_d2[i] = d;
      if (min_d2[i] > far) {
        far = min_d2[i];
        next = i;
      }
    }
    cur = next;
  }
  return picked;
}

}  // namespace

std::vector<int> fps_sample(const std::vector<Vec3>& pts, int n) { return fps_impl(pts, n); }
std::vector<int> fps_sample(const std::vector<Vec2>& pts, int n) { return fps_impl(pts, n); }

std::vector<int> points_in_boxes(const std::vector<Vec3>& pts, const std::vector<BBox7>& boxes) {
  constexpr double eps = 1e-9;
  for (const BBox7& b : boxes) validate_box(b, "points_in_boxes");
  std::vector<int> out(pts.size(), -1);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const Vec3& p = pts[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z))
      throw std::invalid_argument("points_in_boxes: non-finite point");
    for (std::size_t j = 0; j < boxes.size(); ++j) {
      const BBox7& b = boxes[j];
      double c = std::cos(b.r), s = std::sin(b.r);
      double dx = p.x - b.x, dy = p.y - b.y;
      double lx = c * dx + s * dy;
      double ly = -s * dx + c * dy;
      if (std::fabs(lx) <= 0.5 * b.l + eps && std::fabs(ly) <= 0.5 * b.w + eps &&
          std::fabs(p.z - b.z) <= 0.5 * b.h + eps) {
        out[i] = static_cast<int>(j);
        break;
      }
    }
  }
  return out;
}

namespace {

std::vector<LandmarkPoint> cap_class(const std::vector<LandmarkPoint>& pts, int cap) {
  if (cap < 0) throw std::invalid_argument("select_correction_points: negative budget");
  if (static_cast<std::size_t>(cap) >= pts.size()) return pts;
  std::vector<Vec2> coords;
  coords.reserve(pts.size());
  for (const LandmarkPoint& p : pts) coords.push_back(Vec2{p.x, p.y});
  std::vector<int> idx = fps_sample(coords, cap);
  std::sort(idx.begin(), idx.end());
  std::vector<LandmarkPoint> out;
  out.reserve(idx.size());
  for (int i : idx) out.push_back(pts[static_cast<std::size_t>(i)]);
  return out;
}

}  // namespace

std::vector<LandmarkPoint> select_correction_points(const std::vector<LandmarkPoint>& landmarks,
                                                    int k_p, int k_fw) {
  std::vector<LandmarkPoint> poles, walls, centers;
  for (const LandmarkPoint& p : landmarks) {
    switch (p.cls) {
      case LandmarkClass::kPole: poles.push_back(p); break;
      case LandmarkClass::kWallFence: walls.push_back(p); break;
      case LandmarkClass::kVehicleCenter: centers.push_back(p); break;
    }
  }
  std::vector<LandmarkPoint> out;
  if (!poles.empty()) {
    std::vector<LandmarkPoint> kept = cap_class(poles, k_p);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  if (!walls.empty()) {
    std::vector<LandmarkPoint> kept = cap_class(walls, k_fw);
    out.insert(out.end(), kept.begin(), kept.end());
  }
  out.insert(out.end(), centers.begin(), centers.end());
  return out;
}

std::vector<float> synthesize_features(const std::vector<Vec3>& coords, int n_ch,
                                       std::uint64_t seed) {
  if (n_ch < 0) throw std::invalid_argument("synthesize_features: negative channel count");
  std::vector<float> feats;
  feats.reserve(coords.size() * static_cast<std::size_t>(n_ch));
  for (const Vec3& p : coords) {
    std::uint64_t h = mix_seed(seed, static_cast<std::uint64_t>(std::llround(p.x * 100.0)));
    h = mix_seed(h, static_cast<std::uint64_t>(std::llround(p.y * 100.0)));
    h = mix_seed(h, static_cast<std::uint64_t>(std::llround(p.z * 100.0)));
    for (int c = 0; c < n_ch; ++c) {
      std::uint64_t v = mix_seed(h, static_cast<std::uint64_t>(c));
      feats.push_back(static_cast<float>(std::ldexp(static_cast<double>(v >> 11), -53)));
    }
  }
  return feats;
}

}  // namespace coopfuse
