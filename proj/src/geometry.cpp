#include "coopfuse/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <tuple>

namespace coopfuse {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kTwoPi = 2.0 * kPi;
// Clip tolerance, metres: points this far outside an edge still count as
// inside, so shared edges do not flicker.
constexpr double kClipEps = 1e-9;
constexpr double kAreaEps = 1e-12;

double cross(const Vec2& o, const Vec2& a, const Vec2& b) {
  return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
}

bool finite(double v) { return std::isfinite(v); }

auto box_key(const BBox7& b) {
  return std::tie(b.x, b.y, b.z, b.w, b.l, b.h, b.r);
}

}  // namespace

double normalize_angle(double a) {
  if (!finite(a)) throw std::invalid_argument("normalize_angle: non-finite angle");
  double r = std::fmod(a + kPi, kTwoPi);
  if (r <= 0.0) r += kTwoPi;
  return r - kPi;
}

double angle_diff_abs(double a, double b) {
  double d = std::fabs(normalize_angle(a) - normalize_angle(b));
  return d > kPi ? kTwoPi - d : d;
}

bool box_valid(const BBox7& b) {
  for (double v : {b.x, b.y, b.z, b.w, b.l, b.h, b.r})
    if (!finite(v)) return false;
  if (b.w <= 0.0 || b.l <= 0.0 || b.h <= 0.0) return false;
  return b.r > -kPi - 1e-12 && b.r <= kPi + 1e-12;
}

void validate_box(const BBox7& b, const char* what) {
  if (!box_valid(b)) throw std::invalid_argument(std::string(what) + ": invalid box");
}

std::array<Vec2, 4> box_corners(const BBox7& b) {
  double c = std::cos(b.r), s = std::sin(b.r);
  double hl = 0.5 * b.l, hw = 0.5 * b.w;
  auto at = [&](double lx, double ly) {
    return Vec2{b.x + c * lx - s * ly, b.y + s * lx + c * ly};
  };
  return {at(hl, hw), at(-hl, hw), at(-hl, -hw), at(hl, -hw)};
}

double polygon_area(const Polygon2& poly) {
  if (poly.size() < 3) return 0.0;
  double a = 0.0;
  for (std::size_t i = 0, n = poly.size(); i < n; ++i) {
    const Vec2& p = poly[i];
    const Vec2& q = poly[(i + 1) % n];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * std::fabs(a);
}

Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip) {
  Polygon2 out = subject;
  std::size_t nc = clip.size();
  for (std::size_t i = 0; i < nc && !out.empty(); ++i) {
    const Vec2& a = clip[i];
    const Vec2& b = clip[(i + 1) % nc];
    double len = std::hypot(b.x - a.x, b.y - a.y);
    if (len < kAreaEps) continue;
    Polygon2 in;
    in.swap(out);
    std::size_t n = in.size();
    for (std::size_t j = 0; j < n; ++j) {
      const Vec2& p = in[j];
      const Vec2& q = in[(j + 1) % n];
      double dp = cross(a, b, p) / len;
      double dq = cross(a, b, q) / len;
      bool pin = dp >= -kClipEps;
      bool qin = dq >= -kClipEps;
      if (pin) out.push_back(p);
      if (pin != qin) {
        double t = dp / (dp - dq);
        out.push_back(Vec2{p.x + t * (q.x - p.x), p.y + t * (q.y - p.y)});
      }
    }
  }
  return out;
}

double bev_intersection_area(const BBox7& a, const BBox7& b) {
  auto ca = box_corners(a);
  auto cb = box_corners(b);
  Polygon2 pa(ca.begin(), ca.end());
  Polygon2 pb(cb.begin(), cb.end());
  double area = polygon_area(clip_convex(pa, pb));
  return area < kAreaEps ? 0.0 : area;
}

double bev_iou(const BBox7& a, const BBox7& b) {
  validate_box(a, "bev_iou");
  validate_box(b, "bev_iou");
  // Canonical argument order makes the result exactly symmetric.
  const BBox7* lo = &a;
  const BBox7* hi = &b;
  if (box_key(b) < box_key(a)) std::swap(lo, hi);
  double inter = bev_intersection_area(*lo, *hi);
  double uni = lo->w * lo->l + hi->w * hi->l - inter;
  if (uni <= kAreaEps) return 0.0;
  double iou = inter / uni;
  return std::clamp(iou, 0.0, 1.0);
}

double iou_3d(const BBox7& a, const BBox7& b) {
  validate_box(a, "iou_3d");
  validate_box(b, "iou_3d");
  const BBox7* lo = &a;
  const BBox7* hi = &b;
  if (box_key(b) < box_key(a)) std::swap(lo, hi);
  double zlo = std::max(lo->z - 0.5 * lo->h, hi->z - 0.5 * hi->h);
  double zhi = std::min(lo->z + 0.5 * lo->h, hi->z + 0.5 * hi->h);
  double dz = zhi - zlo;
  if (dz <= 0.0) return 0.0;
  double inter = bev_intersection_area(*lo, *hi) * dz;
  double uni = lo->w * lo->l * lo->h + hi->w * hi->l * hi->h - inter;
  if (uni <= kAreaEps) return 0.0;
  return std::clamp(inter / uni, 0.0, 1.0);
}

namespace {

struct Rigid2 {
  double c, s, tx, ty;
};

// Composition to_frame^-1 * from_frame.
Rigid2 relative(const Pose2& from, const Pose2& to) {
  for (double v : {from.x, from.y, from.yaw, to.x, to.y, to.yaw})
    if (!finite(v)) throw std::invalid_argument("transform: non-finite pose");
  double dyaw = from.yaw - to.yaw;
  double c = std::cos(dyaw), s = std::sin(dyaw);
  double ct = std::cos(to.yaw), st = std::sin(to.yaw);
  double dx = from.x - to.x, dy = from.y - to.y;
  return Rigid2{c, s, ct * dx + st * dy, -st * dx + ct * dy};
}

}  // namespace

Vec2 transform_point(const Vec2& p, const Pose2& from, const Pose2& to) {
  if (!finite(p.x) || !finite(p.y)) throw std::invalid_argument("transform_point: non-finite point");
  Rigid2 t = relative(from, to);
  return Vec2{t.c * p.x - t.s * p.y + t.tx, t.s * p.x + t.c * p.y + t.ty};
}

Vec3 transform_point(const Vec3& p, const Pose2& from, const Pose2& to) {
  Vec2 q = transform_point(Vec2{p.x, p.y}, from, to);
  if (!finite(p.z)) throw std::invalid_argument("transform_point: non-finite point");
  return Vec3{q.x, q.y, p.z};
}

std::vector<Vec2> transform_points(const std::vector<Vec2>& pts, const Pose2& from, const Pose2& to) {
  std::vector<Vec2> out;
  out.reserve(pts.size());
  for (const Vec2& p : pts) out.push_back(transform_point(p, from, to));
  return out;
}

std::vector<Vec3> transform_points(const std::vector<Vec3>& pts, const Pose2& from, const Pose2& to) {
  std::vector<Vec3> out;
  out.reserve(pts.size());
  for (const Vec3& p : pts) out.push_back(transform_point(p, from, to));
  return out;
}

BBox7 transform_box(const BBox7& b, const Pose2& from, const Pose2& to) {
  validate_box(b, "transform_box");
  Vec2 c = transform_point(Vec2{b.x, b.y}, from, to);
  BBox7 out = b;
  out.x = c.x;
  out.y = c.y;
  out.r = normalize_angle(b.r + from.yaw - to.yaw);
  return out;
}

}  // namespace coopfuse
