#pragma once

#include <array>
#include <vector>

namespace coopfuse {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;
};

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
};

// Planar pose of a sensor frame in the world: translation plus heading.
// World point = R(yaw) * local point + (x, y).
struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double yaw = 0.0;
};

// 7-DoF upright box: center (x, y, z), width/length/height (y/x/z extents in
// the box frame before rotation), heading r about +z, radians in (-pi, pi].
struct BBox7 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  double w = 0.0;
  double l = 0.0;
  double h = 0.0;
  double r = 0.0;
};

// Convex polygon, counter-clockwise vertex order.
using Polygon2 = std::vector<Vec2>;

// Maps any finite angle to (-pi, pi]. Throws std::invalid_argument on
// non-finite input. Idempotent; adding multiples of 2*pi does not change
// the result beyond floating error.
double normalize_angle(double a);

// Smallest absolute angular difference, in [0, pi].
double angle_diff_abs(double a, double b);

bool box_valid(const BBox7& b);

// Throws std::invalid_argument when the box has non-finite fields,
// non-positive extents, or a heading outside (-pi, pi].
void validate_box(const BBox7& b, const char* what);

// BEV footprint corners, counter-clockwise.
std::array<Vec2, 4> box_corners(const BBox7& b);

double polygon_area(const Polygon2& poly);

// Sutherland-Hodgman clip of a convex subject against a convex clip polygon.
Polygon2 clip_convex(const Polygon2& subject, const Polygon2& clip);

// Area of intersection of the two BEV footprints.
double bev_intersection_area(const BBox7& a, const BBox7& b);

// BEV IoU of the rotated footprints, in [0, 1]. Exactly symmetric in its
// arguments. Throws std::invalid_argument on invalid boxes.
double bev_iou(const BBox7& a, const BBox7& b);

// 3D IoU: BEV intersection times vertical overlap over the volume union.
double iou_3d(const BBox7& a, const BBox7& b);

Vec2 transform_point(const Vec2& p, const Pose2& from, const Pose2& to);
Vec3 transform_point(const Vec3& p, const Pose2& from, const Pose2& to);

// Re-expresses points given in frame `from` in frame `to`. z is carried
// through unchanged for Vec3.
std::vector<Vec2> transform_points(const std::vector<Vec2>& pts, const Pose2& from, const Pose2& to);
std::vector<Vec3> transform_points(const std::vector<Vec3>& pts, const Pose2& from, const Pose2& to);

// Re-expresses a box given in frame `from` in frame `to`; extents are
// unchanged, heading is re-normalized.
BBox7 transform_box(const BBox7& b, const Pose2& from, const Pose2& to);

}  // namespace coopfuse
