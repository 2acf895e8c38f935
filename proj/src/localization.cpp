#include "coopfuse/localization.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace coopfuse {
namespace {

constexpr double kDegToRad = 3.141592653589793238462643383279502884 / 180.0;

void validate_cfg(const ConsensusConfig& cfg) {
  if (!(cfg.res_xy > 0.0) || !(cfg.res_yaw_deg > 0.0))
    throw std::invalid_argument("consensus: non-positive grid resolution");
  if (!(cfg.search_x >= 0.0) || !(cfg.search_y >= 0.0) || !(cfg.search_yaw_deg >= 0.0))
    throw std::invalid_argument("consensus: negative search window");
  if (!(cfg.inlier_dist > 0.0))
    throw std::invalid_argument("consensus: non-positive inlier_dist");
  if (cfg.min_consensus < 1)
    throw std::invalid_argument("consensus: min_consensus below 1");
}

void validate_landmarks(const std::vector<LandmarkPoint>& pts, const char* what) {
  for (const LandmarkPoint& p : pts)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw std::invalid_argument(std::string(what) + ": non-finite landmark");
}

int steps(double half_range, double res) {
  return static_cast<int>(std::floor(half_range / res + 1e-9));
}

}  // namespace

std::vector<RigidTransform2> consensus_grid(const ConsensusConfig& cfg) {
  validate_cfg(cfg);
  int nx = steps(cfg.search_x, cfg.res_xy);
  int ny = steps(cfg.search_y, cfg.res_xy);
  int nr = steps(cfg.search_yaw_deg, cfg.res_yaw_deg);
  std::vector<RigidTransform2> grid;
  grid.reserve(static_cast<std::size_t>(2 * nx + 1) * (2 * ny + 1) * (2 * nr + 1));
  for (int ix = -nx; ix <= nx; ++ix)
    for (int iy = -ny; iy <= ny; ++iy)
      for (int ir = -nr; ir <= nr; ++ir)
        grid.push_back(RigidTransform2{ix * cfg.res_xy, iy * cfg.res_xy,
                                       ir * cfg.res_yaw_deg * kDegToRad});
  return grid;
}

Vec2 apply_rigid(const Vec2& p, const RigidTransform2& t) {
  double c = std::cos(t.dyaw), s = std::sin(t.dyaw);
  return Vec2{c * p.x - s * p.y + t.dx, s * p.x + c * p.y + t.dy};
}

LandmarkPoint apply_rigid(const LandmarkPoint& p, const RigidTransform2& t) {
  Vec2 q = apply_rigid(Vec2{p.x, p.y}, t);
  return LandmarkPoint{q.x, q.y, p.cls};
}

BBox7 apply_rigid(const BBox7& b, const RigidTransform2& t) {
  Vec2 q = apply_rigid(Vec2{b.x, b.y}, t);
  BBox7 out = b;
  out.x = q.x;
  out.y = q.y;
  out.r = normalize_angle(b.r + t.dyaw);
  return out;
}

namespace {

// Greedy one-to-one matching: coop points in index order take the nearest
// unconsumed ego point of the same class within inlier_dist. The radius gets
// a relative guard so a pair sitting exactly on it survives rounding.
std::vector<std::pair<int, int>> match_inliers(const std::vector<LandmarkPoint>& ego,
                                               const std::vector<LandmarkPoint>& coop_t,
                                               double inlier_dist) {
  std::vector<std::pair<int, int>> pairs;
  std::vector<bool> consumed(ego.size(), false);
  double d2_max = inlier_dist * inlier_dist * (1.0 + 1e-9);
  for (std::size_t j = 0; j < coop_t.size(); ++j) {
    int best = -1;
    double best_d2 = d2_max;
    for (std::size_t i = 0; i < ego.size(); ++i) {
      if (consumed[i] || ego[i].cls != coop_t[j].cls) continue;
      double dx = ego[i].x - coop_t[j].x;
      double dy = ego[i].y - coop_t[j].y;
      double d2 = dx * dx + dy * dy;
      if (d2 <= best_d2) {
        best_d2 = d2;
        best = static_cast<int>(i);
      }
    }
    if (best >= 0) {
      consumed[static_cast<std::size_t>(best)] = true;
      pairs.emplace_back(best, static_cast<int>(j));
    }
  }
  return pairs;
}

}  // namespace

PoseCorrection max_consensus_search(const std::vector<LandmarkPoint>& ego,
                                    const std::vector<LandmarkPoint>& coop,
                                    const ConsensusConfig& cfg) {
  validate_landmarks(ego, "max_consensus_search");
  validate_landmarks(coop, "max_consensus_search");
  std::vector<RigidTransform2> grid = consensus_grid(cfg);

  PoseCorrection best;
  double best_cost = std::numeric_limits<double>::infinity();
  std::vector<LandmarkPoint> moved(coop.size());
  for (const RigidTransform2& t : grid) {
    for (std::size_t j = 0; j < coop.size(); ++j) moved[j] = apply_rigid(coop[j], t);
    std::vector<std::pair<int, int>> pairs = match_inliers(ego, moved, cfg.inlier_dist);
    double cost = std::fabs(t.dx) + std::fabs(t.dy) + std::fabs(t.dyaw);
    int count = static_cast<int>(pairs.size());
    if (count > best.consensus || (count == best.consensus && cost < best_cost)) {
      best.dx = t.dx;
      best.dy = t.dy;
      best.dyaw = t.dyaw;
      best.consensus = count;
      best.inliers = std::move(pairs);
      best_cost = cost;
    }
  }
  best.confident = best.consensus >= cfg.min_consensus;
  return best;
}

std::optional<RigidTransform2> refine_alignment(
    const std::vector<std::pair<Vec2, Vec2>>& ego_coop_pairs) {
  if (ego_coop_pairs.size() < 2) return std::nullopt;
  double n = static_cast<double>(ego_coop_pairs.size());
  Vec2 ce{}, cc{};
  for (const auto& [e, c] : ego_coop_pairs) {
    if (!std::isfinite(e.x) || !std::isfinite(e.y) || !std::isfinite(c.x) || !std::isfinite(c.y))
      throw std::invalid_argument("refine_alignment: non-finite pair");
    ce.x += e.x;
    ce.y += e.y;
    cc.x += c.x;
    cc.y += c.y;
  }
  ce.x /= n;
  ce.y /= n;
  cc.x /= n;
  cc.y /= n;

  double dot = 0.0, crs = 0.0;
  for (const auto& [e, c] : ego_coop_pairs) {
    double ex = e.x - ce.x, ey = e.y - ce.y;
    double cx = c.x - cc.x, cy = c.y - cc.y;
    dot += cx * ex + cy * ey;
    crs += cx * ey - cy * ex;
  }
  double dyaw = std::atan2(crs, dot);
  double co = std::cos(dyaw), si = std::sin(dyaw);
  return RigidTransform2{ce.x - (co * cc.x - si * cc.y), ce.y - (si * cc.x + co * cc.y), dyaw};
}

PoseCorrection correct_cpm(const std::vector<LandmarkPoint>& ego,
                           const std::vector<LandmarkPoint>& coop,
                           const ConsensusConfig& cfg) {
  PoseCorrection coarse = max_consensus_search(ego, coop, cfg);
  if (!coarse.confident) {
    PoseCorrection out;
    out.consensus = coarse.consensus;
    out.inliers = std::move(coarse.inliers);
    return out;
  }

  // Wall/fence points lie on extended structures; their lateral match error
  // is unbounded, so they are kept out of the least-squares step.
  std::vector<std::pair<Vec2, Vec2>> pairs;
  for (const auto& [ei, cj] : coarse.inliers) {
    const LandmarkPoint& e = ego[static_cast<std::size_t>(ei)];
    const LandmarkPoint& c = coop[static_cast<std::size_t>(cj)];
    if (e.cls == LandmarkClass::kWallFence) continue;
    pairs.emplace_back(Vec2{e.x, e.y}, Vec2{c.x, c.y});
  }
  std::optional<RigidTransform2> fine = refine_alignment(pairs);
  if (!fine) return coarse;

  PoseCorrection out = coarse;
  out.dx = fine->dx;
  out.dy = fine->dy;
  out.dyaw = fine->dyaw;
  return out;
}

}  // namespace coopfuse
