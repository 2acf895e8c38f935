#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "coopfuse/geometry.hpp"

namespace coopfuse {

enum class LandmarkClass : std::uint8_t {
  kPole = 0,
  kWallFence = 1,
  kVehicleCenter = 2,
};

// BEV landmark used for relative localization correction.
struct LandmarkPoint {
  double x = 0.0;
  double y = 0.0;
  LandmarkClass cls = LandmarkClass::kPole;
};

struct ConsensusConfig {
  // Half-ranges of the translation / yaw search window.
  double search_x = 1.0;          // m
  double search_y = 1.0;          // m
  double search_yaw_deg = 6.0;    // deg
  // Grid step sizes.
  double res_xy = 1.0;            // m
  double res_yaw_deg = 1.0;       // deg
  // A pair matches when the transformed point lands within this distance of
  // an unconsumed same-class counterpart.
  double inlier_dist = 0.5;       // m
  // Minimum inlier count for a correction to count as confident.
  int min_consensus = 3;
};

// Rigid 2D correction applied to received content: rotate by dyaw about the
// receiver origin, then translate by (dx, dy).
struct RigidTransform2 {
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;
};

struct PoseCorrection {
  double dx = 0.0;
  double dy = 0.0;
  double dyaw = 0.0;
  int consensus = 0;
  // (ego index, coop index) inlier pairs at the winning candidate.
  std::vector<std::pair<int, int>> inliers;
  bool confident = false;
};

// Grid candidates (dx, dy, dyaw_rad) enumerated in deterministic order:
// dx outer, then dy, then dyaw, endpoints included.
std::vector<RigidTransform2> consensus_grid(const ConsensusConfig& cfg);

Vec2 apply_rigid(const Vec2& p, const RigidTransform2& t);
LandmarkPoint apply_rigid(const LandmarkPoint& p, const RigidTransform2& t);
BBox7 apply_rigid(const BBox7& b, const RigidTransform2& t);

// Exhaustive grid search maximizing the number of one-to-one, class-aware
// inlier pairs between ego landmarks and transformed coop landmarks. Ties
// prefer the smaller |dx|+|dy|+|dyaw|, then earlier enumeration order.
PoseCorrection max_consensus_search(const std::vector<LandmarkPoint>& ego,
                                    const std::vector<LandmarkPoint>& coop,
                                    const ConsensusConfig& cfg);

// Closed-form least-squares rigid alignment (2D Procrustes) of coop points
// onto ego points. Empty result when fewer than 2 pairs are given.
std::optional<RigidTransform2> refine_alignment(
    const std::vector<std::pair<Vec2, Vec2>>& ego_coop_pairs);

// Coarse consensus search followed by Procrustes refinement on the coarse
// inliers. Wall/fence pairs are excluded from the refinement step. Returns a
// non-confident identity correction when consensus stays below
// cfg.min_consensus.
PoseCorrection correct_cpm(const std::vector<LandmarkPoint>& ego,
                           const std::vector<LandmarkPoint>& coop,
                           const ConsensusConfig& cfg);

}  // namespace coopfuse
