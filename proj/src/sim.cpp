#include "coopfuse/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "coopfuse/rng.hpp"

namespace coopfuse {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;
constexpr double kDegToRad = kPi / 180.0;
constexpr Pose2 kWorld{};

// Substream tags so draws stay independent of call order.
enum : std::uint64_t {
  kStreamPlace = 1,
  kStreamSense = 2,
  kStreamCoop = 3,
  kStreamLoc = 4,
  kStreamSurface = 5,
  kStreamFeature = 6,
};

void validate_sim_config(const SimConfig& cfg) {
  auto bad = [](const char* field) {
    throw std::invalid_argument(std::string("sim config: invalid ") + field);
  };
  if (cfg.n_vehicles < 1) bad("n_vehicles");
  if (cfg.n_cavs < 1 || cfg.n_cavs > cfg.n_vehicles) bad("n_cavs");
  if (!(cfg.map_extent > 0.0)) bad("map_extent");
  if (!(cfg.street_spacing > 0.0)) bad("street_spacing");
  if (!(cfg.lane_offset >= 0.0)) bad("lane_offset");
  if (!(cfg.dim_w > 0.0) || !(cfg.dim_l > 0.0) || !(cfg.dim_h > 0.0)) bad("anchor dims");
  if (!(cfg.dim_jitter >= 0.0) || cfg.dim_jitter >= 1.0) bad("dim_jitter");
  if (!(cfg.comm_range > 0.0)) bad("comm_range");
  if (!(cfg.det_range > 0.0)) bad("det_range");
  if (cfg.max_coop < 0) bad("max_coop");
  if (!(cfg.pole_density >= 0.0)) bad("pole_density");
  if (cfg.wall_count < 0) bad("wall_count");
  if (!(cfg.wall_point_spacing > 0.0)) bad("wall_point_spacing");
  if (cfg.surface_points_per_vehicle < 0) bad("surface_points_per_vehicle");
  if (!(cfg.loc_sigma_xy >= 0.0)) bad("loc_sigma_xy");
  if (!(cfg.loc_sigma_yaw_deg >= 0.0)) bad("loc_sigma_yaw_deg");
}

double dist2d(double ax, double ay, double bx, double by) {
  return std::hypot(ax - bx, ay - by);
}

// Overlap test with a safety margin so placed vehicles keep daylight
// between them.
bool placement_collides(const BBox7& cand, const std::vector<BBox7>& placed) {
  BBox7 grown = cand;
  grown.l += 1.2;
  grown.w += 0.6;
  for (const BBox7& other : placed) {
    if (dist2d(cand.x, cand.y, other.x, other.y) > 8.0) continue;
    BBox7 g2 = other;
    g2.l += 1.2;
    g2.w += 0.6;
    if (bev_intersection_area(grown, g2) > 0.0) return true;
  }
  return false;
}

std::vector<BBox7> place_vehicles(const SimConfig& cfg, Rng& rng) {
  const double half = 0.5 * cfg.map_extent;
  const int max_street = static_cast<int>(std::floor(half / cfg.street_spacing));
  const int n_streets = 2 * max_street + 1;
  std::vector<BBox7> placed;
  placed.reserve(static_cast<std::size_t>(cfg.n_vehicles));
  const long long budget = 300ll * cfg.n_vehicles;
  for (long long attempt = 0; attempt < budget && placed.size() < static_cast<std::size_t>(cfg.n_vehicles); ++attempt) {
    bool horizontal = rng.bernoulli(0.5);
    int street = -max_street + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n_streets)));
    double centerline = street * cfg.street_spacing;
    double lane = rng.bernoulli(0.5) ? cfg.lane_offset : -cfg.lane_offset;
    double along = rng.uniform(-half + 3.0, half - 3.0);

    BBox7 b;
    b.w = cfg.dim_w * (1.0 + cfg.dim_jitter * rng.uniform(-1.0, 1.0));
    b.l = cfg.dim_l * (1.0 + cfg.dim_jitter * rng.uniform(-1.0, 1.0));
    b.h = cfg.dim_h * (1.0 + cfg.dim_jitter * rng.uniform(-1.0, 1.0));
    b.z = 0.5 * b.h;
    if (horizontal) {
      b.x = along;
      b.y = centerline + lane;
      b.r = lane < 0.0 ? 0.0 : kPi;
    } else {
      b.x = centerline + lane;
      b.y = along;
      b.r = lane < 0.0 ? kPi / 2.0 : -kPi / 2.0;
    }
    if (!placement_collides(b, placed)) placed.push_back(b);
  }
  if (placed.size() < static_cast<std::size_t>(cfg.n_vehicles))
    throw std::runtime_error("generate_frame: could not place requested vehicle count; lower n_vehicles or enlarge map_extent");
  return placed;
}

std::vector<LandmarkPoint> place_landmarks(const SimConfig& cfg, Rng& rng) {
  const double half = 0.5 * cfg.map_extent;
  std::vector<LandmarkPoint> out;

  long long n_poles = std::llround(cfg.pole_density * cfg.map_extent * cfg.map_extent / 1000.0);
  long long attempts = 0;
  while (static_cast<long long>(out.size()) < n_poles && attempts < 60 * n_poles) {
    ++attempts;
    LandmarkPoint p{rng.uniform(-half, half), rng.uniform(-half, half), LandmarkClass::kPole};
    bool close = false;
    for (const LandmarkPoint& q : out)
      if (dist2d(p.x, p.y, q.x, q.y) < 2.0) {
        close = true;
        break;
      }
    if (!close) out.push_back(p);
  }

  for (int wseg = 0; wseg < cfg.wall_count; ++wseg) {
    bool horizontal = rng.bernoulli(0.5);
    double x0 = rng.uniform(-half, half);
    double y0 = rng.uniform(-half, half);
    double len = rng.uniform(6.0, 20.0);
    int n_pts = static_cast<int>(std::floor(len / cfg.wall_point_spacing)) + 1;
    for (int i = 0; i < n_pts; ++i) {
      double d = i * cfg.wall_point_spacing;
      double x = horizontal ? x0 + d : x0;
      double y = horizontal ? y0 : y0 + d;
      if (x < -half || x > half || y < -half || y > half) break;
      out.push_back(LandmarkPoint{x, y, LandmarkClass::kWallFence});
    }
  }
  return out;
}

}  // namespace

std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t index) {
  return mix_seed(base_seed, 0x4652414d45ull + index);
}

std::pair<std::vector<Detection>, std::vector<LandmarkPoint>> sense(
    const Frame& frame, int cav_slot, const NoiseModel& noise, std::uint64_t seed) {
  if (cav_slot < 0 || static_cast<std::size_t>(cav_slot) >= frame.cav_true_poses.size())
    throw std::invalid_argument("sense: cav_slot out of range");
  Rng rng(seed);
  const Pose2& pose = frame.cav_true_poses[static_cast<std::size_t>(cav_slot)];
  const int own_vehicle = frame.cav_vehicle[static_cast<std::size_t>(cav_slot)];
  const double yaw_sigma = noise.yaw_sigma_deg * kDegToRad;

  std::vector<Detection> dets;
  for (std::size_t v = 0; v < frame.vehicles.size(); ++v) {
    if (static_cast<int>(v) == own_vehicle) continue;
    const BBox7& gt = frame.vehicles[v];
    double d = dist2d(gt.x, gt.y, pose.x, pose.y);
    if (d > frame.det_range) continue;
    double miss = std::clamp(noise.miss_base + noise.miss_per_meter * d, 0.0, 1.0);
    if (rng.bernoulli(miss)) continue;

    double sigma = noise.pos_sigma_base + noise.pos_sigma_per_meter * d;
    Detection det;
    det.box = gt;
    det.box.x += rng.normal(0.0, sigma);
    det.box.y += rng.normal(0.0, sigma);
    det.box.z += rng.normal(0.0, noise.z_sigma);
    det.box.w = std::max(0.3, gt.w * (1.0 + rng.normal(0.0, noise.dim_sigma)));
    det.box.l = std::max(0.3, gt.l * (1.0 + rng.normal(0.0, noise.dim_sigma)));
    det.box.h = std::max(0.3, gt.h * (1.0 + rng.normal(0.0, noise.dim_sigma)));
    double r = gt.r + rng.normal(0.0, yaw_sigma);
    if (rng.bernoulli(noise.heading_flip_prob)) r += kPi;
    det.box.r = normalize_angle(r);
    det.score = std::clamp(std::exp(-noise.score_decay * d) + rng.normal(0.0, noise.score_sigma),
                           0.0, 1.0);
    dets.push_back(det);
  }

  int n_fp = rng.poisson(noise.fp_rate);
  for (int i = 0; i < n_fp; ++i) {
    double ang = rng.uniform(0.0, 2.0 * kPi);
    double rad = frame.det_range * std::sqrt(rng.uniform());
    Detection det;
    det.box.w = std::max(0.3, 1.98 * (1.0 + rng.normal(0.0, 2.0 * noise.dim_sigma)));
    det.box.l = std::max(0.3, 4.41 * (1.0 + rng.normal(0.0, 2.0 * noise.dim_sigma)));
    det.box.h = std::max(0.3, 1.64 * (1.0 + rng.normal(0.0, 2.0 * noise.dim_sigma)));
    det.box.x = pose.x + rad * std::cos(ang);
    det.box.y = pose.y + rad * std::sin(ang);
    det.box.z = 0.5 * det.box.h;
    det.box.r = normalize_angle(rng.uniform(-kPi, kPi));
    det.score = rng.uniform(0.05, 0.5);
    dets.push_back(det);
  }

  std::vector<LandmarkPoint> lms;
  for (const LandmarkPoint& lm : frame.map_landmarks) {
    double d = dist2d(lm.x, lm.y, pose.x, pose.y);
    if (d > frame.det_range) continue;
    double miss = std::min(0.5, noise.miss_base + 0.5 * noise.miss_per_meter * d);
    if (rng.bernoulli(miss)) continue;
    lms.push_back(LandmarkPoint{lm.x + rng.normal(0.0, noise.landmark_sigma),
                                lm.y + rng.normal(0.0, noise.landmark_sigma), lm.cls});
  }
  return {std::move(dets), std::move(lms)};
}

void inject_loc_noise(Frame& frame, const SimConfig& cfg, std::uint64_t seed) {
  Rng rng(mix_seed(seed, kStreamLoc));
  const double yaw_sigma = cfg.loc_sigma_yaw_deg * kDegToRad;
  frame.cav_noisy_poses.resize(frame.cav_true_poses.size());
  for (std::size_t i = 0; i < frame.cav_true_poses.size(); ++i) {
    const Pose2& t = frame.cav_true_poses[i];
    Pose2 n;
    n.x = t.x + rng.normal(0.0, cfg.loc_sigma_xy);
    n.y = t.y + rng.normal(0.0, cfg.loc_sigma_xy);
    n.yaw = normalize_angle(t.yaw + rng.normal(0.0, yaw_sigma));
    frame.cav_noisy_poses[i] = n;
  }
}

Frame generate_frame(const SimConfig& cfg, std::uint64_t seed) {
  validate_sim_config(cfg);
  Frame frame;
  frame.seed = seed;
  frame.det_range = cfg.det_range;
  frame.comm_range = cfg.comm_range;
  frame.surface_points_per_vehicle = cfg.surface_points_per_vehicle;

  Rng place_rng(mix_seed(seed, kStreamPlace));
  frame.vehicles = place_vehicles(cfg, place_rng);
  frame.map_landmarks = place_landmarks(cfg, place_rng);

  // CAV slots: a random draw of distinct vehicles; slot 0 is ego.
  std::vector<int> order(frame.vehicles.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i)
    std::swap(order[i - 1], order[place_rng.uniform_int(i)]);
  frame.cav_vehicle.assign(order.begin(), order.begin() + cfg.n_cavs);
  for (int v : frame.cav_vehicle) {
    const BBox7& b = frame.vehicles[static_cast<std::size_t>(v)];
    frame.cav_true_poses.push_back(Pose2{b.x, b.y, b.r});
  }
  frame.cav_noisy_poses = frame.cav_true_poses;

  frame.cav_detections.resize(frame.cav_true_poses.size());
  frame.cav_landmarks.resize(frame.cav_true_poses.size());
  for (std::size_t slot = 0; slot < frame.cav_true_poses.size(); ++slot) {
    auto [dets, lms] = sense(frame, static_cast<int>(slot), cfg.noise,
                             mix_seed(mix_seed(seed, kStreamSense), slot));
    frame.cav_detections[slot] = std::move(dets);
    frame.cav_landmarks[slot] = std::move(lms);
  }

  // Cooperative set: CAVs within comm range of ego, random order, truncated.
  Rng coop_rng(mix_seed(seed, kStreamCoop));
  const Pose2& ego = frame.cav_true_poses[0];
  std::vector<int> in_range;
  for (std::size_t slot = 1; slot < frame.cav_true_poses.size(); ++slot) {
    const Pose2& p = frame.cav_true_poses[slot];
    if (dist2d(p.x, p.y, ego.x, ego.y) <= cfg.comm_range) in_range.push_back(static_cast<int>(slot));
  }
  for (std::size_t i = in_range.size(); i > 1; --i)
    std::swap(in_range[i - 1], in_range[coop_rng.uniform_int(i)]);
  if (static_cast<int>(in_range.size()) > cfg.max_coop) in_range.resize(static_cast<std::size_t>(cfg.max_coop));
  frame.coop_cavs = std::move(in_range);

  const BBox7& ego_box = frame.vehicles[static_cast<std::size_t>(frame.cav_vehicle[0])];
  for (const BBox7& v : frame.vehicles)
    if (dist2d(v.x, v.y, ego_box.x, ego_box.y) <= cfg.det_range) frame.gt_boxes.push_back(v);
  return frame;
}

namespace {

// Deterministic synthetic surface points, box-local frame, on the four side
// faces and the roof, picked proportionally to face area.
std::vector<Vec3> surface_points(const BBox7& box, int count, Rng& rng) {
  double aw = box.w * box.h;  // front/back faces
  double al = box.l * box.h;  // left/right faces
  double at = box.l * box.w;  // roof
  double total = 2.0 * aw + 2.0 * al + at;
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(count));
  double c = std::cos(box.r), s = std::sin(box.r);
  for (int i = 0; i < count; ++i) {
    double pick = rng.uniform(0.0, total);
    double u = rng.uniform(-0.5, 0.5);
    double v = rng.uniform(-0.5, 0.5);
    Vec3 p;
    if (pick < 2.0 * aw) {
      p = Vec3{pick < aw ? 0.5 * box.l : -0.5 * box.l, u * box.w, v * box.h};
    } else if (pick < 2.0 * aw + 2.0 * al) {
      p = Vec3{u * box.l, pick < 2.0 * aw + al ? 0.5 * box.w : -0.5 * box.w, v * box.h};
    } else {
      p = Vec3{u * box.l, v * box.w, 0.5 * box.h};
    }
    out.push_back(Vec3{box.x + c * p.x - s * p.y, box.y + s * p.x + c * p.y, box.z + p.z});
  }
  return out;
}

}  // namespace

Cpm build_cpm(const Frame& frame, int cav_slot, const SelectConfig& select) {
  if (cav_slot < 0 || static_cast<std::size_t>(cav_slot) >= frame.cav_true_poses.size())
    throw std::invalid_argument("build_cpm: cav_slot out of range");
  if (select.n_kpts < 0 || select.n_ch < 0 || select.n_ch > 255 || select.k_p < 0 || select.k_fw < 0)
    throw std::invalid_argument("build_cpm: invalid keypoint budget");

  const Pose2& true_pose = frame.cav_true_poses[static_cast<std::size_t>(cav_slot)];
  Cpm m;
  m.sender_id = static_cast<std::uint32_t>(cav_slot);
  m.pose = frame.cav_noisy_poses[static_cast<std::size_t>(cav_slot)];

  for (const Detection& d : frame.cav_detections[static_cast<std::size_t>(cav_slot)])
    m.proposals.push_back(Detection{transform_box(d.box, kWorld, true_pose), d.score});

  std::vector<BBox7> boxes;
  boxes.reserve(m.proposals.size());
  for (const Detection& d : m.proposals) boxes.push_back(d.box);

  Rng surf_rng(mix_seed(mix_seed(frame.seed, kStreamSurface), static_cast<std::uint64_t>(cav_slot)));
  std::vector<Vec3> cloud;
  for (const BBox7& b : boxes) {
    std::vector<Vec3> pts = surface_points(b, frame.surface_points_per_vehicle, surf_rng);
    cloud.insert(cloud.end(), pts.begin(), pts.end());
  }

  std::vector<int> owner = points_in_boxes(cloud, boxes);
  std::vector<Vec3> in_box;
  in_box.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (owner[i] >= 0) in_box.push_back(cloud[i]);

  if (static_cast<int>(in_box.size()) > select.n_kpts) {
    std::vector<int> picked = fps_sample(in_box, select.n_kpts);
    std::sort(picked.begin(), picked.end());
    std::vector<Vec3> kept;
    kept.reserve(picked.size());
    for (int i : picked) kept.push_back(in_box[static_cast<std::size_t>(i)]);
    in_box = std::move(kept);
  }
  m.keypoints.coords = std::move(in_box);
  m.keypoints.n_ch = select.n_ch;
  m.keypoints.features =
      synthesize_features(m.keypoints.coords, select.n_ch, mix_seed(frame.seed, kStreamFeature));

  std::vector<LandmarkPoint> local;
  for (const LandmarkPoint& lm : frame.cav_landmarks[static_cast<std::size_t>(cav_slot)]) {
    Vec2 q = transform_point(Vec2{lm.x, lm.y}, kWorld, true_pose);
    local.push_back(LandmarkPoint{q.x, q.y, lm.cls});
  }
  for (const BBox7& b : boxes)
    local.push_back(LandmarkPoint{b.x, b.y, LandmarkClass::kVehicleCenter});
  m.correction_points = select_correction_points(local, select.k_p, select.k_fw);
  return m;
}

void save_frame(const std::filesystem::path& dir, std::size_t index, const Frame& frame,
                const SelectConfig& select) {
  char stem[32];
  std::snprintf(stem, sizeof stem, "frame_%06zu", index);

  std::vector<Cpm> cpms;
  cpms.push_back(build_cpm(frame, 0, select));
  for (int slot : frame.coop_cavs) cpms.push_back(build_cpm(frame, slot, select));
  write_cpm_container(dir / (std::string(stem) + ".cpms"), cpms);

  const Pose2& ego_true = frame.cav_true_poses[0];
  std::ofstream gt(dir / (std::string(stem) + ".gt.txt"), std::ios::trunc);
  if (!gt) throw std::runtime_error("cannot open ground-truth sidecar for writing");
  for (const BBox7& b : frame.gt_boxes) {
    BBox7 local = transform_box(b, kWorld, ego_true);
    char line[256];
    std::snprintf(line, sizeof line, "%.9g %.9g %.9g %.9g %.9g %.9g %.9g\n", local.x, local.y,
                  local.z, local.w, local.l, local.h, local.r);
    gt << line;
  }
  if (!gt) throw std::runtime_error("write failed for ground-truth sidecar");
}

}  // namespace coopfuse
