#include <doctest.h>

#include <cmath>
#include <vector>

#include "coopfuse/sim.hpp"
#include "support.hpp"

using namespace coopfuse;
using coopfuse::testing::box;

namespace {

NoiseModel zero_noise() {
  NoiseModel n;
  n.pos_sigma_base = 0.0;
  n.pos_sigma_per_meter = 0.0;
  n.z_sigma = 0.0;
  n.yaw_sigma_deg = 0.0;
  n.dim_sigma = 0.0;
  n.heading_flip_prob = 0.0;
  n.miss_base = 0.0;
  n.miss_per_meter = 0.0;
  n.fp_rate = 0.0;
  n.score_decay = 0.0;
  n.score_sigma = 0.0;
  n.landmark_sigma = 0.0;
  return n;
}

// Single-CAV frame at the origin; vehicle 0 is the sensing platform.
Frame make_frame(std::vector<BBox7> vehicles, double det_range = 57.6) {
  Frame f;
  f.det_range = det_range;
  f.comm_range = 40.0;
  f.surface_points_per_vehicle = 40;
  f.vehicles = std::move(vehicles);
  f.cav_vehicle = {0};
  f.cav_true_poses = {Pose2{0.0, 0.0, 0.0}};
  f.cav_noisy_poses = f.cav_true_poses;
  f.cav_detections.resize(1);
  f.cav_landmarks.resize(1);
  return f;
}

double stddev(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  return std::sqrt(var / static_cast<double>(xs.size()));
}

}  // namespace

TEST_CASE("sense with zero noise reproduces ground truth") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41, 0.0, 0.82, 1.64),
                        box(5, 0, 1.9, 4.3, 0.3, 0.8, 1.6),
                        box(0, 20, 2.0, 4.5, -1.2, 0.8, 1.6),
                        box(56, 0, 1.9, 4.2, 2.0, 0.8, 1.6),
                        box(60, 0, 1.9, 4.2, 0.0, 0.8, 1.6)});
  NoiseModel noise = zero_noise();
  noise.score_decay = 0.01;

  auto [dets, lms] = sense(f, 0, noise, 99);
  REQUIRE(dets.size() == 3);  // own vehicle skipped, 60 m beyond range
  CHECK(lms.empty());
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const BBox7& gt = f.vehicles[i + 1];
    CHECK(dets[i].box.x == gt.x);
    CHECK(dets[i].box.y == gt.y);
    CHECK(dets[i].box.z == gt.z);
    CHECK(dets[i].box.w == gt.w);
    CHECK(dets[i].box.l == gt.l);
    CHECK(dets[i].box.h == gt.h);
    CHECK(angle_diff_abs(dets[i].box.r, gt.r) <= 1e-12);
    double d = std::hypot(gt.x, gt.y);
    CHECK(dets[i].score == doctest::Approx(std::exp(-0.01 * d)).epsilon(1e-12));
  }
}

TEST_CASE("sense misses everything when told to") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41), box(5, 0, 1.9, 4.3)});
  NoiseModel noise = zero_noise();
  noise.miss_base = 1.0;
  auto [dets, lms] = sense(f, 0, noise, 7);
  CHECK(dets.empty());
}

TEST_CASE("sense observes landmarks in range with their class") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41)});
  f.map_landmarks = {LandmarkPoint{3.0, 4.0, LandmarkClass::kPole},
                     LandmarkPoint{-10.0, 2.0, LandmarkClass::kWallFence},
                     LandmarkPoint{60.0, 0.0, LandmarkClass::kPole}};
  auto [dets, lms] = sense(f, 0, zero_noise(), 8);
  REQUIRE(lms.size() == 2);  // the 60 m pole is out of range
  CHECK(lms[0].x == 3.0);
  CHECK(lms[0].y == 4.0);
  CHECK(lms[0].cls == LandmarkClass::kPole);
  CHECK(lms[1].cls == LandmarkClass::kWallFence);
}

TEST_CASE("false positive count follows the configured rate") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41)});
  NoiseModel noise = zero_noise();
  noise.fp_rate = 2.0;

  const int trials = 4000;
  double total = 0.0;
  for (int t = 0; t < trials; ++t) {
    auto [dets, lms] = sense(f, 0, noise, 1000 + static_cast<std::uint64_t>(t));
    total += static_cast<double>(dets.size());
    for (const Detection& d : dets) {
      CHECK(std::hypot(d.box.x, d.box.y) <= f.det_range);
      CHECK(d.score >= 0.05);
      CHECK(d.score <= 0.5);
    }
  }
  double mean = total / trials;
  CHECK(mean == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("position noise grows with range") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41), box(10, 0, 1.9, 4.3), box(50, 0, 1.9, 4.3)});
  NoiseModel noise = zero_noise();
  noise.pos_sigma_base = 0.10;
  noise.pos_sigma_per_meter = 0.004;

  const int trials = 8000;
  std::vector<double> near_dx, far_dx;
  near_dx.reserve(trials);
  far_dx.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    auto [dets, lms] = sense(f, 0, noise, 20000 + static_cast<std::uint64_t>(t));
    REQUIRE(dets.size() == 2);
    near_dx.push_back(dets[0].box.x - 10.0);
    far_dx.push_back(dets[1].box.x - 50.0);
  }
  double rmse_near = stddev(near_dx);
  double rmse_far = stddev(far_dx);
  CHECK(rmse_far > rmse_near);
  CHECK(rmse_near == doctest::Approx(0.14).epsilon(0.05));
  CHECK(rmse_far == doctest::Approx(0.30).epsilon(0.05));
}

TEST_CASE("inject_loc_noise with zero sigma keeps the true poses") {
  SimConfig cfg;
  Frame f = generate_frame(cfg, 92);
  SimConfig quiet = cfg;
  quiet.loc_sigma_xy = 0.0;
  quiet.loc_sigma_yaw_deg = 0.0;
  inject_loc_noise(f, quiet, 17);
  REQUIRE(f.cav_noisy_poses.size() == f.cav_true_poses.size());
  for (std::size_t i = 0; i < f.cav_true_poses.size(); ++i) {
    CHECK(f.cav_noisy_poses[i].x == f.cav_true_poses[i].x);
    CHECK(f.cav_noisy_poses[i].y == f.cav_true_poses[i].y);
    CHECK(angle_diff_abs(f.cav_noisy_poses[i].yaw, f.cav_true_poses[i].yaw) <= 1e-12);
  }
}

TEST_CASE("inject_loc_noise is unbiased with the configured spread") {
  SimConfig cfg;
  Frame f = generate_frame(cfg, 93);
  const std::size_t n_slots = f.cav_true_poses.size();
  REQUIRE(n_slots >= 2);

  std::vector<double> err_x, err_yaw, rel_x;
  for (int t = 0; t < 1250; ++t) {
    inject_loc_noise(f, cfg, 40000 + static_cast<std::uint64_t>(t));
    double ego_err = f.cav_noisy_poses[0].x - f.cav_true_poses[0].x;
    for (std::size_t i = 0; i < n_slots; ++i) {
      err_x.push_back(f.cav_noisy_poses[i].x - f.cav_true_poses[i].x);
      err_yaw.push_back(normalize_angle(f.cav_noisy_poses[i].yaw - f.cav_true_poses[i].yaw));
      if (i > 0) rel_x.push_back(f.cav_noisy_poses[i].x - f.cav_true_poses[i].x - ego_err);
    }
  }

  double mean_x = 0.0;
  for (double e : err_x) mean_x += e;
  mean_x /= static_cast<double>(err_x.size());
  CHECK(std::fabs(mean_x) <= 0.02);
  CHECK(stddev(err_x) == doctest::Approx(cfg.loc_sigma_xy).epsilon(0.05));

  double yaw_sigma = cfg.loc_sigma_yaw_deg * 3.141592653589793 / 180.0;
  CHECK(stddev(err_yaw) == doctest::Approx(yaw_sigma).epsilon(0.05));

  // ego and cooperator errors are independent, so relative error adds in variance
  CHECK(stddev(rel_x) == doctest::Approx(cfg.loc_sigma_xy * std::sqrt(2.0)).epsilon(0.05));
}

TEST_CASE("build_cpm packs detections and keypoints consistently") {
  SimConfig cfg;
  Frame f = generate_frame(cfg, 94);
  SelectConfig select;
  Cpm m = build_cpm(f, 0, select);

  const auto& dets = f.cav_detections[0];
  REQUIRE(m.proposals.size() == dets.size());
  for (std::size_t i = 0; i < dets.size(); ++i) CHECK(m.proposals[i].score == dets[i].score);

  std::size_t cloud = dets.size() * static_cast<std::size_t>(f.surface_points_per_vehicle);
  CHECK(m.keypoints.coords.size() ==
        std::min(cloud, static_cast<std::size_t>(select.n_kpts)));
  CHECK(m.keypoints.features.size() ==
        m.keypoints.coords.size() * static_cast<std::size_t>(select.n_ch));

  std::vector<BBox7> boxes;
  for (const Detection& d : m.proposals) boxes.push_back(d.box);
  for (int owner : points_in_boxes(m.keypoints.coords, boxes)) CHECK(owner >= 0);

  int poles = 0, walls = 0, centers = 0;
  for (const LandmarkPoint& p : m.correction_points) {
    if (p.cls == LandmarkClass::kPole) ++poles;
    if (p.cls == LandmarkClass::kWallFence) ++walls;
    if (p.cls == LandmarkClass::kVehicleCenter) ++centers;
  }
  CHECK(poles <= select.k_p);
  CHECK(walls <= select.k_fw);
  CHECK(centers == static_cast<int>(m.proposals.size()));

  // the assembled message must survive the wire format
  Cpm again = decode_cpm(encode_cpm(m));
  CHECK(again.proposals.size() == m.proposals.size());
}

TEST_CASE("build_cpm with no detections is landmarks only") {
  Frame f = make_frame({box(0, 0, 1.98, 4.41)});
  f.cav_landmarks[0] = {LandmarkPoint{2.0, 1.0, LandmarkClass::kPole},
                        LandmarkPoint{-3.0, 0.5, LandmarkClass::kPole},
                        LandmarkPoint{4.0, -2.0, LandmarkClass::kWallFence}};
  Cpm m = build_cpm(f, 0, SelectConfig{});
  CHECK(m.proposals.empty());
  CHECK(m.keypoints.coords.empty());
  REQUIRE(m.correction_points.size() == 3);
  CHECK(m.correction_points[0].x == 2.0);
  CHECK(m.correction_points[2].cls == LandmarkClass::kWallFence);
}

TEST_CASE("generate_frame is deterministic") {
  SimConfig cfg;
  Frame a = generate_frame(cfg, 12345);
  Frame b = generate_frame(cfg, 12345);

  REQUIRE(a.vehicles.size() == b.vehicles.size());
  for (std::size_t i = 0; i < a.vehicles.size(); ++i) {
    CHECK(a.vehicles[i].x == b.vehicles[i].x);
    CHECK(a.vehicles[i].y == b.vehicles[i].y);
    CHECK(a.vehicles[i].r == b.vehicles[i].r);
  }
  CHECK(a.coop_cavs == b.coop_cavs);
  CHECK(a.cav_vehicle == b.cav_vehicle);
  REQUIRE(a.gt_boxes.size() == b.gt_boxes.size());

  SelectConfig select;
  for (std::size_t slot = 0; slot < a.cav_true_poses.size(); ++slot)
    CHECK(encode_cpm(build_cpm(a, static_cast<int>(slot), select)) ==
          encode_cpm(build_cpm(b, static_cast<int>(slot), select)));

  Frame c = generate_frame(cfg, 12346);
  CHECK(encode_cpm(build_cpm(a, 0, select)) != encode_cpm(build_cpm(c, 0, select)));
}

TEST_CASE("generated scenes are physically consistent") {
  SimConfig cfg;
  for (std::uint64_t seed : {5ull, 6ull, 7ull}) {
    Frame f = generate_frame(cfg, seed);
    REQUIRE(f.vehicles.size() == static_cast<std::size_t>(cfg.n_vehicles));
    REQUIRE(f.cav_true_poses.size() == static_cast<std::size_t>(cfg.n_cavs));

    for (std::size_t i = 0; i < f.vehicles.size(); ++i)
      for (std::size_t j = i + 1; j < f.vehicles.size(); ++j)
        CHECK(bev_iou(f.vehicles[i], f.vehicles[j]) == 0.0);

    CHECK(static_cast<int>(f.coop_cavs.size()) <= cfg.max_coop);
    const Pose2& ego = f.cav_true_poses[0];
    for (int slot : f.coop_cavs) {
      CHECK(slot >= 1);
      CHECK(slot < cfg.n_cavs);
      const Pose2& p = f.cav_true_poses[static_cast<std::size_t>(slot)];
      CHECK(std::hypot(p.x - ego.x, p.y - ego.y) <= cfg.comm_range);
    }

    std::size_t in_range = 0;
    for (const BBox7& v : f.vehicles)
      if (std::hypot(v.x - ego.x, v.y - ego.y) <= cfg.det_range) ++in_range;
    CHECK(f.gt_boxes.size() == in_range);
  }
}

TEST_CASE("a lone cav has no cooperators") {
  SimConfig cfg;
  cfg.n_vehicles = 1;
  cfg.n_cavs = 1;
  cfg.noise = zero_noise();
  Frame f = generate_frame(cfg, 3);
  CHECK(f.coop_cavs.empty());
  CHECK(f.cav_detections[0].empty());
}

TEST_CASE("generate_frame rejects inconsistent configs") {
  SimConfig cfg;
  cfg.n_cavs = cfg.n_vehicles + 1;
  CHECK_THROWS_AS(generate_frame(cfg, 1), std::invalid_argument);

  SimConfig bad;
  bad.det_range = -1.0;
  CHECK_THROWS_AS(generate_frame(bad, 1), std::invalid_argument);
}
