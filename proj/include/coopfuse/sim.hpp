#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "coopfuse/cpm.hpp"
#include "coopfuse/geometry.hpp"
#include "coopfuse/keypoints.hpp"
#include "coopfuse/localization.hpp"
#include "coopfuse/matching.hpp"

namespace coopfuse {

// Distance-parameterized detection error model standing in for a real
// onboard detector.
struct NoiseModel {
  double pos_sigma_base = 0.10;        // m, at zero range
  double pos_sigma_per_meter = 0.004;  // m per metre of range
  double z_sigma = 0.05;               // m
  double yaw_sigma_deg = 2.0;          // deg
  double dim_sigma = 0.03;             // relative
  double heading_flip_prob = 0.15;     // chance of a 180-degree flip
  double miss_base = 0.05;             // miss probability at zero range
  double miss_per_meter = 0.003;       // added miss probability per metre
  double fp_rate = 0.5;                // expected false positives per frame
  double score_decay = 0.01;           // score = exp(-decay * range)
  double score_sigma = 0.05;           // additive score noise
  double landmark_sigma = 0.05;        // m, landmark observation jitter
};

struct SimConfig {
  int n_vehicles = 30;
  int n_cavs = 8;
  double map_extent = 120.0;      // m, square side
  double street_spacing = 24.0;   // m between parallel streets
  double lane_offset = 1.75;      // m from street centreline
  double dim_w = 1.98;            // anchor vehicle width
  double dim_l = 4.41;            // anchor vehicle length
  double dim_h = 1.64;            // anchor vehicle height
  double dim_jitter = 0.05;       // relative uniform jitter on anchor dims
  double comm_range = 40.0;       // m, V2V range
  double det_range = 57.6;        // m, detection and evaluation range
  int max_coop = 4;               // cooperating CAVs per frame, ego excluded
  double pole_density = 1.5;      // poles per 1000 m^2
  int wall_count = 6;             // wall/fence segments per map
  double wall_point_spacing = 0.5;  // m between points along a wall
  int surface_points_per_vehicle = 40;
  NoiseModel noise;
  double loc_sigma_xy = 0.4;      // m, per-axis localization noise
  double loc_sigma_yaw_deg = 4.0; // deg, localization heading noise
};

// One simulated scene. All boxes, detections and landmarks are in the world
// frame; CAV slot 0 is the ego vehicle.
struct Frame {
  std::uint64_t seed = 0;
  double det_range = 0.0;
  double comm_range = 0.0;
  int surface_points_per_vehicle = 0;
  std::vector<BBox7> vehicles;                       // every vehicle in the map
  std::vector<int> cav_vehicle;                      // vehicle index per CAV slot
  std::vector<Pose2> cav_true_poses;
  std::vector<Pose2> cav_noisy_poses;
  std::vector<std::vector<Detection>> cav_detections;
  std::vector<std::vector<LandmarkPoint>> cav_landmarks;  // observed poles/walls
  std::vector<LandmarkPoint> map_landmarks;               // ground-truth landmarks
  std::vector<int> coop_cavs;                        // CAV slots cooperating with ego
  std::vector<BBox7> gt_boxes;                       // vehicles within det_range of ego
};

// Seed for frame `index` of a run, derived so frames are independent and a
// saved run can be regenerated frame by frame.
std::uint64_t frame_seed(std::uint64_t base_seed, std::size_t index);

// Deterministic scene generation: lane-grid vehicle placement, landmark
// scattering, per-CAV sensing, cooperative-set selection. Reported poses start
// equal to the true ones; apply inject_loc_noise for localization error.
// Throws std::invalid_argument on inconsistent config and std::runtime_error
// when placement cannot satisfy the config.
Frame generate_frame(const SimConfig& cfg, std::uint64_t seed);

// Detections and landmark observations for one CAV slot, world frame.
// Exposed for tests; generate_frame applies it to every slot.
std::pair<std::vector<Detection>, std::vector<LandmarkPoint>> sense(
    const Frame& frame, int cav_slot, const NoiseModel& noise, std::uint64_t seed);

// Replaces the noisy poses with freshly drawn true-pose perturbations.
void inject_loc_noise(Frame& frame, const SimConfig& cfg, std::uint64_t seed);

// Assembles the CPM a CAV slot would broadcast: proposals, surface keypoints
// and correction landmarks in the sender's true local frame, with the noisy
// pose in the header.
Cpm build_cpm(const Frame& frame, int cav_slot, const SelectConfig& select);

// Per-frame persisted form: frame_NNNNNN.cpms (ego CPM first, then the
// cooperative CPMs in selection order) plus frame_NNNNNN.gt.txt with one
// "x y z w l h r" box per line in the ego true-pose frame.
void save_frame(const std::filesystem::path& dir, std::size_t index, const Frame& frame,
                const SelectConfig& select);

}  // namespace coopfuse
