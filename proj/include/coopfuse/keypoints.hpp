#pragma once

#include <cstdint>
#include <vector>

#include "coopfuse/geometry.hpp"
#include "coopfuse/localization.hpp"

namespace coopfuse {

struct SelectConfig {
  int n_kpts = 2048;  // keypoint budget per CPM
  int n_ch = 128;     // feature channels per keypoint
  int k_p = 16;       // pole landmark budget
  int k_fw = 32;      // wall/fence landmark budget
};

// Keypoints with a flat row-major feature block (coords.size() * n_ch).
struct KeypointSet {
  std::vector<Vec3> coords;
  std::vector<float> features;
  int n_ch = 0;
};

// Furthest point sampling. Starts from the point farthest from the centroid,
// then repeatedly adds the point with the largest distance to the selected
// set; ties pick the lowest index. Returns indices in selection order,
// clamped to the cloud size. Throws on n < 0 or on an empty cloud with n > 0.
std::vector<int> fps_sample(const std::vector<Vec3>& pts, int n);
std::vector<int> fps_sample(const std::vector<Vec2>& pts, int n);

// Per-point index of the first box containing it, -1 when none. Containment
// is boundary-inclusive with a 1e-9 tolerance.
std::vector<int> points_in_boxes(const std::vector<Vec3>& pts, const std::vector<BBox7>& boxes);

// Caps the landmark list per class: poles beyond k_p and wall/fence points
// beyond k_fw are subsampled with FPS; vehicle centers pass through. Input
// order is preserved within each class; classes keep their relative order.
std::vector<LandmarkPoint> select_correction_points(const std::vector<LandmarkPoint>& landmarks,
                                                    int k_p, int k_fw);

// Deterministic stand-in for learned point features: each channel hashes the
// centimetre-quantized coordinates into [0, 1).
std::vector<float> synthesize_features(const std::vector<Vec3>& coords, int n_ch,
                                       std::uint64_t seed);

}  // namespace coopfuse
