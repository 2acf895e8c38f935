#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "coopfuse/geometry.hpp"
#include "coopfuse/keypoints.hpp"
#include "coopfuse/localization.hpp"
#include "coopfuse/matching.hpp"

namespace coopfuse {

// Collective perception message. All content is expressed in the sender's
// local frame; `pose` is the sender's own (possibly erroneous) world pose.
struct Cpm {
  std::uint32_t sender_id = 0;
  Pose2 pose;
  std::vector<Detection> proposals;
  KeypointSet keypoints;
  std::vector<LandmarkPoint> correction_points;
};

class EncodeError : public std::runtime_error {
 public:
  EncodeError(std::string field, const std::string& msg)
      : std::runtime_error(msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

class DecodeError : public std::runtime_error {
 public:
  DecodeError(std::size_t offset, const std::string& msg)
      : std::runtime_error(msg + " (byte offset " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

// Fixed little-endian layout.
//
// header (36 B):  magic "CPM1" | version u8=1 | sender_id u32 | pose x,y,yaw f32
//                 | n_prop u16 | n_kpts u16 | n_corr u16 | n_ch u8
//                 | feat_offset f32 | feat_scale f32
// proposal (15 B): x y z w l h i16 @ 0.01 m | r i16 @ 1e-4 rad | score u8 @ 1/255
// keypoint (6+n_ch B): x y z i16 @ 0.01 m | n_ch feature bytes
// correction point (5 B): class u8 | x y i16 @ 0.01 m
//
// Quantization rounds half away from zero. Heading values that would encode
// as -31416 are stored as +31416 so decode stays within (-pi, pi].
std::vector<std::uint8_t> encode_cpm(const Cpm& m);
Cpm decode_cpm(const std::vector<std::uint8_t>& bytes);

// Encoded size in bytes, computed from counts alone:
// 36 + 15*n_prop + (6+n_ch)*n_kpts + 5*n_corr.
std::size_t cpm_size(const Cpm& m);

// Dense BEV feature grid of the kind CPMs replace; used for size comparisons.
struct GridMapPayload {
  int width_cells = 0;
  int height_cells = 0;
  int n_ch = 0;
  std::vector<float> values;  // width_cells * height_cells * n_ch, row-major
};

// 16 B header + one byte per channel per cell.
std::size_t gridmap_size_dense(const GridMapPayload& g);
// 16 B header + (4 B cell index + n_ch bytes) per cell with any nonzero value.
std::size_t gridmap_size_sparse(const GridMapPayload& g);

// Grid a CPM's keypoints into the equivalent BEV feature map: square grid of
// side 2*range centred on the sender, cell_size metres per cell, a cell's
// channels are 1 when any keypoint lands in it.
GridMapPayload gridmap_equivalent(const Cpm& m, double range, double cell_size);

// Length-prefixed container: u32 record length, then the record bytes.
void write_cpm_container(const std::filesystem::path& path, const std::vector<Cpm>& cpms);
std::vector<Cpm> read_cpm_container(const std::filesystem::path& path);

}  // namespace coopfuse
