#pragma once

#include <utility>
#include <vector>

#include "coopfuse/geometry.hpp"

namespace coopfuse {

struct Detection {
  BBox7 box;
  double score = 0.0;
};

enum class SeedOrder {
  kDescendingScore,
  kInputOrder,
};

struct MatchConfig {
  // Proposals with BEV IoU strictly above this share a cluster.
  double iou_thr = 0.3;
  // When true, flip the heading of the higher-scoring direction set instead
  // of the lower-scoring one (reproduces a published pseudo-code quirk).
  bool literal_flip = false;
  SeedOrder seed_order = SeedOrder::kDescendingScore;
};

struct Cluster {
  std::vector<Detection> members;
  // Per-member source (CAV) index; 0 when clustering a single list.
  std::vector<int> source_ids;
};

// Greedy single-link clustering: repeatedly seed with the best remaining
// proposal and absorb every unclustered proposal whose IoU with the seed
// exceeds cfg.iou_thr.
std::vector<Cluster> cluster_proposals(const std::vector<Detection>& dets, const MatchConfig& cfg);
std::vector<Cluster> cluster_proposals(const std::vector<Detection>& dets,
                                       const std::vector<int>& source_ids, const MatchConfig& cfg);

// Resolves the 180-degree heading ambiguity inside one cluster: members are
// split by angular distance (at most pi/2 or not) from the highest-scoring
// member's heading, and the side with the smaller score mass is flipped by
// pi (the winning side, under cfg.literal_flip).
Cluster align_cluster_directions(Cluster cluster, const MatchConfig& cfg);

// Confidence-weighted merge of an aligned cluster. Linear fields use
// score-normalized weights (uniform when all scores are zero), the heading
// uses the circular weighted mean, the merged score is the member maximum.
Detection merge_cluster(const Cluster& cluster);

// Full pipeline over per-CAV proposal lists: cluster, align, merge.
std::vector<Detection> fuse_proposals(
    const std::vector<std::pair<int, std::vector<Detection>>>& per_cav, const MatchConfig& cfg);

// Classic score-greedy NMS baseline; keeps a box when its IoU with every
// already-kept box is at most nms_iou.
std::vector<Detection> nms_fuse(const std::vector<Detection>& dets, double nms_iou);

}  // namespace coopfuse
