#include "coopfuse/matching.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace coopfuse {
namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

void validate_dets(const std::vector<Detection>& dets, const char* what) {
  for (const Detection& d : dets) {
    validate_box(d.box, what);
    if (!std::isfinite(d.score) || d.score < 0.0 || d.score > 1.0)
      throw std::invalid_argument(std::string(what) + ": score outside [0, 1]");
  }
}

void validate_thr(double thr, const char* what) {
  if (!std::isfinite(thr) || thr < 0.0 || thr >= 1.0)
    throw std::invalid_argument(std::string(what) + ": IoU threshold outside [0, 1)");
}

std::vector<std::size_t> seed_order(const std::vector<Detection>& dets, SeedOrder order) {
  std::vector<std::size_t> idx(dets.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  if (order == SeedOrder::kDescendingScore) {
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  }
  return idx;
}

}  // namespace

std::vector<Cluster> cluster_proposals(const std::vector<Detection>& dets, const MatchConfig& cfg) {
  return cluster_proposals(dets, std::vector<int>(dets.size(), 0), cfg);
}

std::vector<Cluster> cluster_proposals(const std::vector<Detection>& dets,
                                       const std::vector<int>& source_ids, const MatchConfig& cfg) {
  if (source_ids.size() != dets.size())
    throw std::invalid_argument("cluster_proposals: source_ids size mismatch");
  validate_thr(cfg.iou_thr, "cluster_proposals");
  validate_dets(dets, "cluster_proposals");

  std::vector<Cluster> clusters;
  std::vector<bool> used(dets.size(), false);
  for (std::size_t seed : seed_order(dets, cfg.seed_order)) {
    if (used[seed]) continue;
    used[seed] = true;
    Cluster c;
    c.members.push_back(dets[seed]);
    c.source_ids.push_back(source_ids[seed]);
    for (std::size_t j = 0; j < dets.size(); ++j) {
      if (used[j]) continue;
      if (bev_iou(dets[seed].box, dets[j].box) > cfg.iou_thr) {
        used[j] = true;
        c.members.push_back(dets[j]);
        c.source_ids.push_back(source_ids[j]);
      }
    }
    clusters.push_back(std::move(c));
  }
  return clusters;
}

Cluster align_cluster_directions(Cluster cluster, const MatchConfig& cfg) {
  if (cluster.members.empty()) throw std::invalid_argument("align_cluster_directions: empty cluster");
  validate_dets(cluster.members, "align_cluster_directions");

  std::size_t best = 0;
  for (std::size_t i = 1; i < cluster.members.size(); ++i)
    if (cluster.members[i].score > cluster.members[best].score) best = i;
  double r_ref = cluster.members[best].box.r;

  // near: headings within a quarter turn of the reference; far: the rest.
  double near_mass = 0.0, far_mass = 0.0;
  std::vector<bool> is_near(cluster.members.size());
  for (std::size_t i = 0; i < cluster.members.size(); ++i) {
    is_near[i] = angle_diff_abs(cluster.members[i].box.r, r_ref) <= kPi / 2.0;
    (is_near[i] ? near_mass : far_mass) += cluster.members[i].score;
  }

  bool near_wins = near_mass >= far_mass;
  bool flip_near = cfg.literal_flip ? near_wins : !near_wins;
  for (std::size_t i = 0; i < cluster.members.size(); ++i) {
    if (is_near[i] == flip_near)
      cluster.members[i].box.r = normalize_angle(cluster.members[i].box.r + kPi);
  }
  return cluster;
}

Detection merge_cluster(const Cluster& cluster) {
  if (cluster.members.empty()) throw std::invalid_argument("merge_cluster: empty cluster");
  validate_dets(cluster.members, "merge_cluster");

  double total = 0.0;
  for (const Detection& d : cluster.members) total += d.score;
  const double n = static_cast<double>(cluster.members.size());

  BBox7 m{};
  double sin_sum = 0.0, cos_sum = 0.0, max_score = 0.0;
  for (const Detection& d : cluster.members) {
    double w = total > 0.0 ? d.score / total : 1.0 / n;
    m.x += w * d.box.x;
    m.y += w * d.box.y;
    m.z += w * d.box.z;
    m.w += w * d.box.w;
    m.l += w * d.box.l;
    m.h += w * d.box.h;
    sin_sum += w * std::sin(d.box.r);
    cos_sum += w * std::cos(d.box.r);
    max_score = std::max(max_score, d.score);
  }
  m.r = std::atan2(sin_sum, cos_sum);
  if (m.r <= -kPi) m.r = kPi;
  return Detection{m, max_score};
}

std::vector<Detection> fuse_proposals(
    const std::vector<std::pair<int, std::vector<Detection>>>& per_cav, const MatchConfig& cfg) {
  std::vector<Detection> all;
  std::vector<int> ids;
  for (const auto& [cav, dets] : per_cav) {
    all.insert(all.end(), dets.begin(), dets.end());
    ids.insert(ids.end(), dets.size(), cav);
  }
  std::vector<Detection> out;
  for (Cluster& c : cluster_proposals(all, ids, cfg))
    out.push_back(merge_cluster(align_cluster_directions(std::move(c), cfg)));
  return out;
}

std::vector<Detection> nms_fuse(const std::vector<Detection>& dets, double nms_iou) {
  validate_thr(nms_iou, "nms_fuse");
  validate_dets(dets, "nms_fuse");

  std::vector<std::size_t> idx = seed_order(dets, SeedOrder::kDescendingScore);
  std::vector<Detection> kept;
  for (std::size_t i : idx) {
    bool suppressed = false;
    for (const Detection& k : kept) {
      if (bev_iou(dets[i].box, k.box) > nms_iou) {
        suppressed = true;
        break;
      }
    }
    if (!suppressed) kept.push_back(dets[i]);
  }
  return kept;
}

}  // namespace coopfuse
