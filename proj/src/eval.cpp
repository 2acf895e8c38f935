#include "coopfuse/eval.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace coopfuse {
namespace {

constexpr Pose2 kWorld{};

void validate_match_thr(double thr) {
  if (!std::isfinite(thr) || thr <= 0.0 || thr > 1.0)
    throw std::invalid_argument("match_to_gt: iou_thr outside (0, 1]");
}

void run_parallel(std::size_t count, int jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(jobs), count);
  std::vector<std::thread> pool;
  pool.reserve(n_threads);
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        std::size_t i = next.fetch_add(1);
        if (i >= count || failed.load()) return;
        try {
          fn(i);
        } catch (...) {
          std::scoped_lock lk(error_mu);
          if (!error) error = std::current_exception();
          failed.store(true);
          return;
        }
      }
    });
  }
  for (std::thread& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace

std::string pipeline_name(Pipeline p) {
  switch (p) {
    case Pipeline::kNoFusion: return "no_fusion";
    case Pipeline::kNms: return "nms";
    case Pipeline::kAlg1: return "alg1";
    case Pipeline::kAlg1WithCorrection: return "alg1_with_correction";
  }
  throw std::invalid_argument("pipeline_name: unknown pipeline");
}

Pipeline parse_pipeline(const std::string& name) {
  if (name == "no_fusion") return Pipeline::kNoFusion;
  if (name == "nms") return Pipeline::kNms;
  if (name == "alg1") return Pipeline::kAlg1;
  if (name == "alg1_with_correction") return Pipeline::kAlg1WithCorrection;
  throw std::invalid_argument("unknown pipeline '" + name + "'");
}

EvalFrame to_eval_frame(const Frame& frame, const SelectConfig& select) {
  EvalFrame out;
  const Pose2& ego_true = frame.cav_true_poses.at(0);
  out.gt.reserve(frame.gt_boxes.size());
  for (const BBox7& b : frame.gt_boxes) out.gt.push_back(transform_box(b, kWorld, ego_true));

  auto roundtrip = [&](const Cpm& m) {
    std::vector<std::uint8_t> bytes = encode_cpm(m);
    out.cpm_sizes.push_back(bytes.size());
    return decode_cpm(bytes);
  };
  out.ego = roundtrip(build_cpm(frame, 0, select));
  for (int slot : frame.coop_cavs) out.coop.push_back(roundtrip(build_cpm(frame, slot, select)));
  return out;
}

std::vector<EvalFrame> load_eval_frames(const std::filesystem::path& dir) {
  std::vector<std::filesystem::path> containers;
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".cpms")
      containers.push_back(entry.path());
  }
  std::sort(containers.begin(), containers.end());
  if (containers.empty()) throw std::runtime_error("no .cpms files under " + dir.string());

  std::vector<EvalFrame> frames;
  for (const std::filesystem::path& path : containers) {
    EvalFrame f;
    std::vector<Cpm> cpms = read_cpm_container(path);
    if (cpms.empty()) throw std::runtime_error("empty container: " + path.string());
    for (const Cpm& m : cpms) f.cpm_sizes.push_back(encode_cpm(m).size());
    f.ego = std::move(cpms.front());
    f.coop.assign(std::make_move_iterator(cpms.begin() + 1), std::make_move_iterator(cpms.end()));

    std::filesystem::path gt_path = path;
    gt_path.replace_extension("");  // drop .cpms
    gt_path += ".gt.txt";
    std::ifstream gt(gt_path);
    if (!gt) throw std::runtime_error("missing ground-truth sidecar: " + gt_path.string());
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(gt, line)) {
      ++line_no;
      if (line.empty()) continue;
      std::istringstream ss(line);
      BBox7 b;
      if (!(ss >> b.x >> b.y >> b.z >> b.w >> b.l >> b.h >> b.r))
        throw std::runtime_error(gt_path.string() + ":" + std::to_string(line_no) +
                                 ": malformed ground-truth line");
      f.gt.push_back(b);
    }
    frames.push_back(std::move(f));
  }
  return frames;
}

std::vector<bool> match_to_gt(const std::vector<Detection>& preds, const std::vector<BBox7>& gt,
                              double iou_thr) {
  validate_match_thr(iou_thr);
  std::vector<std::size_t> order(preds.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return preds[a].score > preds[b].score; });

  std::vector<bool> flags(preds.size(), false);
  std::vector<bool> taken(gt.size(), false);
  for (std::size_t i : order) {
    int best = -1;
    double best_iou = -1.0;
    for (std::size_t g = 0; g < gt.size(); ++g) {
      if (taken[g]) continue;
      double iou = bev_iou(preds[i].box, gt[g]);
      if (iou >= iou_thr && iou > best_iou) {
        best_iou = iou;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = true;
      flags[i] = true;
    }
  }
  return flags;
}

namespace {

struct PooledPred {
  double score;
  std::size_t frame;
  std::size_t index;
  bool tp;
};

ApResult ap_from_pool(std::vector<PooledPred> pool, std::size_t n_gt, double iou_thr) {
  std::sort(pool.begin(), pool.end(), [](const PooledPred& a, const PooledPred& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.frame != b.frame) return a.frame < b.frame;
    return a.index < b.index;
  });

  ApResult res;
  res.iou_thr = iou_thr;
  res.n_gt = n_gt;
  res.n_pred = pool.size();
  if (n_gt == 0) {
    res.ap = pool.empty() ? 1.0 : 0.0;
    return res;
  }
  if (pool.empty()) {
    res.ap = 0.0;
    return res;
  }

  std::size_t tp_cum = 0;
  std::vector<double> precision(pool.size());
  std::vector<double> recall(pool.size());
  res.curve.reserve(pool.size());
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pool[i].tp) ++tp_cum;
    precision[i] = static_cast<double>(tp_cum) / static_cast<double>(i + 1);
    recall[i] = static_cast<double>(tp_cum) / static_cast<double>(n_gt);
    res.curve.push_back(PrPoint{recall[i], precision[i], pool[i].score});
  }

  // All-point interpolation: every TP contributes (1/n_gt) times the best
  // precision achieved at or beyond its recall.
  double env = 0.0;
  double ap = 0.0;
  for (std::size_t i = pool.size(); i-- > 0;) {
    env = std::max(env, precision[i]);
    if (pool[i].tp) ap += env / static_cast<double>(n_gt);
  }
  res.ap = ap;
  return res;
}

}  // namespace

ApResult average_precision(const std::vector<Detection>& preds, const std::vector<BBox7>& gt,
                           double iou_thr) {
  return average_precision_pooled({preds}, {gt}, iou_thr);
}

ApResult average_precision_pooled(const std::vector<std::vector<Detection>>& preds,
                                  const std::vector<std::vector<BBox7>>& gt, double iou_thr) {
  if (preds.size() != gt.size())
    throw std::invalid_argument("average_precision_pooled: frame count mismatch");
  std::vector<PooledPred> pool;
  std::size_t n_gt = 0;
  for (std::size_t f = 0; f < preds.size(); ++f) {
    n_gt += gt[f].size();
    std::vector<bool> flags = match_to_gt(preds[f], gt[f], iou_thr);
    for (std::size_t i = 0; i < preds[f].size(); ++i)
      pool.push_back(PooledPred{preds[f][i].score, f, i, flags[i]});
  }
  return ap_from_pool(std::move(pool), n_gt, iou_thr);
}

namespace {

Detection make_self_box(const PipelineConfig& cfg) {
  return Detection{BBox7{0.0, 0.0, 0.5 * cfg.self_h, cfg.self_w, cfg.self_l, cfg.self_h, 0.0}, 1.0};
}

}  // namespace

std::vector<Detection> run_pipeline(const EvalFrame& frame, const PipelineConfig& cfg) {
  if (cfg.n_v < 0) throw std::invalid_argument("run_pipeline: negative n_v");
  const std::size_t n_used = std::min<std::size_t>(static_cast<std::size_t>(cfg.n_v), frame.coop.size());
  const bool ego_only = cfg.pipeline == Pipeline::kNoFusion || n_used == 0;

  std::vector<Detection> preds;
  std::vector<Detection> selves;
  selves.push_back(make_self_box(cfg));

  if (ego_only) {
    preds = frame.ego.proposals;
  } else {
    // Per-CAV proposal lists in the ego frame, pose-corrected when enabled.
    std::vector<std::pair<int, std::vector<Detection>>> per_cav;
    per_cav.emplace_back(0, frame.ego.proposals);
    for (std::size_t k = 0; k < n_used; ++k) {
      const Cpm& cpm = frame.coop[k];
      std::vector<Detection> boxes;
      boxes.reserve(cpm.proposals.size());
      for (const Detection& d : cpm.proposals)
        boxes.push_back(Detection{transform_box(d.box, cpm.pose, frame.ego.pose), d.score});
      Detection self = make_self_box(cfg);
      self.box = transform_box(self.box, cpm.pose, frame.ego.pose);

      if (cfg.pipeline == Pipeline::kAlg1WithCorrection) {
        std::vector<LandmarkPoint> coop_lms;
        coop_lms.reserve(cpm.correction_points.size());
        for (const LandmarkPoint& p : cpm.correction_points) {
          Vec2 q = transform_point(Vec2{p.x, p.y}, cpm.pose, frame.ego.pose);
          coop_lms.push_back(LandmarkPoint{q.x, q.y, p.cls});
        }
        PoseCorrection corr = correct_cpm(frame.ego.correction_points, coop_lms, cfg.consensus);
        if (corr.confident) {
          RigidTransform2 t{corr.dx, corr.dy, corr.dyaw};
          for (Detection& d : boxes) d.box = apply_rigid(d.box, t);
          self.box = apply_rigid(self.box, t);
        }
      }
      per_cav.emplace_back(static_cast<int>(k) + 1, std::move(boxes));
      selves.push_back(self);
    }

    if (cfg.pipeline == Pipeline::kNms) {
      std::vector<Detection> all;
      for (auto& [id, dets] : per_cav) all.insert(all.end(), dets.begin(), dets.end());
      preds = nms_fuse(all, cfg.nms_fusion_iou);
    } else {
      preds = fuse_proposals(per_cav, cfg.match);
    }
  }

  preds.insert(preds.end(), selves.begin(), selves.end());

  std::vector<Detection> gated;
  gated.reserve(preds.size());
  for (const Detection& d : preds)
    if (std::hypot(d.box.x, d.box.y) <= cfg.range_gate) gated.push_back(d);

  return nms_fuse(gated, cfg.final_nms_iou);
}

std::vector<ApResult> evaluate_run(const std::vector<EvalFrame>& frames, const PipelineConfig& cfg,
                                   const std::vector<double>& iou_list, int jobs) {
  std::vector<const EvalFrame*> qualifying;
  for (const EvalFrame& f : frames)
    if (f.coop.size() >= static_cast<std::size_t>(std::max(cfg.n_v, 0))) qualifying.push_back(&f);
  if (qualifying.empty())
    throw std::runtime_error("no qualifying frames for n_v=" + std::to_string(cfg.n_v));

  std::vector<std::vector<Detection>> preds(qualifying.size());
  std::vector<std::vector<BBox7>> gts(qualifying.size());
  run_parallel(qualifying.size(), jobs, [&](std::size_t i) {
    preds[i] = run_pipeline(*qualifying[i], cfg);
    gts[i] = qualifying[i]->gt;
  });

  std::vector<ApResult> out;
  out.reserve(iou_list.size());
  for (double iou : iou_list) out.push_back(average_precision_pooled(preds, gts, iou));
  return out;
}

}  // namespace coopfuse
