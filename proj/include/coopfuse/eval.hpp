#pragma once

#include <string>
#include <vector>

#include "coopfuse/cpm.hpp"
#include "coopfuse/localization.hpp"
#include "coopfuse/matching.hpp"
#include "coopfuse/sim.hpp"

namespace coopfuse {

enum class Pipeline {
  kNoFusion,
  kNms,
  kAlg1,
  kAlg1WithCorrection,
};

std::string pipeline_name(Pipeline p);
// Accepts "no_fusion", "nms", "alg1", "alg1_with_correction".
Pipeline parse_pipeline(const std::string& name);

struct PipelineConfig {
  Pipeline pipeline = Pipeline::kAlg1;
  // Cooperative CPMs consumed per frame; 0 degrades every pipeline to the
  // ego-only path.
  int n_v = 4;
  MatchConfig match;
  ConsensusConfig consensus;
  double nms_fusion_iou = 0.3;   // IoU threshold of the NMS fusion baseline
  double final_nms_iou = 0.01;   // near-duplicate suppression after fusion
  double range_gate = 57.6;      // m, predictions kept within this range of ego
  double self_w = 1.98;          // self-report box dimensions
  double self_l = 4.41;
  double self_h = 1.64;
};

// Frame as the evaluator consumes it: ground truth in the ego true-pose
// frame, plus the ego CPM and cooperative CPMs exactly as they came off the
// wire. cpm_sizes holds the encoded byte size of each CPM, ego first.
struct EvalFrame {
  std::vector<BBox7> gt;
  Cpm ego;
  std::vector<Cpm> coop;
  std::vector<std::size_t> cpm_sizes;
};

// Runs a simulated frame through the wire format once so in-memory and
// file-loaded evaluation share one code path.
EvalFrame to_eval_frame(const Frame& frame, const SelectConfig& select);

// Loads every frame_*.cpms / frame_*.gt.txt pair under dir, ordered by name.
std::vector<EvalFrame> load_eval_frames(const std::filesystem::path& dir);

// Greedy score-ordered one-to-one matching; flag per prediction (input
// order), true when it claimed an unmatched ground-truth box at IoU >= thr.
std::vector<bool> match_to_gt(const std::vector<Detection>& preds, const std::vector<BBox7>& gt,
                              double iou_thr);

struct PrPoint {
  double recall = 0.0;
  double precision = 0.0;
  double score = 0.0;
};

struct ApResult {
  double iou_thr = 0.0;
  double ap = 0.0;
  std::size_t n_gt = 0;
  std::size_t n_pred = 0;
  std::vector<PrPoint> curve;
};

// All-point interpolated AP over one prediction/ground-truth set.
ApResult average_precision(const std::vector<Detection>& preds, const std::vector<BBox7>& gt,
                           double iou_thr);

// Pooled AP across frames: per-frame matching, then one globally
// score-sorted PR curve. No ground truth anywhere: AP is 1 without
// predictions, else 0.
ApResult average_precision_pooled(const std::vector<std::vector<Detection>>& preds,
                                  const std::vector<std::vector<BBox7>>& gt, double iou_thr);

// Full detection pipeline for one frame. Output boxes are in the ego frame,
// range-gated and deduplicated.
std::vector<Detection> run_pipeline(const EvalFrame& frame, const PipelineConfig& cfg);

// Pipeline over every qualifying frame (those with at least n_v cooperative
// CPMs), pooled AP per IoU threshold. Throws std::runtime_error when no
// frame qualifies. jobs > 1 parallelizes across frames; results do not
// depend on jobs.
std::vector<ApResult> evaluate_run(const std::vector<EvalFrame>& frames, const PipelineConfig& cfg,
                                   const std::vector<double>& iou_list, int jobs = 1);

}  // namespace coopfuse
