#include "coopfuse/config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace coopfuse {
namespace {

using nlohmann::json;

class Section {
 public:
  Section(const json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj.is_object()) throw ConfigError(prefix_ + ": expected an object");
  }

  ~Section() = default;

  void number(const char* key, double& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number()) throw ConfigError(field(key) + ": expected a number");
    out = v->get<double>();
    if (!std::isfinite(out)) throw ConfigError(field(key) + ": non-finite value");
  }

  void integer(const char* key, int& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_number_integer()) throw ConfigError(field(key) + ": expected an integer");
    out = v->get<int>();
  }

  void boolean(const char* key, bool& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_boolean()) throw ConfigError(field(key) + ": expected a boolean");
    out = v->get<bool>();
  }

  void text(const char* key, std::string& out) {
    const json* v = take(key);
    if (!v) return;
    if (!v->is_string()) throw ConfigError(field(key) + ": expected a string");
    out = v->get<std::string>();
  }

  const json* take(const char* key) {
    seen_.push_back(key);
    auto it = obj_.find(key);
    return it == obj_.end() ? nullptr : &*it;
  }

  // Call after reading every known key.
  void reject_unknown() const {
    for (const auto& [key, value] : obj_.items()) {
      if (std::find(seen_.begin(), seen_.end(), key) == seen_.end())
        throw ConfigError(field(key.c_str()) + ": unknown field");
    }
  }

  std::string field(const char* key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

 private:
  const json& obj_;
  std::string prefix_;
  std::vector<std::string> seen_;
};

void parse_sim(const json& j, SimConfig& c) {
  Section s(j, "sim");
  s.integer("n_vehicles", c.n_vehicles);
  s.integer("n_cavs", c.n_cavs);
  s.number("map_extent", c.map_extent);
  s.number("street_spacing", c.street_spacing);
  s.number("lane_offset", c.lane_offset);
  s.number("dim_w", c.dim_w);
  s.number("dim_l", c.dim_l);
  s.number("dim_h", c.dim_h);
  s.number("dim_jitter", c.dim_jitter);
  s.number("comm_range", c.comm_range);
  s.number("det_range", c.det_range);
  s.integer("max_coop", c.max_coop);
  s.number("pole_density", c.pole_density);
  s.integer("wall_count", c.wall_count);
  s.number("wall_point_spacing", c.wall_point_spacing);
  s.integer("surface_points_per_vehicle", c.surface_points_per_vehicle);
  s.number("loc_sigma_xy", c.loc_sigma_xy);
  s.number("loc_sigma_yaw_deg", c.loc_sigma_yaw_deg);
  if (const json* n = s.take("noise")) {
    Section sn(*n, "sim.noise");
    sn.number("pos_sigma_base", c.noise.pos_sigma_base);
    sn.number("pos_sigma_per_meter", c.noise.pos_sigma_per_meter);
    sn.number("z_sigma", c.noise.z_sigma);
    sn.number("yaw_sigma_deg", c.noise.yaw_sigma_deg);
    sn.number("dim_sigma", c.noise.dim_sigma);
    sn.number("heading_flip_prob", c.noise.heading_flip_prob);
    sn.number("miss_base", c.noise.miss_base);
    sn.number("miss_per_meter", c.noise.miss_per_meter);
    sn.number("fp_rate", c.noise.fp_rate);
    sn.number("score_decay", c.noise.score_decay);
    sn.number("score_sigma", c.noise.score_sigma);
    sn.number("landmark_sigma", c.noise.landmark_sigma);
    sn.reject_unknown();
  }
  s.reject_unknown();
}

void parse_select(const json& j, SelectConfig& c) {
  Section s(j, "select");
  s.integer("n_kpts", c.n_kpts);
  s.integer("n_ch", c.n_ch);
  s.integer("k_p", c.k_p);
  s.integer("k_fw", c.k_fw);
  s.reject_unknown();
}

void parse_match(const json& j, MatchConfig& c) {
  Section s(j, "match");
  s.number("iou_thr", c.iou_thr);
  s.boolean("literal_flip", c.literal_flip);
  std::string order;
  s.text("seed_order", order);
  if (!order.empty()) {
    if (order == "descending_score")
      c.seed_order = SeedOrder::kDescendingScore;
    else if (order == "input_order")
      c.seed_order = SeedOrder::kInputOrder;
    else
      throw ConfigError("match.seed_order: expected 'descending_score' or 'input_order'");
  }
  s.reject_unknown();
}

void parse_consensus(const json& j, ConsensusConfig& c) {
  Section s(j, "consensus");
  s.number("search_x", c.search_x);
  s.number("search_y", c.search_y);
  s.number("search_yaw_deg", c.search_yaw_deg);
  s.number("res_xy", c.res_xy);
  s.number("res_yaw_deg", c.res_yaw_deg);
  s.number("inlier_dist", c.inlier_dist);
  s.integer("min_consensus", c.min_consensus);
  s.reject_unknown();
}

}  // namespace

AppConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  AppConfig cfg;
  Section top(root, "");
  if (const json* j = top.take("sim")) parse_sim(*j, cfg.sim);
  if (const json* j = top.take("select")) parse_select(*j, cfg.select);
  if (const json* j = top.take("match")) parse_match(*j, cfg.match);
  if (const json* j = top.take("consensus")) parse_consensus(*j, cfg.consensus);
  if (const json* j = top.take("eval")) {
    Section s(*j, "eval");
    s.number("nms_fusion_iou", cfg.nms_fusion_iou);
    s.number("final_nms_iou", cfg.final_nms_iou);
    s.reject_unknown();
  }
  top.reject_unknown();
  validate_config(cfg);
  return cfg;
}

AppConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

void validate_config(const AppConfig& cfg) {
  auto bad = [](const std::string& field, const char* why) {
    throw ConfigError(field + ": " + why);
  };
  const SimConfig& s = cfg.sim;
  if (s.n_vehicles < 1) bad("sim.n_vehicles", "must be at least 1");
  if (s.n_cavs < 1) bad("sim.n_cavs", "must be at least 1");
  if (s.n_cavs > s.n_vehicles) bad("sim.n_cavs", "must not exceed sim.n_vehicles");
  if (!(s.map_extent > 0.0)) bad("sim.map_extent", "must be positive");
  if (!(s.street_spacing > 0.0)) bad("sim.street_spacing", "must be positive");
  if (s.lane_offset < 0.0) bad("sim.lane_offset", "must be non-negative");
  if (!(s.dim_w > 0.0)) bad("sim.dim_w", "must be positive");
  if (!(s.dim_l > 0.0)) bad("sim.dim_l", "must be positive");
  if (!(s.dim_h > 0.0)) bad("sim.dim_h", "must be positive");
  if (s.dim_jitter < 0.0 || s.dim_jitter >= 1.0) bad("sim.dim_jitter", "must be in [0, 1)");
  if (!(s.comm_range > 0.0)) bad("sim.comm_range", "must be positive");
  if (!(s.det_range > 0.0)) bad("sim.det_range", "must be positive");
  if (s.max_coop < 0) bad("sim.max_coop", "must be non-negative");
  if (s.pole_density < 0.0) bad("sim.pole_density", "must be non-negative");
  if (s.wall_count < 0) bad("sim.wall_count", "must be non-negative");
  if (!(s.wall_point_spacing > 0.0)) bad("sim.wall_point_spacing", "must be positive");
  if (s.surface_points_per_vehicle < 0) bad("sim.surface_points_per_vehicle", "must be non-negative");
  if (s.loc_sigma_xy < 0.0) bad("sim.loc_sigma_xy", "must be non-negative");
  if (s.loc_sigma_yaw_deg < 0.0) bad("sim.loc_sigma_yaw_deg", "must be non-negative");
  const NoiseModel& n = s.noise;
  if (n.pos_sigma_base < 0.0) bad("sim.noise.pos_sigma_base", "must be non-negative");
  if (n.pos_sigma_per_meter < 0.0) bad("sim.noise.pos_sigma_per_meter", "must be non-negative");
  if (n.z_sigma < 0.0) bad("sim.noise.z_sigma", "must be non-negative");
  if (n.yaw_sigma_deg < 0.0) bad("sim.noise.yaw_sigma_deg", "must be non-negative");
  if (n.dim_sigma < 0.0) bad("sim.noise.dim_sigma", "must be non-negative");
  if (n.heading_flip_prob < 0.0 || n.heading_flip_prob > 1.0)
    bad("sim.noise.heading_flip_prob", "must be in [0, 1]");
  if (n.miss_base < 0.0 || n.miss_base > 1.0) bad("sim.noise.miss_base", "must be in [0, 1]");
  if (n.miss_per_meter < 0.0) bad("sim.noise.miss_per_meter", "must be non-negative");
  if (n.fp_rate < 0.0) bad("sim.noise.fp_rate", "must be non-negative");
  if (n.score_decay < 0.0) bad("sim.noise.score_decay", "must be non-negative");
  if (n.score_sigma < 0.0) bad("sim.noise.score_sigma", "must be non-negative");
  if (n.landmark_sigma < 0.0) bad("sim.noise.landmark_sigma", "must be non-negative");

  const SelectConfig& k = cfg.select;
  if (k.n_kpts < 0) bad("select.n_kpts", "must be non-negative");
  if (k.n_ch < 0 || k.n_ch > 255) bad("select.n_ch", "must be in [0, 255]");
  if (k.k_p < 0) bad("select.k_p", "must be non-negative");
  if (k.k_fw < 0) bad("select.k_fw", "must be non-negative");

  if (!std::isfinite(cfg.match.iou_thr) || cfg.match.iou_thr < 0.0 || cfg.match.iou_thr >= 1.0)
    bad("match.iou_thr", "must be in [0, 1)");

  const ConsensusConfig& c = cfg.consensus;
  if (c.search_x < 0.0) bad("consensus.search_x", "must be non-negative");
  if (c.search_y < 0.0) bad("consensus.search_y", "must be non-negative");
  if (c.search_yaw_deg < 0.0) bad("consensus.search_yaw_deg", "must be non-negative");
  if (!(c.res_xy > 0.0)) bad("consensus.res_xy", "must be positive");
  if (!(c.res_yaw_deg > 0.0)) bad("consensus.res_yaw_deg", "must be positive");
  if (!(c.inlier_dist > 0.0)) bad("consensus.inlier_dist", "must be positive");
  if (c.min_consensus < 1) bad("consensus.min_consensus", "must be at least 1");

  if (cfg.nms_fusion_iou < 0.0 || cfg.nms_fusion_iou >= 1.0)
    bad("eval.nms_fusion_iou", "must be in [0, 1)");
  if (cfg.final_nms_iou < 0.0 || cfg.final_nms_iou >= 1.0)
    bad("eval.final_nms_iou", "must be in [0, 1)");
}

std::string config_to_json(const AppConfig& cfg) {
  json j;
  const SimConfig& s = cfg.sim;
  j["sim"] = {
      {"n_vehicles", s.n_vehicles},
      {"n_cavs", s.n_cavs},
      {"map_extent", s.map_extent},
      {"street_spacing", s.street_spacing},
      {"lane_offset", s.lane_offset},
      {"dim_w", s.dim_w},
      {"dim_l", s.dim_l},
      {"dim_h", s.dim_h},
      {"dim_jitter", s.dim_jitter},
      {"comm_range", s.comm_range},
      {"det_range", s.det_range},
      {"max_coop", s.max_coop},
      {"pole_density", s.pole_density},
      {"wall_count", s.wall_count},
      {"wall_point_spacing", s.wall_point_spacing},
      {"surface_points_per_vehicle", s.surface_points_per_vehicle},
      {"loc_sigma_xy", s.loc_sigma_xy},
      {"loc_sigma_yaw_deg", s.loc_sigma_yaw_deg},
      {"noise",
       {
           {"pos_sigma_base", s.noise.pos_sigma_base},
           {"pos_sigma_per_meter", s.noise.pos_sigma_per_meter},
           {"z_sigma", s.noise.z_sigma},
           {"yaw_sigma_deg", s.noise.yaw_sigma_deg},
           {"dim_sigma", s.noise.dim_sigma},
           {"heading_flip_prob", s.noise.heading_flip_prob},
           {"miss_base", s.noise.miss_base},
           {"miss_per_meter", s.noise.miss_per_meter},
           {"fp_rate", s.noise.fp_rate},
           {"score_decay", s.noise.score_decay},
           {"score_sigma", s.noise.score_sigma},
           {"landmark_sigma", s.noise.landmark_sigma},
       }},
  };
  j["select"] = {
      {"n_kpts", cfg.select.n_kpts},
      {"n_ch", cfg.select.n_ch},
      {"k_p", cfg.select.k_p},
      {"k_fw", cfg.select.k_fw},
  };
  j["match"] = {
      {"iou_thr", cfg.match.iou_thr},
      {"literal_flip", cfg.match.literal_flip},
      {"seed_order",
       cfg.match.seed_order == SeedOrder::kDescendingScore ? "descending_score" : "input_order"},
  };
  j["consensus"] = {
      {"search_x", cfg.consensus.search_x},
      {"search_y", cfg.consensus.search_y},
      {"search_yaw_deg", cfg.consensus.search_yaw_deg},
      {"res_xy", cfg.consensus.res_xy},
      {"res_yaw_deg", cfg.consensus.res_yaw_deg},
      {"inlier_dist", cfg.consensus.inlier_dist},
      {"min_consensus", cfg.consensus.min_consensus},
  };
  j["eval"] = {
      {"nms_fusion_iou", cfg.nms_fusion_iou},
      {"final_nms_iou", cfg.final_nms_iou},
  };
  return j.dump(2) + "\n";
}

PipelineConfig make_pipeline_config(const AppConfig& cfg, Pipeline pipeline, int n_v) {
  PipelineConfig p;
  p.pipeline = pipeline;
  p.n_v = n_v;
  p.match = cfg.match;
  p.consensus = cfg.consensus;
  p.nms_fusion_iou = cfg.nms_fusion_iou;
  p.final_nms_iou = cfg.final_nms_iou;
  p.range_gate = cfg.sim.det_range;
  p.self_w = cfg.sim.dim_w;
  p.self_l = cfg.sim.dim_l;
  p.self_h = cfg.sim.dim_h;
  return p;
}

}  // namespace coopfuse
