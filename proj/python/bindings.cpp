#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "coopfuse/config.hpp"
#include "coopfuse/cpm.hpp"
#include "coopfuse/eval.hpp"
#include "coopfuse/geometry.hpp"
#include "coopfuse/keypoints.hpp"
#include "coopfuse/localization.hpp"
#include "coopfuse/matching.hpp"
#include "coopfuse/rng.hpp"
#include "coopfuse/sim.hpp"

namespace py = pybind11;
using namespace coopfuse;

PYBIND11_MODULE(_coopfuse, m) {
  m.doc() = "Keypoints-based cooperative vehicle detection core";
  m.attr("__version__") = "0.1.0";

  py::register_exception<EncodeError>(m, "EncodeError");
  py::register_exception<DecodeError>(m, "DecodeError");
  py::register_exception<ConfigError>(m, "ConfigError");

  py::class_<Vec2>(m, "Vec2")
      .def(py::init<>())
      .def(py::init([](double x, double y) { return Vec2{x, y}; }), py::arg("x"), py::arg("y"))
      .def_readwrite("x", &Vec2::x)
      .def_readwrite("y", &Vec2::y)
      .def("__repr__", [](const Vec2& v) {
        return "Vec2(" + std::to_string(v.x) + ", " + std::to_string(v.y) + ")";
      });

  py::class_<Vec3>(m, "Vec3")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z) { return Vec3{x, y, z}; }), py::arg("x"),
           py::arg("y"), py::arg("z"))
      .def_readwrite("x", &Vec3::x)
      .def_readwrite("y", &Vec3::y)
      .def_readwrite("z", &Vec3::z);

  py::class_<Pose2>(m, "Pose2")
      .def(py::init<>())
      .def(py::init([](double x, double y, double yaw) { return Pose2{x, y, yaw}; }), py::arg("x"),
           py::arg("y"), py::arg("yaw"))
      .def_readwrite("x", &Pose2::x)
      .def_readwrite("y", &Pose2::y)
      .def_readwrite("yaw", &Pose2::yaw);

  py::class_<BBox7>(m, "BBox7")
      .def(py::init<>())
      .def(py::init([](double x, double y, double z, double w, double l, double h, double r) {
             return BBox7{x, y, z, w, l, h, r};
           }),
           py::arg("x"), py::arg("y"), py::arg("z"), py::arg("w"), py::arg("l"), py::arg("h"),
           py::arg("r"))
      .def_readwrite("x", &BBox7::x)
      .def_readwrite("y", &BBox7::y)
      .def_readwrite("z", &BBox7::z)
      .def_readwrite("w", &BBox7::w)
      .def_readwrite("l", &BBox7::l)
      .def_readwrite("h", &BBox7::h)
      .def_readwrite("r", &BBox7::r);

  py::class_<Detection>(m, "Detection")
      .def(py::init<>())
      .def(py::init([](const BBox7& b, double s) { return Detection{b, s}; }), py::arg("box"),
           py::arg("score"))
      .def_readwrite("box", &Detection::box)
      .def_readwrite("score", &Detection::score);

  m.def("normalize_angle", &normalize_angle, py::arg("a"));
  m.def("angle_diff_abs", &angle_diff_abs, py::arg("a"), py::arg("b"));
  m.def("bev_iou", &bev_iou, py::arg("a"), py::arg("b"));
  m.def("iou_3d", &iou_3d, py::arg("a"), py::arg("b"));
  m.def("transform_box", &transform_box, py::arg("box"), py::arg("from_pose"), py::arg("to_pose"));
  m.def("transform_point",
        static_cast<Vec2 (*)(const Vec2&, const Pose2&, const Pose2&)>(&transform_point),
        py::arg("p"), py::arg("from_pose"), py::arg("to_pose"));
  m.def("transform_point3",
        static_cast<Vec3 (*)(const Vec3&, const Pose2&, const Pose2&)>(&transform_point),
        py::arg("p"), py::arg("from_pose"), py::arg("to_pose"));

  py::enum_<SeedOrder>(m, "SeedOrder")
      .value("DESCENDING_SCORE", SeedOrder::kDescendingScore)
      .value("INPUT_ORDER", SeedOrder::kInputOrder);

  py::class_<MatchConfig>(m, "MatchConfig")
      .def(py::init<>())
      .def_readwrite("iou_thr", &MatchConfig::iou_thr)
      .def_readwrite("literal_flip", &MatchConfig::literal_flip)
      .def_readwrite("seed_order", &MatchConfig::seed_order);

  py::class_<Cluster>(m, "Cluster")
      .def(py::init<>())
      .def_readwrite("members", &Cluster::members)
      .def_readwrite("source_ids", &Cluster::source_ids);

  m.def("cluster_proposals",
        static_cast<std::vector<Cluster> (*)(const std::vector<Detection>&, const MatchConfig&)>(
            &cluster_proposals),
        py::arg("dets"), py::arg("cfg") = MatchConfig{});
  m.def("align_cluster_directions", &align_cluster_directions, py::arg("cluster"),
        py::arg("cfg") = MatchConfig{});
  m.def("merge_cluster", &merge_cluster, py::arg("cluster"));
  m.def("fuse_proposals", &fuse_proposals, py::arg("per_cav"), py::arg("cfg") = MatchConfig{});
  m.def("nms_fuse", &nms_fuse, py::arg("dets"), py::arg("nms_iou"));

  py::enum_<LandmarkClass>(m, "LandmarkClass")
      .value("POLE", LandmarkClass::kPole)
      .value("WALL_FENCE", LandmarkClass::kWallFence)
      .value("VEHICLE_CENTER", LandmarkClass::kVehicleCenter);

  py::class_<LandmarkPoint>(m, "LandmarkPoint")
      .def(py::init<>())
      .def(py::init([](double x, double y, LandmarkClass c) { return LandmarkPoint{x, y, c}; }),
           py::arg("x"), py::arg("y"), py::arg("cls"))
      .def_readwrite("x", &LandmarkPoint::x)
      .def_readwrite("y", &LandmarkPoint::y)
      .def_readwrite("cls", &LandmarkPoint::cls);

  py::class_<ConsensusConfig>(m, "ConsensusConfig")
      .def(py::init<>())
      .def_readwrite("search_x", &ConsensusConfig::search_x)
      .def_readwrite("search_y", &ConsensusConfig::search_y)
      .def_readwrite("search_yaw_deg", &ConsensusConfig::search_yaw_deg)
      .def_readwrite("res_xy", &ConsensusConfig::res_xy)
      .def_readwrite("res_yaw_deg", &ConsensusConfig::res_yaw_deg)
      .def_readwrite("inlier_dist", &ConsensusConfig::inlier_dist)
      .def_readwrite("min_consensus", &ConsensusConfig::min_consensus);

  py::class_<RigidTransform2>(m, "RigidTransform2")
      .def(py::init<>())
      .def(py::init([](double dx, double dy, double dyaw) { return RigidTransform2{dx, dy, dyaw}; }),
           py::arg("dx"), py::arg("dy"), py::arg("dyaw"))
      .def_readwrite("dx", &RigidTransform2::dx)
      .def_readwrite("dy", &RigidTransform2::dy)
      .def_readwrite("dyaw", &RigidTransform2::dyaw);

  py::class_<PoseCorrection>(m, "PoseCorrection")
      .def(py::init<>())
      .def_readwrite("dx", &PoseCorrection::dx)
      .def_readwrite("dy", &PoseCorrection::dy)
      .def_readwrite("dyaw", &PoseCorrection::dyaw)
      .def_readwrite("consensus", &PoseCorrection::consensus)
      .def_readwrite("inliers", &PoseCorrection::inliers)
      .def_readwrite("confident", &PoseCorrection::confident);

  m.def("consensus_grid", &consensus_grid, py::arg("cfg") = ConsensusConfig{});
  m.def("max_consensus_search", &max_consensus_search, py::arg("ego"), py::arg("coop"),
        py::arg("cfg") = ConsensusConfig{});
  m.def("refine_alignment", &refine_alignment, py::arg("ego_coop_pairs"));
  m.def("correct_cpm", &correct_cpm, py::arg("ego"), py::arg("coop"),
        py::arg("cfg") = ConsensusConfig{});
  m.def("apply_rigid",
        static_cast<BBox7 (*)(const BBox7&, const RigidTransform2&)>(&apply_rigid), py::arg("box"),
        py::arg("t"));
  m.def("apply_rigid_point",
        static_cast<Vec2 (*)(const Vec2&, const RigidTransform2&)>(&apply_rigid), py::arg("p"),
        py::arg("t"));

  py::class_<SelectConfig>(m, "SelectConfig")
      .def(py::init<>())
      .def_readwrite("n_kpts", &SelectConfig::n_kpts)
      .def_readwrite("n_ch", &SelectConfig::n_ch)
      .def_readwrite("k_p", &SelectConfig::k_p)
      .def_readwrite("k_fw", &SelectConfig::k_fw);

  py::class_<KeypointSet>(m, "KeypointSet")
      .def(py::init<>())
      .def_readwrite("coords", &KeypointSet::coords)
      .def_readwrite("features", &KeypointSet::features)
      .def_readwrite("n_ch", &KeypointSet::n_ch);

  m.def("fps_sample",
        static_cast<std::vector<int> (*)(const std::vector<Vec3>&, int)>(&fps_sample),
        py::arg("pts"), py::arg("n"));
  m.def("fps_sample2d",
        static_cast<std::vector<int> (*)(const std::vector<Vec2>&, int)>(&fps_sample),
        py::arg("pts"), py::arg("n"));
  m.def("points_in_boxes", &points_in_boxes, py::arg("pts"), py::arg("boxes"));
  m.def("select_correction_points", &select_correction_points, py::arg("landmarks"), py::arg("k_p"),
        py::arg("k_fw"));
  m.def("synthesize_features", &synthesize_features, py::arg("coords"), py::arg("n_ch"),
        py::arg("seed"));

  py::class_<Cpm>(m, "Cpm")
      .def(py::init<>())
      .def_readwrite("sender_id", &Cpm::sender_id)
      .def_readwrite("pose", &Cpm::pose)
      .def_readwrite("proposals", &Cpm::proposals)
      .def_readwrite("keypoints", &Cpm::keypoints)
      .def_readwrite("correction_points", &Cpm::correction_points);

  py::class_<GridMapPayload>(m, "GridMapPayload")
      .def(py::init<>())
      .def_readwrite("width_cells", &GridMapPayload::width_cells)
      .def_readwrite("height_cells", &GridMapPayload::height_cells)
      .def_readwrite("n_ch", &GridMapPayload::n_ch)
      .def_readwrite("values", &GridMapPayload::values);

  m.def("encode_cpm", [](const Cpm& c) {
    std::vector<std::uint8_t> bytes = encode_cpm(c);
    return py::bytes(reinterpret_cast<const char*>(bytes.data()), bytes.size());
  }, py::arg("cpm"));
  m.def("decode_cpm", [](const py::bytes& b) {
    std::string_view view = b;
    std::vector<std::uint8_t> bytes(view.begin(), view.end());
    return decode_cpm(bytes);
  }, py::arg("data"));
  m.def("cpm_size", &cpm_size, py::arg("cpm"));
  m.def("gridmap_size_dense", &gridmap_size_dense, py::arg("gridmap"));
  m.def("gridmap_size_sparse", &gridmap_size_sparse, py::arg("gridmap"));
  m.def("gridmap_equivalent", &gridmap_equivalent, py::arg("cpm"), py::arg("range"),
        py::arg("cell_size"));
  m.def("write_cpm_container", &write_cpm_container, py::arg("path"), py::arg("cpms"));
  m.def("read_cpm_container", &read_cpm_container, py::arg("path"));

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init<>())
      .def_readwrite("pos_sigma_base", &NoiseModel::pos_sigma_base)
      .def_readwrite("pos_sigma_per_meter", &NoiseModel::pos_sigma_per_meter)
      .def_readwrite("z_sigma", &NoiseModel::z_sigma)
      .def_readwrite("yaw_sigma_deg", &NoiseModel::yaw_sigma_deg)
      .def_readwrite("dim_sigma", &NoiseModel::dim_sigma)
      .def_readwrite("heading_flip_prob", &NoiseModel::heading_flip_prob)
      .def_readwrite("miss_base", &NoiseModel::miss_base)
      .def_readwrite("miss_per_meter", &NoiseModel::miss_per_meter)
      .def_readwrite("fp_rate", &NoiseModel::fp_rate)
      .def_readwrite("score_decay", &NoiseModel::score_decay)
      .def_readwrite("score_sigma", &NoiseModel::score_sigma)
      .def_readwrite("landmark_sigma", &NoiseModel::landmark_sigma);

  py::class_<SimConfig>(m, "SimConfig")
      .def(py::init<>())
      .def_readwrite("n_vehicles", &SimConfig::n_vehicles)
      .def_readwrite("n_cavs", &SimConfig::n_cavs)
      .def_readwrite("map_extent", &SimConfig::map_extent)
      .def_readwrite("street_spacing", &SimConfig::street_spacing)
      .def_readwrite("lane_offset", &SimConfig::lane_offset)
      .def_readwrite("dim_w", &SimConfig::dim_w)
      .def_readwrite("dim_l", &SimConfig::dim_l)
      .def_readwrite("dim_h", &SimConfig::dim_h)
      .def_readwrite("dim_jitter", &SimConfig::dim_jitter)
      .def_readwrite("comm_range", &SimConfig::comm_range)
      .def_readwrite("det_range", &SimConfig::det_range)
      .def_readwrite("max_coop", &SimConfig::max_coop)
      .def_readwrite("pole_density", &SimConfig::pole_density)
      .def_readwrite("wall_count", &SimConfig::wall_count)
      .def_readwrite("wall_point_spacing", &SimConfig::wall_point_spacing)
      .def_readwrite("surface_points_per_vehicle", &SimConfig::surface_points_per_vehicle)
      .def_readwrite("noise", &SimConfig::noise)
      .def_readwrite("loc_sigma_xy", &SimConfig::loc_sigma_xy)
      .def_readwrite("loc_sigma_yaw_deg", &SimConfig::loc_sigma_yaw_deg);

  py::class_<Frame>(m, "Frame")
      .def(py::init<>())
      .def_readwrite("seed", &Frame::seed)
      .def_readwrite("det_range", &Frame::det_range)
      .def_readwrite("comm_range", &Frame::comm_range)
      .def_readwrite("surface_points_per_vehicle", &Frame::surface_points_per_vehicle)
      .def_readwrite("vehicles", &Frame::vehicles)
      .def_readwrite("cav_vehicle", &Frame::cav_vehicle)
      .def_readwrite("cav_true_poses", &Frame::cav_true_poses)
      .def_readwrite("cav_noisy_poses", &Frame::cav_noisy_poses)
      .def_readwrite("cav_detections", &Frame::cav_detections)
      .def_readwrite("cav_landmarks", &Frame::cav_landmarks)
      .def_readwrite("map_landmarks", &Frame::map_landmarks)
      .def_readwrite("coop_cavs", &Frame::coop_cavs)
      .def_readwrite("gt_boxes", &Frame::gt_boxes);

  m.def("frame_seed", &frame_seed, py::arg("base_seed"), py::arg("index"));
  m.def("generate_frame", &generate_frame, py::arg("cfg"), py::arg("seed"));
  m.def("sense", &sense, py::arg("frame"), py::arg("cav_slot"), py::arg("noise"), py::arg("seed"));
  m.def("inject_loc_noise", &inject_loc_noise, py::arg("frame"), py::arg("cfg"), py::arg("seed"));
  m.def("build_cpm", &build_cpm, py::arg("frame"), py::arg("cav_slot"),
        py::arg("select") = SelectConfig{});
  m.def("save_frame", &save_frame, py::arg("dir"), py::arg("index"), py::arg("frame"),
        py::arg("select") = SelectConfig{});

  py::enum_<Pipeline>(m, "Pipeline")
      .value("NO_FUSION", Pipeline::kNoFusion)
      .value("NMS", Pipeline::kNms)
      .value("ALG1", Pipeline::kAlg1)
      .value("ALG1_WITH_CORRECTION", Pipeline::kAlg1WithCorrection);

  m.def("pipeline_name", &pipeline_name, py::arg("pipeline"));
  m.def("parse_pipeline", &parse_pipeline, py::arg("name"));

  py::class_<PipelineConfig>(m, "PipelineConfig")
      .def(py::init<>())
      .def_readwrite("pipeline", &PipelineConfig::pipeline)
      .def_readwrite("n_v", &PipelineConfig::n_v)
      .def_readwrite("match", &PipelineConfig::match)
      .def_readwrite("consensus", &PipelineConfig::consensus)
      .def_readwrite("nms_fusion_iou", &PipelineConfig::nms_fusion_iou)
      .def_readwrite("final_nms_iou", &PipelineConfig::final_nms_iou)
      .def_readwrite("range_gate", &PipelineConfig::range_gate)
      .def_readwrite("self_w", &PipelineConfig::self_w)
      .def_readwrite("self_l", &PipelineConfig::self_l)
      .def_readwrite("self_h", &PipelineConfig::self_h);

  py::class_<EvalFrame>(m, "EvalFrame")
      .def(py::init<>())
      .def_readwrite("gt", &EvalFrame::gt)
      .def_readwrite("ego", &EvalFrame::ego)
      .def_readwrite("coop", &EvalFrame::coop)
      .def_readwrite("cpm_sizes", &EvalFrame::cpm_sizes);

  py::class_<PrPoint>(m, "PrPoint")
      .def(py::init<>())
      .def_readwrite("recall", &PrPoint::recall)
      .def_readwrite("precision", &PrPoint::precision)
      .def_readwrite("score", &PrPoint::score);

  py::class_<ApResult>(m, "ApResult")
      .def(py::init<>())
      .def_readwrite("iou_thr", &ApResult::iou_thr)
      .def_readwrite("ap", &ApResult::ap)
      .def_readwrite("n_gt", &ApResult::n_gt)
      .def_readwrite("n_pred", &ApResult::n_pred)
      .def_readwrite("curve", &ApResult::curve);

  m.def("to_eval_frame", &to_eval_frame, py::arg("frame"), py::arg("select") = SelectConfig{});
  m.def("load_eval_frames", &load_eval_frames, py::arg("dir"));
  m.def("match_to_gt", &match_to_gt, py::arg("preds"), py::arg("gt"), py::arg("iou_thr"));
  m.def("average_precision", &average_precision, py::arg("preds"), py::arg("gt"),
        py::arg("iou_thr"));
  m.def("average_precision_pooled", &average_precision_pooled, py::arg("preds"), py::arg("gt"),
        py::arg("iou_thr"));
  m.def("run_pipeline", &run_pipeline, py::arg("frame"), py::arg("cfg"));
  m.def("evaluate_run", &evaluate_run, py::arg("frames"), py::arg("cfg"), py::arg("iou_list"),
        py::arg("jobs") = 1);

  py::class_<AppConfig>(m, "AppConfig")
      .def(py::init<>())
      .def_readwrite("sim", &AppConfig::sim)
      .def_readwrite("select", &AppConfig::select)
      .def_readwrite("match", &AppConfig::match)
      .def_readwrite("consensus", &AppConfig::consensus)
      .def_readwrite("nms_fusion_iou", &AppConfig::nms_fusion_iou)
      .def_readwrite("final_nms_iou", &AppConfig::final_nms_iou);

  m.def("load_config", &load_config, py::arg("path"));
  m.def("parse_config", &parse_config, py::arg("json_text"));
  m.def("validate_config", &validate_config, py::arg("cfg"));
  m.def("config_to_json", &config_to_json, py::arg("cfg"));
  m.def("make_pipeline_config", &make_pipeline_config, py::arg("cfg"), py::arg("pipeline"),
        py::arg("n_v"));
}
