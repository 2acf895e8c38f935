#include <algorithm>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "coopfuse/config.hpp"
#include "coopfuse/cpm.hpp"
#include "coopfuse/eval.hpp"
#include "coopfuse/sim.hpp"

namespace fs = std::filesystem;
using namespace coopfuse;

namespace {

constexpr double kGridCellSize = 0.8;  // m, dense grid-map comparison cell

std::uint64_t base_seed_from_env() {
  const char* env = std::getenv("COOPFUSE_SEED");
  if (!env || !*env) return 1;
  char* end = nullptr;
  unsigned long long v = std::strtoull(env, &end, 10);
  if (end == env || *end != '\0')
    throw ConfigError("COOPFUSE_SEED: not a valid unsigned integer");
  return static_cast<std::uint64_t>(v);
}

AppConfig load_or_default(const std::string& path) {
  if (path.empty()) {
    AppConfig cfg;
    validate_config(cfg);
    return cfg;
  }
  return load_config(path);
}

std::vector<double> parse_double_list(const std::string& text, const char* what) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      double v = std::stod(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw ConfigError(std::string(what) + ": '" + item + "' is not a number");
    }
  }
  if (out.empty()) throw ConfigError(std::string(what) + ": empty list");
  return out;
}

std::vector<int> parse_int_list(const std::string& text, const char* what) {
  std::vector<int> out;
  for (double v : parse_double_list(text, what)) {
    int i = static_cast<int>(v);
    if (static_cast<double>(i) != v) throw ConfigError(std::string(what) + ": expected integers");
    out.push_back(i);
  }
  return out;
}

struct SizeStats {
  double mean = 0.0;
  double median = 0.0;
  std::size_t count = 0;
};

SizeStats size_stats(std::vector<std::size_t> sizes) {
  SizeStats s;
  s.count = sizes.size();
  if (sizes.empty()) return s;
  double total = 0.0;
  for (std::size_t v : sizes) total += static_cast<double>(v);
  s.mean = total / static_cast<double>(sizes.size());
  std::sort(sizes.begin(), sizes.end());
  std::size_t mid = sizes.size() / 2;
  s.median = sizes.size() % 2 ? static_cast<double>(sizes[mid])
                              : 0.5 * static_cast<double>(sizes[mid - 1] + sizes[mid]);
  return s;
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  std::size_t mid = v.size() / 2;
  return v.size() % 2 ? v[mid] : 0.5 * (v[mid - 1] + v[mid]);
}

std::string format_iou(double iou) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", iou);
  return buf;
}

// Keypoint payloads are size-accounted before evaluation and not consumed by
// any pipeline; dropping them keeps long runs in memory.
void strip_keypoints(EvalFrame& f) {
  f.ego.keypoints.coords.clear();
  f.ego.keypoints.features.clear();
  for (Cpm& m : f.coop) {
    m.keypoints.coords.clear();
    m.keypoints.features.clear();
  }
}

struct SimulateOpts {
  int frames = 10;
  std::string out;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool loc_noise = false;
};

struct FuseEvalOpts {
  std::string in_dir;
  int frames = 0;
  std::string out;
  std::string config_path;
  std::string pipelines = "no_fusion,nms,alg1,alg1_with_correction";
  std::string nv_list = "0,2,4";
  std::string iou_list = "0.3,0.5,0.7";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool loc_noise = false;
};

struct CpmStatsOpts {
  std::string in_path;
  int frames = 0;
  std::string config_path;
  std::optional<std::uint64_t> seed;
  double cell = kGridCellSize;
};

struct SweepOpts {
  int frames = 50;
  std::string out;
  std::string config_path;
  std::string pipeline = "alg1";
  std::string nv_list = "0,2,4";
  std::string nkpts_list = "2048,1024";
  std::string nch_list = "128,64,32";
  double iou = 0.7;
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool loc_noise = false;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  return flag ? *flag : base_seed_from_env();
}

std::vector<Frame> generate_frames(const AppConfig& cfg, std::uint64_t seed, int count, int jobs,
                                   bool loc_noise) {
  const SimConfig& sim = cfg.sim;
  std::vector<Frame> frames(static_cast<std::size_t>(count));
  std::exception_ptr error;
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= frames.size()) return;
      try {
        frames[i] = generate_frame(sim, frame_seed(seed, i));
        if (loc_noise) inject_loc_noise(frames[i], sim, frames[i].seed);
      } catch (...) {
        std::scoped_lock lk(mu);
        if (!error) error = std::current_exception();
        return;
      }
    }
  };
  if (jobs <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < std::min<int>(jobs, count); ++t) pool.emplace_back(worker);
    for (std::thread& th : pool) th.join();
  }
  if (error) std::rethrow_exception(error);
  return frames;
}

int cmd_simulate(const SimulateOpts& opt) {
  if (opt.frames < 1) throw ConfigError("--frames: must be at least 1");
  AppConfig cfg = load_or_default(opt.config_path);
  std::uint64_t seed = resolve_seed(opt.seed);
  fs::path dir(opt.out);
  fs::create_directories(dir);

  std::vector<Frame> frames =
      generate_frames(cfg, seed, opt.frames, opt.jobs, opt.loc_noise);
  for (std::size_t i = 0; i < frames.size(); ++i) save_frame(dir, i, frames[i], cfg.select);

  for (std::size_t i = 0; i < frames.size(); ++i) {
    char stem[32];
    std::snprintf(stem, sizeof stem, "frame_%06zu", i);
    std::cout << (dir / (std::string(stem) + ".cpms")).string() << " seed=" << frames[i].seed
              << " coop=" << frames[i].coop_cavs.size() << "\n";
  }
  std::cout << "simulate: wrote " << frames.size() << " frames to " << dir.string()
            << " (base seed " << seed << ")\n";
  return 0;
}

std::vector<std::size_t> used_coop_sizes(const std::vector<EvalFrame>& frames, int n_v) {
  std::vector<std::size_t> sizes;
  for (const EvalFrame& f : frames) {
    if (f.coop.size() < static_cast<std::size_t>(n_v)) continue;
    for (std::size_t k = 0; k < static_cast<std::size_t>(n_v) && k + 1 < f.cpm_sizes.size(); ++k)
      sizes.push_back(f.cpm_sizes[k + 1]);
  }
  return sizes;
}

int cmd_fuse_eval(const FuseEvalOpts& opt) {
  AppConfig cfg = load_or_default(opt.config_path);
  std::uint64_t seed = resolve_seed(opt.seed);
  std::vector<Pipeline> pipelines;
  {
    std::stringstream ss(opt.pipelines);
    std::string item;
    while (std::getline(ss, item, ',')) pipelines.push_back(parse_pipeline(item));
    if (pipelines.empty()) throw ConfigError("--pipelines: empty list");
  }
  std::vector<int> nv_list = parse_int_list(opt.nv_list, "--nv");
  for (int v : nv_list)
    if (v < 0) throw ConfigError("--nv: values must be non-negative");
  std::vector<double> iou_list = parse_double_list(opt.iou_list, "--iou");

  std::vector<EvalFrame> frames;
  if (!opt.in_dir.empty()) {
    frames = load_eval_frames(opt.in_dir);
  } else {
    if (opt.frames < 1) throw ConfigError("--frames: must be at least 1 when --in is not given");
    for (Frame& f : generate_frames(cfg, seed, opt.frames, opt.jobs, opt.loc_noise))
      frames.push_back(to_eval_frame(f, cfg.select));
  }
  for (EvalFrame& f : frames) strip_keypoints(f);

  std::ostringstream table;
  table << "pipeline,n_v,iou,ap,n_gt,n_pred,cpm_bytes_mean,cpm_bytes_median\n";
  struct CurveOut {
    std::string name;
    std::vector<PrPoint> curve;
  };
  std::vector<CurveOut> curves;

  for (Pipeline p : pipelines) {
    for (int nv : nv_list) {
      PipelineConfig pc = make_pipeline_config(cfg, p, nv);
      std::vector<ApResult> results = evaluate_run(frames, pc, iou_list, opt.jobs);
      SizeStats sizes = size_stats(used_coop_sizes(frames, nv));
      for (const ApResult& r : results) {
        char row[256];
        std::snprintf(row, sizeof row, "%s,%d,%s,%.6f,%zu,%zu,%.1f,%.1f\n",
                      pipeline_name(p).c_str(), nv, format_iou(r.iou_thr).c_str(), r.ap, r.n_gt,
                      r.n_pred, sizes.mean, sizes.median);
        table << row;
        curves.push_back(CurveOut{
            "curve_" + pipeline_name(p) + "_nv" + std::to_string(nv) + "_iou" + format_iou(r.iou_thr) + ".csv",
            r.curve});
      }
    }
  }

  std::cout << table.str();
  if (!opt.out.empty()) {
    fs::path dir(opt.out);
    fs::create_directories(dir);
    std::ofstream results_file(dir / "results.csv", std::ios::trunc);
    if (!results_file) throw std::runtime_error("cannot write results.csv");
    results_file << table.str();
    for (const CurveOut& c : curves) {
      std::ofstream f(dir / c.name, std::ios::trunc);
      if (!f) throw std::runtime_error("cannot write " + c.name);
      f << "recall,precision,score\n";
      for (const PrPoint& pt : c.curve) {
        char row[128];
        std::snprintf(row, sizeof row, "%.6f,%.6f,%.6f\n", pt.recall, pt.precision, pt.score);
        f << row;
      }
    }
    std::cout << "fuse-eval: wrote results.csv and " << curves.size() << " curve files to "
              << dir.string() << "\n";
  }
  return 0;
}

int cmd_cpm_stats(const CpmStatsOpts& opt) {
  AppConfig cfg = load_or_default(opt.config_path);
  if (!(opt.cell > 0.0)) throw ConfigError("--cell: must be positive");

  std::vector<Cpm> cpms;
  if (!opt.in_path.empty()) {
    fs::path p(opt.in_path);
    if (fs::is_directory(p)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::directory_iterator(p))
        if (e.is_regular_file() && e.path().extension() == ".cpms") files.push_back(e.path());
      std::sort(files.begin(), files.end());
      if (files.empty()) throw std::runtime_error("no .cpms files under " + p.string());
      for (const fs::path& f : files) {
        std::vector<Cpm> batch = read_cpm_container(f);
        cpms.insert(cpms.end(), std::make_move_iterator(batch.begin()),
                    std::make_move_iterator(batch.end()));
      }
    } else {
      cpms = read_cpm_container(p);
    }
  } else {
    if (opt.frames < 1) throw ConfigError("--frames: must be at least 1 when --in is not given");
    std::uint64_t seed = resolve_seed(opt.seed);
    for (int i = 0; i < opt.frames; ++i) {
      Frame f = generate_frame(cfg.sim, frame_seed(seed, static_cast<std::size_t>(i)));
      cpms.push_back(build_cpm(f, 0, cfg.select));
      for (int slot : f.coop_cavs) cpms.push_back(build_cpm(f, slot, cfg.select));
    }
  }

  std::cout << "index,n_prop,n_kpts,n_ch,n_corr,bytes,gridmap_dense,gridmap_sparse,ratio_dense,ratio_sparse\n";
  std::vector<std::size_t> sizes;
  std::vector<double> dense_ratios, sparse_ratios;
  for (std::size_t i = 0; i < cpms.size(); ++i) {
    const Cpm& m = cpms[i];
    std::size_t bytes = cpm_size(m);
    GridMapPayload g = gridmap_equivalent(m, cfg.sim.det_range, opt.cell);
    std::size_t dense = gridmap_size_dense(g);
    std::size_t sparse = gridmap_size_sparse(g);
    double rd = static_cast<double>(dense) / static_cast<double>(bytes);
    double rs = static_cast<double>(sparse) / static_cast<double>(bytes);
    sizes.push_back(bytes);
    dense_ratios.push_back(rd);
    sparse_ratios.push_back(rs);
    char row[256];
    std::snprintf(row, sizeof row, "%zu,%zu,%zu,%d,%zu,%zu,%zu,%zu,%.4f,%.4f\n", i,
                  m.proposals.size(), m.keypoints.coords.size(), m.keypoints.n_ch,
                  m.correction_points.size(), bytes, dense, sparse, rd, rs);
    std::cout << row;
  }
  SizeStats s = size_stats(sizes);
  char buf[256];
  std::snprintf(buf, sizeof buf, "summary: count=%zu mean_bytes=%.1f median_bytes=%.1f\n", s.count,
                s.mean, s.median);
  std::cout << buf;
  std::snprintf(buf, sizeof buf, "summary: median_ratio_dense=%.4f median_ratio_sparse=%.4f\n",
                median_of(dense_ratios), median_of(sparse_ratios));
  std::cout << buf;
  return 0;
}

int cmd_sweep(const SweepOpts& opt) {
  if (opt.frames < 1) throw ConfigError("--frames: must be at least 1");
  AppConfig cfg = load_or_default(opt.config_path);
  std::uint64_t seed = resolve_seed(opt.seed);
  Pipeline pipeline = parse_pipeline(opt.pipeline);
  std::vector<int> nv_list = parse_int_list(opt.nv_list, "--nv");
  std::vector<int> nkpts_list = parse_int_list(opt.nkpts_list, "--nkpts");
  std::vector<int> nch_list = parse_int_list(opt.nch_list, "--nch");
  for (int v : nkpts_list)
    if (v < 0) throw ConfigError("--nkpts: values must be non-negative");
  for (int v : nch_list)
    if (v < 0 || v > 255) throw ConfigError("--nch: values must be in [0, 255]");

  std::vector<Frame> frames = generate_frames(cfg, seed, opt.frames, opt.jobs, opt.loc_noise);

  std::ostringstream table;
  table << "pipeline,n_v,n_kpts,n_ch,iou,ap,cpm_bytes_mean,cpm_bytes_median\n";
  for (int nkpts : nkpts_list) {
    for (int nch : nch_list) {
      SelectConfig select = cfg.select;
      select.n_kpts = nkpts;
      select.n_ch = nch;
      std::vector<EvalFrame> eval_frames;
      eval_frames.reserve(frames.size());
      for (const Frame& f : frames) eval_frames.push_back(to_eval_frame(f, select));
      for (EvalFrame& f : eval_frames) strip_keypoints(f);
      for (int nv : nv_list) {
        PipelineConfig pc = make_pipeline_config(cfg, pipeline, nv);
        std::vector<ApResult> results = evaluate_run(eval_frames, pc, {opt.iou}, opt.jobs);
        SizeStats sizes = size_stats(used_coop_sizes(eval_frames, nv));
        char row[256];
        std::snprintf(row, sizeof row, "%s,%d,%d,%d,%s,%.6f,%.1f,%.1f\n",
                      pipeline_name(pipeline).c_str(), nv, nkpts, nch,
                      format_iou(results[0].iou_thr).c_str(), results[0].ap, sizes.mean,
                      sizes.median);
        table << row;
      }
    }
  }
  std::cout << table.str();
  if (!opt.out.empty()) {
    fs::path dir(opt.out);
    fs::create_directories(dir);
    std::ofstream f(dir / "sweep.csv", std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write sweep.csv");
    f << table.str();
    std::cout << "sweep: wrote sweep.csv to " << dir.string() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Keypoints-based cooperative vehicle detection toolkit"};
  app.require_subcommand(1);

  SimulateOpts sim_opts;
  CLI::App* sim = app.add_subcommand("simulate", "Generate frames and write CPM containers + GT sidecars");
  sim->add_option("--frames", sim_opts.frames, "Number of frames")->capture_default_str();
  sim->add_option("--out", sim_opts.out, "Output directory")->required();
  sim->add_option("--config", sim_opts.config_path, "JSON config file");
  sim->add_option("--seed", sim_opts.seed, "Base seed (default: COOPFUSE_SEED or 1)");
  sim->add_option("--jobs", sim_opts.jobs, "Worker threads")->capture_default_str();
  sim->add_flag("--loc-noise", sim_opts.loc_noise, "Inject localization noise");

  FuseEvalOpts fe_opts;
  CLI::App* fe = app.add_subcommand("fuse-eval", "Run fusion pipelines and report AP tables");
  auto* fe_in = fe->add_option("--in", fe_opts.in_dir, "Directory of saved frames");
  fe->add_option("--frames", fe_opts.frames, "Generate this many frames instead of --in")
      ->excludes(fe_in);
  fe->add_option("--out", fe_opts.out, "Directory for results.csv and curve files");
  fe->add_option("--config", fe_opts.config_path, "JSON config file");
  fe->add_option("--pipelines", fe_opts.pipelines, "Comma list of pipelines")->capture_default_str();
  fe->add_option("--nv", fe_opts.nv_list, "Comma list of cooperative CPM counts")->capture_default_str();
  fe->add_option("--iou", fe_opts.iou_list, "Comma list of IoU thresholds")->capture_default_str();
  fe->add_option("--seed", fe_opts.seed, "Base seed (default: COOPFUSE_SEED or 1)");
  fe->add_option("--jobs", fe_opts.jobs, "Worker threads")->capture_default_str();
  fe->add_flag("--loc-noise", fe_opts.loc_noise, "Inject localization noise");

  CpmStatsOpts cs_opts;
  CLI::App* cs = app.add_subcommand("cpm-stats", "Per-CPM size breakdown vs grid-map equivalents");
  auto* cs_in = cs->add_option("--in", cs_opts.in_path, "A .cpms container or a directory of them");
  cs->add_option("--frames", cs_opts.frames, "Simulate this many frames instead of --in")
      ->excludes(cs_in);
  cs->add_option("--config", cs_opts.config_path, "JSON config file");
  cs->add_option("--seed", cs_opts.seed, "Base seed (default: COOPFUSE_SEED or 1)");
  cs->add_option("--cell", cs_opts.cell, "Grid-map cell size, metres")->capture_default_str();

  SweepOpts sw_opts;
  CLI::App* sw = app.add_subcommand("sweep", "Cartesian sweep over N_v x N_kpts x N_ch");
  sw->add_option("--frames", sw_opts.frames, "Number of frames")->capture_default_str();
  sw->add_option("--out", sw_opts.out, "Directory for sweep.csv");
  sw->add_option("--config", sw_opts.config_path, "JSON config file");
  sw->add_option("--pipeline", sw_opts.pipeline, "Pipeline to sweep")->capture_default_str();
  sw->add_option("--nv", sw_opts.nv_list, "Comma list of cooperative CPM counts")->capture_default_str();
  sw->add_option("--nkpts", sw_opts.nkpts_list, "Comma list of keypoint budgets")->capture_default_str();
  sw->add_option("--nch", sw_opts.nch_list, "Comma list of channel counts")->capture_default_str();
  sw->add_option("--iou", sw_opts.iou, "IoU threshold")->capture_default_str();
  sw->add_option("--seed", sw_opts.seed, "Base seed (default: COOPFUSE_SEED or 1)");
  sw->add_option("--jobs", sw_opts.jobs, "Worker threads")->capture_default_str();
  sw->add_flag("--loc-noise", sw_opts.loc_noise, "Inject localization noise");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (sim->parsed()) return cmd_simulate(sim_opts);
    if (fe->parsed()) return cmd_fuse_eval(fe_opts);
    if (cs->parsed()) return cmd_cpm_stats(cs_opts);
    if (sw->parsed()) return cmd_sweep(sw_opts);
    std::cerr << "error: no subcommand\n";
    return 2;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
