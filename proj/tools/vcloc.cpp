// vcloc command-line driver: simulate, detect, pose, fuse, observability, eval.
//
// Exit codes: 0 ok, 1 usage, 2 unreadable/malformed input, 3 numerical failure.

#include <CLI11.hpp>
#include <Eigen/Cholesky>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "vcloc/detect.hpp"
#include "vcloc/error.hpp"
#include "vcloc/fusion.hpp"
#include "vcloc/image.hpp"
#include "vcloc/io.hpp"
#include "vcloc/observability.hpp"
#include "vcloc/pose.hpp"
#include "vcloc/sim.hpp"

namespace fs = std::filesystem;
using namespace vcloc;
using nlohmann::json;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open " + path);
  return in;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::ParseError, "cannot write " + path.string());
  return out;
}

// Writes to `path`, or stdout for "" / "-".
template <typename F>
void emit(const std::string& path, F&& f) {
  if (path.empty() || path == "-") {
    f(std::cout);
  } else {
    auto out = open_out(path);
    f(out);
  }
}

json vec_j(const Eigen::VectorXd& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

// ---------------------------------------------------------------- simulate

struct SimulateOpts {
  std::string scenario = "pendulum-basic";
  std::string config;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
  std::string mode;
  double duration = 0.0;
  bool json = false;
};

void write_patches(std::ostream& out, const std::vector<DetectionPatch>& patches) {
  for (const auto& p : patches) {
    out << "{\"t\":" << fmt(p.t) << ",\"marker\":" << p.marker << ",\"segments\":[";
    for (std::size_t i = 0; i < p.segments.size(); ++i) {
      const auto& s = p.segments[i];
      out << (i ? "," : "") << '[' << fmt(s.p0.x()) << ',' << fmt(s.p0.y()) << ',' << fmt(s.p1.x())
          << ',' << fmt(s.p1.y()) << ']';
    }
    out << "]}\n";
  }
}

int cmd_simulate(const SimulateOpts& o) {
  Scenario sc;
  if (!o.config.empty()) {
    auto in = open_in(o.config);
    sc = read_scenario(in);
  } else {
    sc = builtin_scenario(o.scenario);
  }
  if (o.mode == "vision") sc.mode = MeasurementMode::Vision;
  if (o.mode == "synthetic") sc.mode = MeasurementMode::Synthetic;
  if (o.duration > 0.0) sc.duration = o.duration;

  const SimOutput sim = simulate(sc, o.seed);
  const fs::path dir(o.out_dir);
  fs::create_directories(dir);
  {
    auto f = open_out(dir / "scenario.json");
    write_scenario(f, sc);
  }
  {
    auto f = open_out(dir / "truth.csv");
    write_trajectory(f, truth_as_trajectory(sim.truth), false);
  }
  {
    auto f = open_out(dir / "imu.csv");
    write_imu(f, sim.imu);
  }
  {
    auto f = open_out(dir / "measurements.jsonl");
    write_measurements(f, sim.measurements);
  }
  {
    // Initial belief for the filter: truth perturbed by a draw from P0.
    const MatX p0 = default_initial_covariance(sc.markers.size());
    Rng rng = make_rng(o.seed, 99);
    TrajectoryPoint init{sim.truth.t.front(), sample_initial_state(sim.truth.x.front(), p0, &rng), p0};
    auto f = open_out(dir / "init.csv");
    write_trajectory(f, {init}, true);
  }
  if (sc.mode == MeasurementMode::Vision) {
    auto f = open_out(dir / "patches.jsonl");
    write_patches(f, sim.patches);
  }
  const json summary = {{"scenario", sc.name},
                        {"seed", o.seed},
                        {"duration", sc.duration},
                        {"imu_samples", sim.imu.size()},
                        {"measurements", sim.measurements.size()},
                        {"vision_failures", sim.vision_failures},
                        {"out_dir", dir.string()}};
  if (o.json) {
    std::cout << summary.dump() << '\n';
  } else {
    std::cout << "simulated " << sc.name << " (seed " << o.seed << "): " << sim.imu.size()
              << " IMU samples, " << sim.measurements.size() << " measurements -> " << dir.string()
              << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- detect

struct DetectOpts {
  std::string segments;
  std::string image;
  std::string out;
  DetectConfig cfg;
  bool json = false;
};

int cmd_detect(const DetectOpts& o) {
  std::vector<DetectedEllipse> dets;
  if (!o.segments.empty()) {
    auto in = open_in(o.segments);
    dets = detect_ellipses(read_segments(in), o.cfg);
  } else {
    dets = detect_ellipses(read_pgm(o.image), o.cfg);
  }
  if (o.json) {
    json arr = json::array();
    for (const auto& d : dets) {
      arr.push_back({{"cx", d.params.cx}, {"cy", d.params.cy}, {"a", d.params.a}, {"b", d.params.b},
                     {"theta", d.params.theta}, {"inlier_ratio", d.inlier_ratio},
                     {"coverage_deg", d.coverage_deg}});
    }
    std::cout << json{{"detections", arr}}.dump() << '\n';
    if (o.out.empty()) return 0;
  }
  emit(o.out, [&](std::ostream& os) {
    for (const auto& d : dets) write_detection(os, d);
  });
  return 0;
}

// ---------------------------------------------------------------- pose

struct PoseOpts {
  std::string detections;
  std::string out;
  CameraIntrinsics k{1500.0, 1500.0, 1352.0, 760.0, 0.0};
  std::vector<double> radii{0.1342, 0.1098};
  bool json = false;
};

int cmd_pose(const PoseOpts& o) {
  auto in = open_in(o.detections);
  const auto recs = read_detections(in);
  // Group by timestamp; marker index defaults to the order within the group.
  std::map<double, std::vector<DetectionRecord>> frames;
  for (const auto& r : recs) frames[r.t].push_back(r);
  std::vector<PoseRecord> out;
  for (auto& [t, group] : frames) {
    std::vector<std::vector<CirclePose>> cands(group.size());
    std::vector<int> ids(group.size());
    for (std::size_t i = 0; i < group.size(); ++i) {
      ids[i] = group[i].marker >= 0 ? group[i].marker : static_cast<int>(i);
      if (ids[i] >= static_cast<int>(o.radii.size())) {
        throw Error(ErrorCode::ParseError, "no radius for marker " + std::to_string(ids[i]));
      }
      cands[i] = circle_pose_candidates(normalize_conic(group[i].det.conic, o.k), o.radii[ids[i]]);
    }
    std::vector<CirclePose> chosen(group.size());
    std::vector<bool> done(group.size(), false);
    if (group.size() >= 2 && !cands[0].empty() && !cands[1].empty()) {
      std::tie(chosen[0], chosen[1]) = resolve_two_markers(cands[0], cands[1]);
      done[0] = done[1] = true;
    }
    const Vec3 ref_n = done[0] ? chosen[0].n : -Vec3::UnitZ();
    for (std::size_t i = 0; i < group.size(); ++i) {
      if (cands[i].empty()) continue;
      if (!done[i]) chosen[i] = select_by_normal(cands[i], ref_n);
      out.push_back({t, ids[i], chosen[i], cands[i]});
    }
  }
  if (o.json) {
    json arr = json::array();
    for (const auto& r : out) {
      arr.push_back({{"t", r.t}, {"marker", r.marker}, {"p", vec_j(r.pose.p)}, {"n", vec_j(r.pose.n)}});
    }
    std::cout << json{{"poses", arr}}.dump() << '\n';
    if (o.out.empty()) return 0;
  }
  emit(o.out, [&](std::ostream& os) {
    for (const auto& r : out) write_pose(os, r);
  });
  return 0;
}

// ---------------------------------------------------------------- fuse

struct FuseOpts {
  std::string imu;
  std::string measurements;
  std::string init;
  std::string out;
  FilterConfig cfg;
  bool json = false;
};

int cmd_fuse(const FuseOpts& o) {
  auto imu_in = open_in(o.imu);
  auto meas_in = open_in(o.measurements);
  auto init_in = open_in(o.init);
  const auto imu = read_imu(imu_in);
  const auto meas = read_measurements(meas_in);
  const auto init_rows = read_trajectory(init_in);
  if (init_rows.empty()) throw Error(ErrorCode::ParseError, "initial state file is empty");
  Belief b0{init_rows.front().x, init_rows.front().P};
  if (b0.P.size() == 0) b0.P = default_initial_covariance(b0.x.t_f.size());
  FilterStats stats;
  const auto traj = run_filter(imu, meas, b0, o.cfg, &stats);
  emit(o.out, [&](std::ostream& os) { write_trajectory(os, traj, true); });
  const json summary = {{"epochs", traj.size()},
                        {"updates", stats.updates},
                        {"rejected", stats.rejected},
                        {"failed", stats.failed}};
  if (o.json) {
    std::cerr << summary.dump() << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- observability

struct ObsOpts {
  std::string state;
  std::size_t row = 0;
  std::string imu;
  std::string scenario;
  double t = 20.0;
  std::uint64_t seed = 0;
  int order = 3;
  double tol = 1e-8;
  bool json = false;
};

int cmd_observability(const ObsOpts& o) {
  FilterState x;
  ImuSample u;
  UavPose uav;
  InputDerivatives d;
  if (!o.scenario.empty()) {
    Scenario sc = builtin_scenario(o.scenario);
    sc.imu_noise.gyro = sc.imu_noise.accel = 0.0;
    sc.duration = std::max(o.t + 1.0, 2.0);
    const SimOutput sim = simulate(sc, o.seed);
    const double h = 1.0 / sc.imu_hz;
    auto k = static_cast<std::size_t>(std::llround(o.t / h));
    k = std::clamp<std::size_t>(k, 2, sim.imu.size() - 3);
    x = sim.truth.x[k];
    u = sim.imu[k];
    const auto& g = sim.imu;
    // Input derivatives by central differences of the noise-free IMU stream.
    d.w_dot = {(g[k + 1].w - g[k - 1].w) / (2 * h), (g[k + 1].w - 2 * g[k].w + g[k - 1].w) / (h * h)};
    d.a_dot = {(g[k + 1].a - g[k - 1].a) / (2 * h), (g[k + 1].a - 2 * g[k].a + g[k - 1].a) / (h * h)};
    uav.r_cg = sc.camera.r_cb * sim.truth.uav[k].r_gb.inverse();
    uav.p_gb = sim.truth.uav[k].p;
    uav.t_cb = sc.camera.t_cb;
  } else {
    auto in = open_in(o.state);
    const auto rows = read_trajectory(in);
    if (o.row >= rows.size()) throw Error(ErrorCode::ParseError, "state row out of range");
    x = rows[o.row].x;
    if (!o.imu.empty()) {
      auto imu_in = open_in(o.imu);
      const auto imu = read_imu(imu_in);
      if (imu.empty()) throw Error(ErrorCode::ParseError, "IMU file is empty");
      const double t = rows[o.row].t;
      const auto it = std::min_element(imu.begin(), imu.end(), [t](const auto& a, const auto& b) {
        return std::abs(a.t - t) < std::abs(b.t - t);
      });
      u = *it;
    }
  }
  const MatX m = observability_matrix(x, u, o.order, uav, d);
  const ObservabilityReport r = rank_report(m, o.tol);
  json j = {{"rank", r.rank},
            {"tangent_dim", r.tangent_dim},
            {"full_rank", r.rank == r.tangent_dim},
            {"order", o.order},
            {"singular_values", vec_j(r.singular_values)}};
  json null = json::array();
  for (Eigen::Index c = 0; c < r.deficient_directions.cols(); ++c) {
    null.push_back(vec_j(r.deficient_directions.col(c)));
  }
  j["deficient_directions"] = null;
  if (o.json) {
    std::cout << j.dump() << '\n';
  } else {
    std::cout << j.dump(2) << '\n';
  }
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalOpts {
  std::string trajectory;
  std::string truth;
  std::string out;
  double skip_fraction = 0.2;
  bool json = false;
};

int cmd_eval(const EvalOpts& o) {
  auto tin = open_in(o.trajectory);
  auto gin = open_in(o.truth);
  const auto est = read_trajectory(tin);
  const auto ref = read_trajectory(gin);
  if (est.empty() || ref.empty()) throw Error(ErrorCode::ParseError, "empty trajectory");
  const double t0 = est.front().t;
  const double t_start = t0 + o.skip_fraction * (est.back().t - t0);

  std::map<double, std::size_t> ref_at;
  for (std::size_t i = 0; i < ref.size(); ++i) ref_at[ref[i].t] = i;
  std::vector<Vec3> errs;
  double nees_sum = 0.0;
  std::size_t nees_n = 0;
  for (const auto& tp : est) {
    if (tp.t < t_start) continue;
    auto it = ref_at.lower_bound(tp.t - 1e-9);
    if (it == ref_at.end() || std::abs(it->first - tp.t) > 1e-9) continue;
    const Vec3 e = tp.x.p - ref[it->second].x.p;
    errs.push_back(e);
    if (tp.P.size() > 0) {
      const Mat3 pp = tp.P.block<3, 3>(idx::P, idx::P);
      nees_sum += e.dot(pp.ldlt().solve(e));
      ++nees_n;
    }
  }
  if (errs.empty()) throw Error(ErrorCode::ParseError, "no matching timestamps between the files");
  const double n = static_cast<double>(errs.size());
  Vec3 me = Vec3::Zero(), ms = Vec3::Zero();
  for (const auto& e : errs) {
    me += e;
    ms += e.cwiseAbs2();
  }
  me /= n;
  Vec3 sd = Vec3::Zero();
  for (const auto& e : errs) sd += (e - me).cwiseAbs2();
  sd = (n > 1 ? sd / (n - 1) : sd).cwiseSqrt();
  const Vec3 rmse = (ms / n).cwiseSqrt();
  auto axes = [](const Vec3& v) { return json{{"east", v.x()}, {"north", v.y()}, {"up", v.z()}}; };
  json j = {{"samples", errs.size()},
            {"start_time", t_start},
            {"mean_error", axes(me)},
            {"std_dev", axes(sd)},
            {"rmse", axes(rmse)}};
  const auto& last = est.back().x;
  auto rit = ref_at.lower_bound(est.back().t - 1e-9);
  if (rit != ref_at.end() && std::abs(rit->first - est.back().t) <= 1e-9) {
    const auto& tr = ref[rit->second].x;
    j["final_rope_length_error"] = last.l - tr.l;
    j["final_misalignment_error"] = (last.dt_cb - tr.dt_cb).norm();
  }
  if (nees_n > 0) j["nees_position_mean"] = nees_sum / static_cast<double>(nees_n);
  emit(o.out, [&](std::ostream& os) { os << j.dump(o.json ? -1 : 2) << '\n'; });
  if (o.json && !o.out.empty() && o.out != "-") std::cout << j.dump() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Vision-aided cooperative localization of a UAV slung load"};
  app.require_subcommand(1);
  app.set_config("--config-file", "", "TOML/INI file with option defaults (flags take precedence)");

  SimulateOpts so;
  auto* sim = app.add_subcommand("simulate", "Generate ground truth, IMU and measurement streams");
  sim->add_option("--scenario", so.scenario, "Built-in scenario name")->capture_default_str();
  sim->add_option("--config", so.config, "Scenario JSON file (schema 1)")->check(CLI::ExistingFile);
  sim->add_option("--seed", so.seed, "RNG seed")->capture_default_str();
  sim->add_option("--out", so.out_dir, "Output directory")->capture_default_str();
  sim->add_option("--mode", so.mode, "Measurement mode override")->check(CLI::IsMember({"synthetic", "vision"}));
  sim->add_option("--duration", so.duration, "Duration override (s)");
  sim->add_flag("--json", so.json, "Print a JSON summary");

  DetectOpts dop;
  auto* det = app.add_subcommand("detect", "Detect ellipses from line segments or a PGM image");
  auto* seg_opt = det->add_option("--segments", dop.segments, "Segment CSV x0,y0,x1,y1")->check(CLI::ExistingFile);
  auto* img_opt = det->add_option("--image", dop.image, "PGM image")->check(CLI::ExistingFile);
  seg_opt->excludes(img_opt);
  det->add_option("--out", dop.out, "Output JSONL (default stdout)");
  det->add_option("--r-link", dop.cfg.r_link, "Endpoint linking radius (px)")->capture_default_str();
  det->add_option("--theta-link", dop.cfg.theta_link_deg, "Max turn between linked segments (deg)")->capture_default_str();
  det->add_option("--straight-ratio", dop.cfg.straight_ratio, "Straight-segment pruning ratio")->capture_default_str();
  det->add_option("--min-ratio", dop.cfg.min_ratio, "Min inlier ratio")->capture_default_str();
  det->add_option("--tau", dop.cfg.tau_deg, "Min angular coverage (deg)")->capture_default_str();
  det->add_flag("--json", dop.json, "Print one JSON document instead of JSON Lines");

  PoseOpts po;
  auto* pose = app.add_subcommand("pose", "Recover marker positions from detected ellipses");
  pose->add_option("--detections", po.detections, "Detections JSONL")->required()->check(CLI::ExistingFile);
  pose->add_option("--out", po.out, "Output JSONL (default stdout)");
  pose->add_option("--fx", po.k.fx)->capture_default_str();
  pose->add_option("--fy", po.k.fy)->capture_default_str();
  pose->add_option("--cx", po.k.cx)->capture_default_str();
  pose->add_option("--cy", po.k.cy)->capture_default_str();
  pose->add_option("--radius", po.radii, "Marker radii by index (m)")->capture_default_str();
  pose->add_flag("--json", po.json, "Print one JSON document");

  FuseOpts fo;
  auto* fuse = app.add_subcommand("fuse", "Run the manifold UKF over IMU and measurement streams");
  fuse->add_option("--imu", fo.imu, "IMU CSV")->required()->check(CLI::ExistingFile);
  fuse->add_option("--measurements", fo.measurements, "Measurement JSONL")->required()->check(CLI::ExistingFile);
  fuse->add_option("--init", fo.init, "Initial state (trajectory CSV, first row)")->required()->check(CLI::ExistingFile);
  fuse->add_option("--out", fo.out, "Trajectory CSV (default stdout)");
  fuse->add_option("--q-gyro", fo.cfg.q.gyro)->capture_default_str();
  fuse->add_option("--q-accel", fo.cfg.q.accel)->capture_default_str();
  fuse->add_option("--q-rope", fo.cfg.q.rope)->capture_default_str();
  fuse->add_option("--q-misalign", fo.cfg.q.misalign)->capture_default_str();
  fuse->add_option("--q-fiducial", fo.cfg.q.fiducial)->capture_default_str();
  fuse->add_flag("--gate", fo.cfg.ukf.gate, "Enable the chi-square innovation gate");
  fuse->add_option("--stride", fo.cfg.record_stride, "Record every n-th IMU epoch")->capture_default_str();
  fuse->add_flag("--json", fo.json, "Print a JSON run summary to stderr");

  ObsOpts oo;
  auto* obs = app.add_subcommand("observability", "Rank of the stacked Lie-derivative Jacobian");
  auto* st_opt = obs->add_option("--state", oo.state, "Trajectory CSV holding the state")->check(CLI::ExistingFile);
  obs->add_option("--row", oo.row, "Row of the state file")->capture_default_str();
  obs->add_option("--imu", oo.imu, "IMU CSV (sample nearest the state time)")->check(CLI::ExistingFile);
  auto* sc_opt = obs->add_option("--scenario", oo.scenario, "Built-in scenario to sample the state from");
  st_opt->excludes(sc_opt);
  obs->add_option("--t", oo.t, "Scenario time (s)")->capture_default_str();
  obs->add_option("--seed", oo.seed)->capture_default_str();
  obs->add_option("--order", oo.order, "Highest Lie derivative order")->check(CLI::Range(0, 3))->capture_default_str();
  obs->add_option("--tol", oo.tol, "Relative singular value threshold")->capture_default_str();
  obs->add_flag("--json", oo.json, "Compact JSON");

  EvalOpts eo;
  auto* ev = app.add_subcommand("eval", "Per-axis error statistics of a trajectory against truth");
  ev->add_option("--trajectory", eo.trajectory)->required()->check(CLI::ExistingFile);
  ev->add_option("--truth", eo.truth)->required()->check(CLI::ExistingFile);
  ev->add_option("--out", eo.out, "Metrics JSON (default stdout)");
  ev->add_option("--skip", eo.skip_fraction, "Leading fraction of the run to ignore")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  ev->add_flag("--json", eo.json, "Compact JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*sim) return cmd_simulate(so);
    if (*det) {
      if (dop.segments.empty() && dop.image.empty()) {
        std::cerr << "detect: one of --segments or --image is required\n";
        return 1;
      }
      return cmd_detect(dop);
    }
    if (*pose) return cmd_pose(po);
    if (*fuse) return cmd_fuse(fo);
    if (*obs) {
      if (oo.state.empty() && oo.scenario.empty()) {
        std::cerr << "observability: one of --state or --scenario is required\n";
        return 1;
      }
      return cmd_observability(oo);
    }
    if (*ev) return cmd_eval(eo);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    if (e.code() == ErrorCode::ParseError) return 2;
    if (e.code() == ErrorCode::InvalidScenario) return 1;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}
