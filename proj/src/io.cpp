#include "vcloc/io.hpp"

#include <Eigen/Geometry>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "vcloc/error.hpp"

namespace vcloc {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace {

[[noreturn]] void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool skippable(const std::string& line) { return line.empty() || line[0] == '#'; }

// Numeric CSV row; returns false for a header row (first field not a number),
// which is only accepted before any data row.
bool parse_row(const std::string& line, std::size_t lineno, std::vector<double>& vals,
               bool header_ok) {
  vals.clear();
  std::stringstream ss(line);
  std::string field;
  bool first = true;
  while (std::getline(ss, field, ',')) {
    field = trim(field);
    char* end = nullptr;
    const double v = std::strtod(field.c_str(), &end);
    if (field.empty() || end != field.c_str() + field.size()) {
      if (first && header_ok) return false;
      parse_fail(lineno, "not a number: '" + field + "'");
    }
    vals.push_back(v);
    first = false;
  }
  return true;
}

std::string vec_json(const Eigen::VectorXd& v) {
  std::string s = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt(v[i]);
  return s + "]";
}

std::string mat_json(const Eigen::MatrixXd& m) {
  std::string s = "[";
  for (Eigen::Index r = 0; r < m.rows(); ++r) s += (r ? "," : "") + vec_json(m.row(r).transpose());
  return s + "]";
}

Vec3 vec3_from(const json& j) {
  if (!j.is_array() || j.size() != 3) throw std::runtime_error("expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

MatX mat_from(const json& j) {
  if (!j.is_array() || j.empty() || !j[0].is_array()) throw std::runtime_error("expected a matrix");
  MatX m(j.size(), j[0].size());
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (j[r].size() != j[0].size()) throw std::runtime_error("ragged matrix");
    for (std::size_t c = 0; c < j[r].size(); ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

template <typename F>
void for_each_json_line(std::istream& in, F&& f) {
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (skippable(line)) continue;
    try {
      f(json::parse(line));
    } catch (const Error& e) {
      if (e.code() == ErrorCode::ParseError) throw;
      parse_fail(lineno, e.what());
    } catch (const std::exception& e) {
      parse_fail(lineno, e.what());
    }
  }
}

}  // namespace

std::vector<LineSegment> read_segments(std::istream& in) {
  std::vector<LineSegment> out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (skippable(line)) continue;
    if (!parse_row(line, lineno, v, out.empty())) continue;
    if (v.size() != 4) parse_fail(lineno, "expected x0,y0,x1,y1");
    const Vec2 p0(v[0], v[1]), p1(v[2], v[3]);
    if ((p1 - p0).norm() == 0.0) parse_fail(lineno, "zero-length segment");
    out.push_back(LineSegment::from_endpoints(p0, p1, endpoint_straightness((p1 - p0).norm())));
  }
  return out;
}

void write_segments(std::ostream& out, const std::vector<LineSegment>& segs) {
  out << "x0,y0,x1,y1\n";
  for (const auto& s : segs) {
    out << fmt(s.p0.x()) << ',' << fmt(s.p0.y()) << ',' << fmt(s.p1.x()) << ',' << fmt(s.p1.y())
        << '\n';
  }
}

void write_detection(std::ostream& out, const DetectedEllipse& d, double t, int marker) {
  out << '{';
  if (t >= 0.0) out << "\"t\":" << fmt(t) << ',';
  if (marker >= 0) out << "\"marker\":" << marker << ',';
  const auto& e = d.params;
  out << "\"cx\":" << fmt(e.cx) << ",\"cy\":" << fmt(e.cy) << ",\"a\":" << fmt(e.a)
      << ",\"b\":" << fmt(e.b) << ",\"theta\":" << fmt(e.theta)
      << ",\"inlier_ratio\":" << fmt(d.inlier_ratio) << ",\"coverage_deg\":" << fmt(d.coverage_deg)
      << "}\n";
}

std::vector<DetectionRecord> read_detections(std::istream& in) {
  std::vector<DetectionRecord> out;
  for_each_json_line(in, [&](const json& j) {
    DetectionRecord r;
    auto& e = r.det.params;
    e.cx = j.at("cx").get<double>();
    e.cy = j.at("cy").get<double>();
    e.a = j.at("a").get<double>();
    e.b = j.at("b").get<double>();
    e.theta = j.at("theta").get<double>();
    if (!e.valid()) throw std::runtime_error("invalid ellipse parameters");
    r.det.conic = conic_from_params(e);
    r.det.inlier_ratio = j.value("inlier_ratio", 0.0);
    r.det.coverage_deg = j.value("coverage_deg", 0.0);
    r.t = j.value("t", 0.0);
    r.marker = j.value("marker", -1);
    out.push_back(r);
  });
  return out;
}

std::vector<ImuSample> read_imu(std::istream& in) {
  std::vector<ImuSample> out;
  std::string line;
  std::size_t lineno = 0;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (skippable(line)) continue;
    if (!parse_row(line, lineno, v, out.empty())) continue;
    if (v.size() != 7) parse_fail(lineno, "expected t,wx,wy,wz,ax,ay,az");
    out.push_back({v[0], Vec3(v[1], v[2], v[3]), Vec3(v[4], v[5], v[6])});
  }
  return out;
}

void write_imu(std::ostream& out, const std::vector<ImuSample>& imu) {
  out << "t,wx,wy,wz,ax,ay,az\n";
  for (const auto& s : imu) {
    out << fmt(s.t);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(s.w[i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(s.a[i]);
    out << '\n';
  }
}

std::vector<MeasurementEvent> read_measurements(std::istream& in) {
  std::vector<MeasurementEvent> out;
  for_each_json_line(in, [&](const json& j) {
    MeasurementEvent ev;
    ev.t = j.at("t").get<double>();
    const std::string kind = j.at("kind").get<std::string>();
    const json& p = j.at("payload");
    ev.noise = mat_from(j.at("noise"));
    if (kind == "rotation") {
      ev.kind = RotationMeas{Rotation3::from_matrix(mat_from(p.at("r_ref")))};
    } else if (kind == "marker") {
      MarkerMeas m;
      m.marker = p.at("marker").get<std::size_t>();
      m.y = vec3_from(p.at("y"));
      m.r_cg = Rotation3::from_matrix(mat_from(p.at("r_cg")));
      m.p_gb = vec3_from(p.at("p_gb"));
      m.t_cb = vec3_from(p.at("t_cb"));
      ev.kind = m;
    } else if (kind == "rope") {
      ev.kind = RopeMeas{vec3_from(p.at("p_gb"))};
    } else {
      throw std::runtime_error("unknown measurement kind '" + kind + "'");
    }
    out.push_back(std::move(ev));
  });
  return out;
}

void write_measurements(std::ostream& out, const std::vector<MeasurementEvent>& meas) {
  for (const auto& ev : meas) {
    out << "{\"t\":" << fmt(ev.t) << ",\"kind\":";
    if (const auto* r = std::get_if<RotationMeas>(&ev.kind)) {
      out << "\"rotation\",\"payload\":{\"r_ref\":" << mat_json(r->r_ref.matrix()) << '}';
    } else if (const auto* m = std::get_if<MarkerMeas>(&ev.kind)) {
      out << "\"marker\",\"payload\":{\"marker\":" << m->marker << ",\"y\":" << vec_json(m->y)
          << ",\"r_cg\":" << mat_json(m->r_cg.matrix()) << ",\"p_gb\":" << vec_json(m->p_gb)
          << ",\"t_cb\":" << vec_json(m->t_cb) << '}';
    } else {
      const auto& rp = std::get<RopeMeas>(ev.kind);
      out << "\"rope\",\"payload\":{\"p_gb\":" << vec_json(rp.p_gb) << '}';
    }
    out << ",\"noise\":" << mat_json(ev.noise) << "}\n";
  }
}

void write_trajectory(std::ostream& out, const std::vector<TrajectoryPoint>& traj, bool with_sigma) {
  const std::size_t m = traj.empty() ? 2 : traj.front().x.t_f.size();
  const int n = 13 + 3 * static_cast<int>(m);
  with_sigma = with_sigma && !traj.empty() && traj.front().P.rows() == n;
  out << "t,px,py,pz,vx,vy,vz,l,qw,qx,qy,qz,dtx,dty,dtz";
  for (std::size_t i = 0; i < m; ++i) {
    for (char a : {'x', 'y', 'z'}) out << ",f" << i + 1 << a;
  }
  if (with_sigma) {
    static const char* kNames[] = {"s_rx", "s_ry", "s_rz", "s_px", "s_py", "s_pz", "s_vx",
                                   "s_vy", "s_vz", "s_l",  "s_dtx", "s_dty", "s_dtz"};
    for (const char* name : kNames) out << ',' << name;
    for (std::size_t i = 0; i < m; ++i) {
      for (char a : {'x', 'y', 'z'}) out << ",s_f" << i + 1 << a;
    }
    out << ",c_pxy,c_pxz,c_pyz";
  }
  out << '\n';
  for (const auto& tp : traj) {
    const auto& x = tp.x;
    Eigen::Quaterniond q(x.R.matrix());
    if (q.w() < 0.0) q.coeffs() *= -1.0;
    out << fmt(tp.t);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(x.p[i]);
    for (int i = 0; i < 3; ++i) out << ',' << fmt(x.v[i]);
    out << ',' << fmt(x.l) << ',' << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y()) << ','
        << fmt(q.z());
    for (int i = 0; i < 3; ++i) out << ',' << fmt(x.dt_cb[i]);
    for (const auto& f : x.t_f) {
      for (int i = 0; i < 3; ++i) out << ',' << fmt(f[i]);
    }
    if (with_sigma) {
      for (int i = 0; i < n; ++i) out << ',' << fmt(std::sqrt(std::max(0.0, tp.P(i, i))));
      const int p = idx::P;
      out << ',' << fmt(tp.P(p, p + 1)) << ',' << fmt(tp.P(p, p + 2)) << ','
          << fmt(tp.P(p + 1, p + 2));
    }
    out << '\n';
  }
}

std::vector<TrajectoryPoint> read_trajectory(std::istream& in) {
  std::vector<TrajectoryPoint> out;
  std::string line;
  std::size_t lineno = 0;
  std::size_t cols = 0, m = 0;
  bool sigma = false;
  std::vector<double> v;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(line);
    if (skippable(line)) continue;
    if (!parse_row(line, lineno, v, out.empty() && cols == 0)) {
      // The header fixes the layout: marker count from the f<i>x columns,
      // covariance columns present iff s_px is.
      std::stringstream ss(line);
      std::string name;
      while (std::getline(ss, name, ',')) {
        name = trim(name);
        ++cols;
        if (name.size() >= 3 && name[0] == 'f' && name.back() == 'x') ++m;
        if (name == "s_px") sigma = true;
      }
      if (cols != 15 + 3 * m + (sigma ? 16 + 3 * m : 0)) parse_fail(lineno, "unexpected header");
      continue;
    }
    if (cols == 0) parse_fail(lineno, "missing header row");
    if (v.size() != cols) parse_fail(lineno, "column count mismatch");
    TrajectoryPoint tp;
    tp.x = FilterState(m);
    tp.t = v[0];
    tp.x.p = Vec3(v[1], v[2], v[3]);
    tp.x.v = Vec3(v[4], v[5], v[6]);
    tp.x.l = v[7];
    Eigen::Quaterniond q(v[8], v[9], v[10], v[11]);
    if (std::abs(q.norm() - 1.0) > 1e-6) parse_fail(lineno, "quaternion is not unit length");
    tp.x.R = Rotation3::project(q.normalized().toRotationMatrix());
    tp.x.dt_cb = Vec3(v[12], v[13], v[14]);
    for (std::size_t i = 0; i < m; ++i) tp.x.t_f[i] = Vec3(v[15 + 3 * i], v[16 + 3 * i], v[17 + 3 * i]);
    if (sigma) {
      const int n = tp.x.dim();
      const std::size_t base = 15 + 3 * m;
      tp.P = MatX::Zero(n, n);
      for (int i = 0; i < n; ++i) tp.P(i, i) = v[base + i] * v[base + i];
      const int p = idx::P;
      const std::size_t c = base + n;
      tp.P(p, p + 1) = tp.P(p + 1, p) = v[c];
      tp.P(p, p + 2) = tp.P(p + 2, p) = v[c + 1];
      tp.P(p + 1, p + 2) = tp.P(p + 2, p + 1) = v[c + 2];
    }
    out.push_back(std::move(tp));
  }
  return out;
}

std::vector<TrajectoryPoint> truth_as_trajectory(const GroundTruth& truth) {
  std::vector<TrajectoryPoint> out;
  out.reserve(truth.t.size());
  for (std::size_t i = 0; i < truth.t.size(); ++i) out.push_back({truth.t[i], truth.x[i], MatX()});
  return out;
}

namespace {

json vec_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json mat_to(const Mat3& m) {
  json j = json::array();
  for (int r = 0; r < 3; ++r) j.push_back(json::array({m(r, 0), m(r, 1), m(r, 2)}));
  return j;
}

}  // namespace

Scenario read_scenario(std::istream& in) {
  json j;
  try {
    j = json::parse(in);
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
  Scenario sc = pendulum_basic();
  try {
    if (j.value("schema", 0) != 1) throw std::runtime_error("unsupported schema (expected 1)");
    if (j.contains("base")) sc = builtin_scenario(j.at("base").get<std::string>());
    sc.name = j.value("name", sc.name);
    sc.duration = j.value("duration", sc.duration);
    sc.truth_hz = j.value("truth_hz", sc.truth_hz);
    sc.imu_hz = j.value("imu_hz", sc.imu_hz);
    sc.camera_hz = j.value("camera_hz", sc.camera_hz);
    sc.rotation_hz = j.value("rotation_hz", sc.rotation_hz);
    sc.rope_hz = j.value("rope_hz", sc.rope_hz);
    sc.rope_length = j.value("rope_length", sc.rope_length);
    if (j.contains("markers")) {
      sc.markers.clear();
      for (const auto& m : j.at("markers")) {
        sc.markers.push_back({m.at("radius").get<double>(), vec3_from(m.at("t_lf"))});
      }
    }
    if (j.contains("path")) {
      const json& p = j.at("path");
      auto& sp = sc.path;
      sp.static_pivot = p.value("static_pivot", sp.static_pivot);
      if (p.contains("origin")) sp.origin = vec3_from(p.at("origin"));
      sp.leg_length = p.value("leg_length", sp.leg_length);
      sp.extent = p.value("extent", sp.extent);
      sp.legs = p.value("legs", sp.legs);
      sp.speed = p.value("speed", sp.speed);
      sp.reversal_time = p.value("reversal_time", sp.reversal_time);
      sp.yaw = p.value("yaw", sp.yaw);
    }
    if (j.contains("initial_swing_deg")) {
      sc.initial_swing_deg[0] = j.at("initial_swing_deg").at(0).get<double>();
      sc.initial_swing_deg[1] = j.at("initial_swing_deg").at(1).get<double>();
    }
    sc.yaw_drift_amplitude_deg = j.value("yaw_drift_amplitude_deg", sc.yaw_drift_amplitude_deg);
    sc.yaw_drift_period = j.value("yaw_drift_period", sc.yaw_drift_period);
    if (j.contains("camera")) {
      const json& c = j.at("camera");
      auto& cam = sc.camera;
      if (c.contains("intrinsics")) {
        const json& k = c.at("intrinsics");
        cam.k.fx = k.value("fx", cam.k.fx);
        cam.k.fy = k.value("fy", cam.k.fy);
        cam.k.cx = k.value("cx", cam.k.cx);
        cam.k.cy = k.value("cy", cam.k.cy);
        cam.k.skew = k.value("skew", cam.k.skew);
      }
      cam.width = c.value("width", cam.width);
      cam.height = c.value("height", cam.height);
      if (c.contains("r_cb")) cam.r_cb = Rotation3::from_matrix(mat_from(c.at("r_cb")));
      if (c.contains("t_cb")) cam.t_cb = vec3_from(c.at("t_cb"));
      if (c.contains("dt_cb_true")) cam.dt_cb_true = vec3_from(c.at("dt_cb_true"));
    }
    if (j.contains("imu_noise")) {
      const json& q = j.at("imu_noise");
      sc.imu_noise.gyro = q.value("gyro", sc.imu_noise.gyro);
      sc.imu_noise.accel = q.value("accel", sc.imu_noise.accel);
    }
    sc.pixel_noise = j.value("pixel_noise", sc.pixel_noise);
    sc.rotation_sigma = j.value("rotation_sigma", sc.rotation_sigma);
    sc.rope_sigma = j.value("rope_sigma", sc.rope_sigma);
    sc.vision_noise_inflation = j.value("vision_noise_inflation", sc.vision_noise_inflation);
    if (j.contains("mode")) {
      const auto mode = j.at("mode").get<std::string>();
      if (mode == "synthetic") {
        sc.mode = MeasurementMode::Synthetic;
      } else if (mode == "vision") {
        sc.mode = MeasurementMode::Vision;
      } else {
        throw std::runtime_error("mode must be 'synthetic' or 'vision'");
      }
    }
    sc.occlusion_deg = j.value("occlusion_deg", sc.occlusion_deg);
    if (j.contains("dropouts")) {
      sc.dropouts.clear();
      for (const auto& d : j.at("dropouts")) sc.dropouts.emplace_back(d.at(0).get<double>(), d.at(1).get<double>());
    }
  } catch (const Error&) {
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("scenario: ") + e.what());
  }
  sc.validate();
  return sc;
}

void write_scenario(std::ostream& out, const Scenario& sc) {
  json j;
  j["schema"] = 1;
  j["name"] = sc.name;
  j["duration"] = sc.duration;
  j["truth_hz"] = sc.truth_hz;
  j["imu_hz"] = sc.imu_hz;
  j["camera_hz"] = sc.camera_hz;
  j["rotation_hz"] = sc.rotation_hz;
  j["rope_hz"] = sc.rope_hz;
  j["rope_length"] = sc.rope_length;
  j["markers"] = json::array();
  for (const auto& m : sc.markers) j["markers"].push_back({{"radius", m.radius}, {"t_lf", vec_to(m.t_lf)}});
  const auto& sp = sc.path;
  j["path"] = {{"static_pivot", sp.static_pivot}, {"origin", vec_to(sp.origin)},
               {"leg_length", sp.leg_length},     {"extent", sp.extent},
               {"legs", sp.legs},                 {"speed", sp.speed},
               {"reversal_time", sp.reversal_time}, {"yaw", sp.yaw}};
  j["initial_swing_deg"] = {sc.initial_swing_deg[0], sc.initial_swing_deg[1]};
  j["yaw_drift_amplitude_deg"] = sc.yaw_drift_amplitude_deg;
  j["yaw_drift_period"] = sc.yaw_drift_period;
  const auto& cam = sc.camera;
  j["camera"] = {{"intrinsics",
                  {{"fx", cam.k.fx}, {"fy", cam.k.fy}, {"cx", cam.k.cx}, {"cy", cam.k.cy}, {"skew", cam.k.skew}}},
                 {"width", cam.width},
                 {"height", cam.height},
                 {"r_cb", mat_to(cam.r_cb.matrix())},
                 {"t_cb", vec_to(cam.t_cb)},
                 {"dt_cb_true", vec_to(cam.dt_cb_true)}};
  j["imu_noise"] = {{"gyro", sc.imu_noise.gyro}, {"accel", sc.imu_noise.accel}};
  j["pixel_noise"] = sc.pixel_noise;
  j["rotation_sigma"] = sc.rotation_sigma;
  j["rope_sigma"] = sc.rope_sigma;
  j["vision_noise_inflation"] = sc.vision_noise_inflation;
  j["mode"] = sc.mode == MeasurementMode::Vision ? "vision" : "synthetic";
  j["occlusion_deg"] = sc.occlusion_deg;
  j["dropouts"] = json::array();
  for (const auto& [a, b] : sc.dropouts) j["dropouts"].push_back({a, b});
  out << j.dump(2) << '\n';
}

void write_pose(std::ostream& out, const PoseRecord& rec) {
  out << "{\"t\":" << fmt(rec.t) << ",\"marker\":" << rec.marker << ",\"p\":" << vec_json(rec.pose.p)
      << ",\"n\":" << vec_json(rec.pose.n) << ",\"candidates\":[";
  for (std::size_t i = 0; i < rec.candidates.size(); ++i) {
    out << (i ? "," : "") << "{\"p\":" << vec_json(rec.candidates[i].p)
        << ",\"n\":" << vec_json(rec.candidates[i].n) << '}';
  }
  out << "]}\n";
}

}  // namespace vcloc
