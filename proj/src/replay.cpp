#include "plvio/replay.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"
#include "plvio/error.hpp"

namespace plvio {

namespace {

struct CsvRow {
  std::vector<std::string> fields;
  std::string where;  // file:line
};

std::vector<CsvRow> read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ParseError, path + ": cannot open");
  std::vector<CsvRow> rows;
  std::string line;
  int n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (n == 1 || line.empty() || line[0] == '#') continue;  // header, blanks, comments
    CsvRow row;
    row.where = path + ":" + std::to_string(n);
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) row.fields.push_back(f);
    if (!line.empty() && line.back() == ',') row.fields.emplace_back();
    rows.push_back(std::move(row));
  }
  return rows;
}

double to_double(const CsvRow& row, std::size_t i) {
  const std::string& s = row.fields[i];
  std::size_t b = s.find_first_not_of(' '), e = s.find_last_not_of(' ');
  double v = 0.0;
  if (b == std::string::npos) throw Error(ErrorKind::ParseError, row.where + ": empty field " + std::to_string(i + 1));
  const auto res = std::from_chars(s.data() + b, s.data() + e + 1, v);
  if (res.ec != std::errc() || res.ptr != s.data() + e + 1) {
    throw Error(ErrorKind::ParseError, row.where + ": bad number '" + s + "'");
  }
  return v;
}

std::int64_t to_int(const CsvRow& row, std::size_t i) {
  const std::string& s = row.fields[i];
  std::size_t b = s.find_first_not_of(' '), e = s.find_last_not_of(' ');
  std::int64_t v = 0;
  if (b == std::string::npos) throw Error(ErrorKind::ParseError, row.where + ": empty field " + std::to_string(i + 1));
  const auto res = std::from_chars(s.data() + b, s.data() + e + 1, v);
  if (res.ec != std::errc() || res.ptr != s.data() + e + 1) {
    throw Error(ErrorKind::ParseError, row.where + ": bad integer '" + s + "'");
  }
  return v;
}

bool blank(const CsvRow& row, std::size_t i) {
  return i >= row.fields.size() || row.fields[i].find_first_not_of(' ') == std::string::npos;
}

void expect_fields(const CsvRow& row, std::size_t lo, std::size_t hi) {
  if (row.fields.size() < lo || row.fields.size() > hi) {
    throw Error(ErrorKind::ParseError, row.where + ": expected " + std::to_string(lo) +
                                           (lo == hi ? "" : "-" + std::to_string(hi)) + " fields, got " +
                                           std::to_string(row.fields.size()));
  }
}

void check_order(double prev, double t, const CsvRow& row, bool strict) {
  if (strict ? !(t > prev) : t < prev) {
    throw Error(ErrorKind::TimeOrderError, row.where + ": timestamp " + std::to_string(t) + " after " +
                                               std::to_string(prev));
  }
}

FrameMeasurements& frame_for(std::map<std::int64_t, FrameMeasurements>& frames, std::int64_t id, double t,
                             const CsvRow& row) {
  auto [it, inserted] = frames.try_emplace(id);
  if (inserted) {
    it->second.frame_id = id;
    it->second.t = t;
  } else if (it->second.t != t) {
    throw Error(ErrorKind::ParseError, row.where + ": frame " + std::to_string(id) + " has two timestamps");
  }
  return it->second;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

ReplayBundle read_bundle(const BundlePaths& paths) {
  ReplayBundle b;
  double prev = -std::numeric_limits<double>::infinity();
  for (const auto& row : read_csv(paths.imu)) {
    expect_fields(row, 7, 7);
    ImuSample s;
    s.t = to_double(row, 0);
    check_order(prev, s.t, row, true);
    prev = s.t;
    s.omega = Vec3(to_double(row, 1), to_double(row, 2), to_double(row, 3));
    s.accel = Vec3(to_double(row, 4), to_double(row, 5), to_double(row, 6));
    b.imu.push_back(s);
  }
  if (b.imu.empty()) throw Error(ErrorKind::ParseError, paths.imu + ": no IMU samples");

  std::map<std::int64_t, FrameMeasurements> frames;
  prev = -std::numeric_limits<double>::infinity();
  for (const auto& row : read_csv(paths.points)) {
    expect_fields(row, 5, 5);
    const double t = to_double(row, 0);
    check_order(prev, t, row, false);
    prev = t;
    frame_for(frames, to_int(row, 1), t, row).points.push_back({to_int(row, 2), Vec2(to_double(row, 3), to_double(row, 4))});
  }
  if (!paths.lines.empty()) {
    prev = -std::numeric_limits<double>::infinity();
    for (const auto& row : read_csv(paths.lines)) {
      expect_fields(row, 7, 9);
      const double t = to_double(row, 0);
      check_order(prev, t, row, false);
      prev = t;
      LineMeasurement m;
      m.id = to_int(row, 2);
      m.p_s = Vec3(to_double(row, 3), to_double(row, 4), 1.0);
      m.p_e = Vec3(to_double(row, 5), to_double(row, 6), 1.0);
      if (!blank(row, 7) || !blank(row, 8)) {
        if (row.fields.size() != 9) throw Error(ErrorKind::ParseError, row.where + ": VP needs two fields");
        m.vp = Vec2(to_double(row, 7), to_double(row, 8));
      }
      frame_for(frames, to_int(row, 1), t, row).lines.push_back(m);
      b.has_lines = true;
    }
  }
  double prev_t = -std::numeric_limits<double>::infinity();
  for (auto& [id, f] : frames) {
    if (f.t < prev_t) {
      throw Error(ErrorKind::TimeOrderError, "frame " + std::to_string(id) + " is earlier than the previous frame");
    }
    prev_t = f.t;
    b.frames.push_back(std::move(f));
  }

  if (!paths.ground_truth.empty()) {
    prev = -std::numeric_limits<double>::infinity();
    for (const auto& row : read_csv(paths.ground_truth)) {
      expect_fields(row, 8, 8);
      GroundTruthSample g;
      g.t = to_double(row, 0);
      check_order(prev, g.t, row, true);
      prev = g.t;
      g.p = Vec3(to_double(row, 1), to_double(row, 2), to_double(row, 3));
      g.q = Eigen::Quaterniond(to_double(row, 4), to_double(row, 5), to_double(row, 6), to_double(row, 7));
      if (std::abs(g.q.norm() - 1.0) > 1e-6) throw Error(ErrorKind::ParseError, row.where + ": quaternion not unit");
      g.q.normalize();
      b.ground_truth.push_back(g);
    }
  }

  if (!paths.init.empty()) {
    std::ifstream in(paths.init);
    if (!in) throw Error(ErrorKind::ParseError, paths.init + ": cannot open");
    nlohmann::json j;
    try {
      in >> j;
      auto vec = [&](const char* key, int n) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (static_cast<int>(v.size()) != n) {
          throw Error(ErrorKind::ParseError, paths.init + ": '" + key + "' needs " + std::to_string(n) + " values");
        }
        return Eigen::Map<const VecX>(v.data(), n).eval();
      };
      ReplayInit init;
      const VecX R = vec("R", 9);
      init.state.R << R[0], R[1], R[2], R[3], R[4], R[5], R[6], R[7], R[8];
      init.state.v = vec("v", 3);
      init.state.p = vec("p", 3);
      init.state.bg = vec("bg", 3);
      init.state.ba = vec("ba", 3);
      init.error = vec("error", kImuDim);
      init.cov_diag = vec("cov_diag", kImuDim);
      b.init = init;
    } catch (const nlohmann::json::exception& e) {
      throw Error(ErrorKind::ParseError, paths.init + ": " + e.what());
    }
  }
  return b;
}

BundlePaths write_bundle(const SimData& data, const SimConfig& cfg, const std::string& dir) {
  std::filesystem::create_directories(dir);
  BundlePaths paths{dir + "/imu.csv", dir + "/points.csv", dir + "/lines.csv", dir + "/gt.csv", dir + "/init.json"};
  {
    std::ofstream out(paths.imu);
    out << "t,wx,wy,wz,ax,ay,az\n";
    for (const auto& s : data.imu.samples) {
      out << fmt(s.t) << ',' << fmt(s.omega.x()) << ',' << fmt(s.omega.y()) << ',' << fmt(s.omega.z()) << ','
          << fmt(s.accel.x()) << ',' << fmt(s.accel.y()) << ',' << fmt(s.accel.z()) << '\n';
    }
  }
  {
    std::ofstream pts(paths.points), lines(paths.lines);
    pts << "t,frame_id,feature_id,u,v\n";
    lines << "t,frame_id,line_id,us,vs,ue,ve,vpx,vpy\n";
    for (const auto& f : data.frames) {
      for (const auto& p : f.points) {
        pts << fmt(f.t) << ',' << f.frame_id << ',' << p.id << ',' << fmt(p.z.x()) << ',' << fmt(p.z.y()) << '\n';
      }
      for (const auto& l : f.lines) {
        lines << fmt(f.t) << ',' << f.frame_id << ',' << l.id << ',' << fmt(l.p_s.x()) << ',' << fmt(l.p_s.y()) << ','
              << fmt(l.p_e.x()) << ',' << fmt(l.p_e.y()) << ',';
        if (l.vp) lines << fmt(l.vp->x()) << ',' << fmt(l.vp->y());
        else lines << ',';
        lines << '\n';
      }
    }
  }
  {
    std::ofstream out(paths.ground_truth);
    out << "t,px,py,pz,qw,qx,qy,qz\n";
    for (std::size_t i = 0; i < data.imu.samples.size(); ++i) {
      const ImuState& x = data.imu.truth[i];
      const Eigen::Quaterniond q(x.R);
      out << fmt(data.imu.samples[i].t) << ',' << fmt(x.p.x()) << ',' << fmt(x.p.y()) << ',' << fmt(x.p.z()) << ','
          << fmt(q.w()) << ',' << fmt(q.x()) << ',' << fmt(q.y()) << ',' << fmt(q.z()) << '\n';
    }
  }
  {
    const ImuState& x = data.imu.truth.front();
    auto list = [](const auto& v) { return std::vector<double>(v.data(), v.data() + v.size()); };
    std::vector<double> R;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) R.push_back(x.R(r, c));
    }
    nlohmann::json j = {{"R", R},
                        {"v", list(x.v)},
                        {"p", list(x.p)},
                        {"bg", list(x.bg)},
                        {"ba", list(x.ba)},
                        {"error", list(data.init_error)},
                        {"cov_diag", list(VecX(data.init_cov.diagonal()))}};
    std::ofstream out(paths.init);
    out << j.dump(2) << '\n';
  }
  (void)cfg;
  return paths;
}

namespace {

// Ground-truth pose at t by linear/slerp interpolation (clamped at the ends).
std::optional<ImuState> truth_at(const std::vector<GroundTruthSample>& gt, double t) {
  if (gt.empty()) return std::nullopt;
  auto it = std::lower_bound(gt.begin(), gt.end(), t, [](const GroundTruthSample& g, double x) { return g.t < x; });
  ImuState x;
  if (it == gt.begin() || it == gt.end()) {
    const auto& g = it == gt.end() ? gt.back() : gt.front();
    x.R = g.q.toRotationMatrix();
    x.p = g.p;
    return x;
  }
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (b.t == t) {
    x.R = b.q.toRotationMatrix();
    x.p = b.p;
    return x;
  }
  const double s = (t - a.t) / (b.t - a.t);
  x.R = a.q.slerp(s, b.q).toRotationMatrix();
  x.p = a.p + s * (b.p - a.p);
  return x;
}

}  // namespace

RunResult run_replay(const ReplayBundle& bundle, const EstimatorConfig& config, Variant variant, const MatX& P0) {
  RunResult out;
  out.variant = variant;
  EstimatorConfig ec = config;
  if (!bundle.has_lines) ec.use_lines = false;

  Belief initial;
  initial.state.time = bundle.imu.front().t;
  if (bundle.init) {
    initial.state.imu = perturb_imu(bundle.init->state, bundle.init->error, ec.model);
    initial.cov = bundle.init->cov_diag.asDiagonal();
  } else {
    if (auto x = truth_at(bundle.ground_truth, initial.state.time)) initial.state.imu = *x;
    initial.cov = P0;
  }

  try {
    Estimator est(ec, initial, bundle.imu.front());
    std::size_t next = 1;
    for (const auto& frame : bundle.frames) {
      if (frame.t < bundle.imu.front().t) {
        throw Error(ErrorKind::TimeOrderError, "frame " + std::to_string(frame.frame_id) + " precedes the IMU stream");
      }
      while (next < bundle.imu.size() && bundle.imu[next].t <= frame.t) est.feed_imu(bundle.imu[next++]);
      // One sample past the frame lets the filter interpolate to the frame time.
      if (next < bundle.imu.size()) est.feed_imu(bundle.imu[next++]);
      est.feed_frame(frame);
      RunStep step;
      step.t = frame.t;
      step.estimate = est.belief().state.imu;
      step.cov = est.belief().cov.topLeftCorner(kImuDim, kImuDim);
      if (auto x = truth_at(bundle.ground_truth, frame.t)) step.truth = *x;
      out.steps.push_back(std::move(step));
    }
    out.counters = est.counters();
  } catch (const Error& e) {
    out.aborted = true;
    out.diagnostic = e.what();
  }
  return out;
}

}  // namespace plvio
