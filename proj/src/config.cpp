#include "plvio/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "json.hpp"
#include "plvio/error.hpp"

namespace plvio {

namespace {

using json = nlohmann::json;
using Setter = std::function<void(const json&, const std::string&)>;
using Fields = std::map<std::string, Setter>;

template <typename T>
Setter field(T& target) {
  return [&target](const json& v, const std::string& path) {
    try {
      if constexpr (std::is_same_v<T, double>) {
        if (!v.is_number()) throw Error(ErrorKind::ConfigError, path + ": expected a number");
      } else if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw Error(ErrorKind::ConfigError, path + ": expected a boolean");
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw Error(ErrorKind::ConfigError, path + ": expected an integer");
        if constexpr (std::is_unsigned_v<T>) {
          if (v.is_number_integer() && !v.is_number_unsigned()) {
            throw Error(ErrorKind::ConfigError, path + ": expected a non-negative integer");
          }
        }
      }
      target = v.get<T>();
    } catch (const json::exception& e) {
      throw Error(ErrorKind::ConfigError, path + ": " + e.what());
    }
  };
}

void read_object(const json& j, const std::string& path, const Fields& fields) {
  if (!j.is_object()) throw Error(ErrorKind::ConfigError, path + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    const auto it = fields.find(key);
    const std::string sub = path.empty() ? key : path + "." + key;
    if (it == fields.end()) throw Error(ErrorKind::ConfigError, "unknown key '" + sub + "'");
    it->second(value, sub);
  }
}

template <int N>
Setter fixed_array(Eigen::Matrix<double, N, 1>& target) {
  return [&target](const json& v, const std::string& path) {
    if (!v.is_array() || v.size() != N) {
      throw Error(ErrorKind::ConfigError, path + ": expected " + std::to_string(N) + " numbers");
    }
    for (int i = 0; i < N; ++i) {
      if (!v[i].is_number()) throw Error(ErrorKind::ConfigError, path + ": expected numbers");
      target[i] = v[i].get<double>();
    }
  };
}

struct Binding {
  Fields top, sim, noise, extrinsics, update, gn, obs;
  Eigen::Matrix<double, 9, 1> R_flat;
  Vec3 lever;

  explicit Binding(ExperimentConfig& c) {
    SimConfig& s = c.sim;
    R_flat = Eigen::Map<const Eigen::Matrix<double, 9, 1>>(Eigen::Matrix3d(s.extrinsics.R.transpose()).data());
    lever = s.extrinsics.p;
    noise = {{"sigma_g", field(s.noise.sigma_g)},
             {"sigma_wg", field(s.noise.sigma_wg)},
             {"sigma_a", field(s.noise.sigma_a)},
             {"sigma_wa", field(s.noise.sigma_wa)}};
    extrinsics = {{"R", fixed_array<9>(R_flat)}, {"p", fixed_array<3>(lever)}};
    sim = {{"radius", field(s.radius)},
           {"loops", field(s.loops)},
           {"loop_period", field(s.loop_period)},
           {"imu_rate", field(s.imu_rate)},
           {"cam_rate", field(s.cam_rate)},
           {"n_points", field(s.n_points)},
           {"n_lines", field(s.n_lines)},
           {"inner_radius", field(s.inner_radius)},
           {"outer_radius", field(s.outer_radius)},
           {"wall_side", field(s.wall_side)},
           {"wall_half_height", field(s.wall_half_height)},
           {"min_line_height", field(s.min_line_height)},
           {"visibility_range", field(s.visibility_range)},
           {"pixel_sigma", field(s.pixel_sigma)},
           {"vp_pixel_sigma", field(s.vp_pixel_sigma)},
           {"focal_length", field(s.focal_length)},
           {"half_width", field(s.half_width)},
           {"half_height", field(s.half_height)},
           {"near_clip", field(s.near_clip)},
           {"min_segment", field(s.min_segment)},
           {"vp_max_coord", field(s.vp_max_coord)},
           {"window_size", field(s.window_size)},
           {"min_track", field(s.min_track)},
           {"init_sigma_theta", field(s.init_sigma_theta)},
           {"init_sigma_v", field(s.init_sigma_v)},
           {"init_sigma_p", field(s.init_sigma_p)},
           {"init_sigma_bg", field(s.init_sigma_bg)},
           {"init_sigma_ba", field(s.init_sigma_ba)},
           {"noise_scale", field(s.noise_scale)},
           {"init_error_scale", field(s.init_error_scale)},
           {"noise", [this](const json& v, const std::string& p) { read_object(v, p, noise); }},
           {"extrinsics", [this](const json& v, const std::string& p) { read_object(v, p, extrinsics); }}};
    update = {{"chi2_confidence", field(s.chi2_confidence)}, {"max_features", field(s.max_features)}};
    gn = {{"max_iters", field(s.gn.max_iters)},
          {"step_tolerance", field(s.gn.step_tolerance)},
          {"lambda0", field(s.gn.lambda0)},
          {"lambda_up", field(s.gn.lambda_up)},
          {"lambda_down", field(s.gn.lambda_down)},
          {"lambda_max", field(s.gn.lambda_max)},
          {"huber", field(s.gn.huber)}};
    obs = {{"frames", field(c.obs.frames)},
           {"frame_dt", field(c.obs.frame_dt)},
           {"imu_steps_per_frame", field(c.obs.imu_steps_per_frame)},
           {"seed", field(c.obs.seed)},
           {"est_sigma_theta", field(c.obs.est_sigma_theta)},
           {"est_sigma_v", field(c.obs.est_sigma_v)},
           {"est_sigma_p", field(c.obs.est_sigma_p)},
           {"est_sigma_line", field(c.obs.est_sigma_line)}};
    top = {{"sim", [this](const json& v, const std::string& p) { read_object(v, p, sim); }},
           {"update", [this](const json& v, const std::string& p) { read_object(v, p, update); }},
           {"gn", [this](const json& v, const std::string& p) { read_object(v, p, gn); }},
           {"obscheck", [this](const json& v, const std::string& p) { read_object(v, p, obs); }},
           {"variants",
            [&c](const json& v, const std::string& p) {
              if (!v.is_array() || v.empty()) throw Error(ErrorKind::ConfigError, p + ": expected a non-empty list");
              c.variants.clear();
              for (const auto& e : v) {
                if (!e.is_string()) throw Error(ErrorKind::ConfigError, p + ": expected strings");
                c.variants.push_back(parse_variant(e.get<std::string>()));
              }
            }},
           {"output_dir", field(c.output_dir)},
           {"seed", field(s.seed)},
           {"runs", field(s.runs)},
           {"nees_full_state", field(c.nees_full_state)},
           {"threads", field(c.threads)}};
  }
};

}  // namespace

ExperimentConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ParseError, e.what());
  }
  ExperimentConfig cfg;
  Binding b(cfg);
  read_object(j, "", b.top);
  Mat3 R;
  R << b.R_flat[0], b.R_flat[1], b.R_flat[2], b.R_flat[3], b.R_flat[4], b.R_flat[5], b.R_flat[6], b.R_flat[7],
      b.R_flat[8];
  cfg.sim.extrinsics = Pose{R, b.lever};
  cfg.sim.validate();
  cfg.obs.radius = cfg.sim.radius;
  cfg.obs.loop_period = cfg.sim.loop_period;
  cfg.obs.extrinsics = cfg.sim.extrinsics;
  if (cfg.obs.frames < 1 || cfg.obs.frame_dt <= 0 || cfg.obs.imu_steps_per_frame < 1) {
    throw Error(ErrorKind::ConfigError, "obscheck: frames, frame_dt and imu_steps_per_frame must be positive");
  }
  if (cfg.threads < 0) throw Error(ErrorKind::ConfigError, "threads must be >= 0");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot read config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const ExperimentConfig& c) {
  const SimConfig& s = c.sim;
  json j;
  json sim = {{"radius", s.radius},
              {"loops", s.loops},
              {"loop_period", s.loop_period},
              {"imu_rate", s.imu_rate},
              {"cam_rate", s.cam_rate},
              {"n_points", s.n_points},
              {"n_lines", s.n_lines},
              {"inner_radius", s.inner_radius},
              {"outer_radius", s.outer_radius},
              {"wall_side", s.wall_side},
              {"wall_half_height", s.wall_half_height},
              {"min_line_height", s.min_line_height},
              {"visibility_range", s.visibility_range},
              {"pixel_sigma", s.pixel_sigma},
              {"vp_pixel_sigma", s.vp_pixel_sigma},
              {"focal_length", s.focal_length},
              {"half_width", s.half_width},
              {"half_height", s.half_height},
              {"near_clip", s.near_clip},
              {"min_segment", s.min_segment},
              {"vp_max_coord", s.vp_max_coord},
              {"window_size", s.window_size},
              {"min_track", s.min_track},
              {"init_sigma_theta", s.init_sigma_theta},
              {"init_sigma_v", s.init_sigma_v},
              {"init_sigma_p", s.init_sigma_p},
              {"init_sigma_bg", s.init_sigma_bg},
              {"init_sigma_ba", s.init_sigma_ba},
              {"noise_scale", s.noise_scale},
              {"init_error_scale", s.init_error_scale}};
  sim["noise"] = {{"sigma_g", s.noise.sigma_g},
                  {"sigma_wg", s.noise.sigma_wg},
                  {"sigma_a", s.noise.sigma_a},
                  {"sigma_wa", s.noise.sigma_wa}};
  std::vector<double> R;
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) R.push_back(s.extrinsics.R(r, k));
  }
  sim["extrinsics"] = {{"R", R}, {"p", {s.extrinsics.p.x(), s.extrinsics.p.y(), s.extrinsics.p.z()}}};
  j["sim"] = sim;
  j["update"] = {{"chi2_confidence", s.chi2_confidence}, {"max_features", s.max_features}};
  j["gn"] = {{"max_iters", s.gn.max_iters},   {"step_tolerance", s.gn.step_tolerance},
             {"lambda0", s.gn.lambda0},       {"lambda_up", s.gn.lambda_up},
             {"lambda_down", s.gn.lambda_down}, {"lambda_max", s.gn.lambda_max},
             {"huber", s.gn.huber}};
  j["obscheck"] = {{"frames", c.obs.frames},
                   {"frame_dt", c.obs.frame_dt},
                   {"imu_steps_per_frame", c.obs.imu_steps_per_frame},
                   {"seed", c.obs.seed},
                   {"est_sigma_theta", c.obs.est_sigma_theta},
                   {"est_sigma_v", c.obs.est_sigma_v},
                   {"est_sigma_p", c.obs.est_sigma_p},
                   {"est_sigma_line", c.obs.est_sigma_line}};
  std::vector<std::string> variants;
  for (Variant v : c.variants) variants.push_back(to_string(v));
  j["variants"] = variants;
  j["output_dir"] = c.output_dir;
  j["seed"] = s.seed;
  j["runs"] = s.runs;
  j["nees_full_state"] = c.nees_full_state;
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

}  // namespace plvio
