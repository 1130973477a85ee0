#include "proprio/env.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace proprio {

const char* shape_name(Shape s) {
  switch (s) {
    case Shape::rect: return "rect";
    case Shape::disc: return "disc";
    case Shape::ellipse: return "ellipse";
  }
  return "?";
}

Shape shape_from_name(const std::string& name) {
  if (name == "rect") return Shape::rect;
  if (name == "disc") return Shape::disc;
  if (name == "ellipse") return Shape::ellipse;
  throw std::invalid_argument("unknown shape '" + name + "'");
}

void EnvConfig::validate() const {
  if (num_fingers < 1) throw std::invalid_argument("num_fingers must be >= 1");
  if (base_radius <= finger_length) {
    throw std::invalid_argument("base_radius must exceed finger_length");
  }
  if (half_extent_min <= base_radius - finger_length) {
    throw std::invalid_argument(
        "half_extent_min must exceed the closest tip approach");
  }
  if (half_extent_max < half_extent_min) {
    throw std::invalid_argument("half extent range is empty");
  }
  if (omega_max <= 0.0) throw std::invalid_argument("omega_max must be > 0");
  if (angle_min >= angle_max) throw std::invalid_argument("angle limits inverted");
  if (contact_stiffness < 0.0) throw std::invalid_argument("negative stiffness");
  if (episode_length < 1) throw std::invalid_argument("episode_length must be >= 1");
  if (obs_noise_std < 0.0) throw std::invalid_argument("negative obs noise");
  if (bisection_iters < 1) throw std::invalid_argument("bisection_iters must be >= 1");
}

std::uint64_t EnvConfig::hash() const {
  char buf[512];
  std::snprintf(buf, sizeof(buf),
                "%d|%.17g|%.17g|%.17g|%.17g|%.17g|%.17g|%d|%.17g|%.17g|%.17g|%d",
                num_fingers, base_radius, finger_length, omega_max, angle_min,
                angle_max, contact_stiffness, episode_length, half_extent_min,
                half_extent_max, obs_noise_std, bisection_iters);
  std::uint64_t h = 1469598103934665603ull;  // FNV-1a 64
  for (const char* p = buf; *p; ++p) {
    h ^= static_cast<unsigned char>(*p);
    h *= 1099511628211ull;
  }
  return h;
}

std::vector<std::string> observation_layout(const EnvConfig& cfg) {
  static const char* kinds[4] = {"angle", "velocity", "effort", "touch"};
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(cfg.obs_dim()));
  for (int i = 0; i < cfg.num_fingers; ++i) {
    for (const char* k : kinds) {
      names.push_back(std::string(k) + "_" + std::to_string(i));
    }
  }
  return names;
}

Eigen::Vector2d finger_base(int finger, const EnvConfig& cfg) {
  const double beta = 2.0 * M_PI * finger / cfg.num_fingers;
  return {cfg.base_radius * std::cos(beta), cfg.base_radius * std::sin(beta)};
}

Eigen::Vector2d tip_position(int finger, double theta, const EnvConfig& cfg) {
  const double beta = 2.0 * M_PI * finger / cfg.num_fingers;
  // tip = base + L * Rot(theta) * (-base_hat)
  return {cfg.base_radius * std::cos(beta) - cfg.finger_length * std::cos(beta + theta),
          cfg.base_radius * std::sin(beta) - cfg.finger_length * std::sin(beta + theta)};
}

bool point_in_object(const Eigen::Vector2d& p, const ObjectSpec& obj) {
  const double c = std::cos(obj.phi), s = std::sin(obj.phi);
  const double x = c * p.x() + s * p.y();
  const double y = -s * p.x() + c * p.y();
  switch (obj.shape) {
    case Shape::rect:
      return std::abs(x) <= obj.a && std::abs(y) <= obj.b;
    case Shape::disc:
      return x * x + y * y <= obj.a * obj.a;
    case Shape::ellipse: {
      const double u = x / obj.a, v = y / obj.b;
      return u * u + v * v <= 1.0;
    }
  }
  return false;
}

double contact_angle(int finger, double theta_from, double theta_to,
                     const ObjectSpec& obj, const EnvConfig& cfg) {
  if (point_in_object(tip_position(finger, theta_from, cfg), obj)) {
    throw std::invalid_argument("contact_angle: sweep starts inside the object");
  }
  if (!point_in_object(tip_position(finger, theta_to, cfg), obj)) {
    throw std::invalid_argument("contact_angle: sweep ends outside the object");
  }
  double lo = theta_from, hi = theta_to;  // tip(lo) outside, tip(hi) inside
  for (int it = 0; it < cfg.bisection_iters; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (point_in_object(tip_position(finger, mid, cfg), obj)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return lo;
}

ObjectSpec sample_object(const EnvConfig& cfg, Rng& rng) {
  ObjectSpec obj;
  const int k = rng.uniform_int(3);
  obj.shape = static_cast<Shape>(k);
  obj.a = rng.uniform(cfg.half_extent_min, cfg.half_extent_max);
  obj.b = rng.uniform(cfg.half_extent_min, cfg.half_extent_max);
  obj.phi = rng.uniform(0.0, M_PI);
  if (obj.shape == Shape::disc) obj.b = obj.a;
  return obj;
}

GripperEnv::GripperEnv(EnvConfig cfg, std::uint64_t seed)
    : cfg_(std::move(cfg)), rng_(seed) {
  cfg_.validate();
  obj_ = sample_object(cfg_, rng_);
  theta_ = Eigen::VectorXd::Constant(cfg_.num_fingers, -1.0);
}

GripperEnv::GripperEnv(EnvConfig cfg, ObjectSpec obj, std::uint64_t seed)
    : cfg_(std::move(cfg)), obj_(obj), rng_(seed) {
  cfg_.validate();
  theta_ = Eigen::VectorXd::Constant(cfg_.num_fingers, -1.0);
}

Eigen::VectorXd GripperEnv::initial_observation() const {
  Eigen::VectorXd obs = Eigen::VectorXd::Zero(cfg_.obs_dim());
  for (int i = 0; i < cfg_.num_fingers; ++i) {
    obs[obs_angle_index(i)] = theta_[i];
  }
  return obs;
}

void GripperEnv::set_angles(const Eigen::VectorXd& theta) {
  if (theta.size() != cfg_.num_fingers) {
    throw std::invalid_argument("set_angles: wrong finger count");
  }
  for (int i = 0; i < cfg_.num_fingers; ++i) {
    if (point_in_object(tip_position(i, theta[i], cfg_), obj_)) {
      throw std::invalid_argument("set_angles: fingertip inside the object");
    }
  }
  theta_ = theta;
}

Eigen::VectorXd GripperEnv::step(const Eigen::VectorXd& action) {
  if (action.size() != cfg_.num_fingers) {
    throw std::invalid_argument("step: wrong action length");
  }
  Eigen::VectorXd obs(cfg_.obs_dim());
  for (int i = 0; i < cfg_.num_fingers; ++i) {
    const double u = std::clamp(action[i], -1.0, 1.0);
    const double theta_des =
        std::clamp(theta_[i] + cfg_.omega_max * u, cfg_.angle_min, cfg_.angle_max);
    double theta_new = theta_des;
    double touch = 0.0;
    if (point_in_object(tip_position(i, theta_des, cfg_), obj_)) {
      theta_new = contact_angle(i, theta_[i], theta_des, obj_, cfg_);
      touch = cfg_.contact_stiffness * std::abs(theta_des - theta_new);
    }
    const double velocity = theta_new - theta_[i];
    const double effort = u - velocity / cfg_.omega_max;
    obs[obs_angle_index(i)] = theta_new;
    obs[obs_velocity_index(i)] = velocity;
    obs[obs_effort_index(i)] = effort;
    obs[obs_touch_index(i)] = touch;
    theta_[i] = theta_new;
  }
  if (cfg_.obs_noise_std > 0.0) {
    for (int d = 0; d < obs.size(); ++d) {
      obs[d] += rng_.normal(0.0, cfg_.obs_noise_std);
    }
  }
  ++t_;
  return obs;
}

GraspScript GraspScript::sample(Rng& rng) {
  GraspScript s;
  s.close_target = 1.2 + rng.uniform(-0.1, 0.1);
  s.open_target = -1.0 + rng.uniform(-0.1, 0.1);
  return s;
}

double GraspScript::target_at(int t) const {
  return ((t / 10) % 2 == 0) ? close_target : open_target;
}

Eigen::VectorXd GraspScript::action(int t, const Eigen::VectorXd& theta) const {
  const double target = target_at(t);
  Eigen::VectorXd u(theta.size());
  for (int i = 0; i < theta.size(); ++i) {
    u[i] = std::clamp(4.0 * (target - theta[i]), -1.0, 1.0);
  }
  return u;
}

bool open_marker(int t) { return (t / 10) % 2 == 0; }

std::vector<std::pair<int, bool>> grasp_markers(int episode_length) {
  std::vector<std::pair<int, bool>> markers;
  for (int t = 0; t < episode_length; t += 10) {
    markers.emplace_back(t, open_marker(t));
  }
  return markers;
}

}  // namespace proprio
