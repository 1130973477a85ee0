#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "proprio/rng.hpp"

namespace proprio {

enum class Shape : int { rect = 0, disc = 1, ellipse = 2 };

const char* shape_name(Shape s);
Shape shape_from_name(const std::string& name);

// The unobserved state: a static object centered at the origin, felt only
// through the motion constraints it imposes. Never part of an observation;
// carried alongside episodes purely as the diagnostic label.
struct ObjectSpec {
  Shape shape = Shape::rect;
  double a = 0.3;    // half extent (disc radius)
  double b = 0.3;    // second half extent (disc: == a)
  double phi = 0.0;  // orientation in [0, pi)
};

struct EnvConfig {
  int num_fingers = 4;
  double base_radius = 1.0;
  double finger_length = 0.72;
  double omega_max = 0.15;  // rad per step
  double angle_min = -1.2;
  double angle_max = 1.2;
  double contact_stiffness = 10.0;  // touch per rad of blocked motion
  int episode_length = 60;
  double half_extent_min = 0.30;
  double half_extent_max = 0.45;
  double obs_noise_std = 0.0;
  int bisection_iters = 24;

  int obs_dim() const { return 4 * num_fingers; }
  void validate() const;
  std::uint64_t hash() const;  // FNV-1a over a canonical field dump
};

// Sensor layout per finger: [angle, velocity, effort, touch], flattened
// finger-major into a vector of length 4F.
inline int obs_angle_index(int finger) { return 4 * finger + 0; }
inline int obs_velocity_index(int finger) { return 4 * finger + 1; }
inline int obs_effort_index(int finger) { return 4 * finger + 2; }
inline int obs_touch_index(int finger) { return 4 * finger + 3; }
std::vector<std::string> observation_layout(const EnvConfig& cfg);

Eigen::Vector2d finger_base(int finger, const EnvConfig& cfg);
// One rigid link of length L hinged at the base; theta = 0 points the tip
// straight at the workspace center.
Eigen::Vector2d tip_position(int finger, double theta, const EnvConfig& cfg);
bool point_in_object(const Eigen::Vector2d& p, const ObjectSpec& obj);
// Largest contact-free angle between theta_from (tip outside) and theta_to
// (tip inside), localized by bisection_iters halvings.
double contact_angle(int finger, double theta_from, double theta_to,
                     const ObjectSpec& obj, const EnvConfig& cfg);

ObjectSpec sample_object(const EnvConfig& cfg, Rng& rng);

class GripperEnv {
 public:
  GripperEnv(EnvConfig cfg, std::uint64_t seed);
  GripperEnv(EnvConfig cfg, ObjectSpec obj, std::uint64_t seed);

  const EnvConfig& config() const { return cfg_; }
  const ObjectSpec& object() const { return obj_; }  // diagnostic label only
  const Eigen::VectorXd& angles() const { return theta_; }
  int step_index() const { return t_; }

  // Sensors of the untouched starting pose: angles at the open position,
  // velocity/effort/touch all zero.
  Eigen::VectorXd initial_observation() const;

  // Clamps the action to the box, moves each finger at most omega_max toward
  // its desired angle, stops at object contact, and returns the sensors.
  Eigen::VectorXd step(const Eigen::VectorXd& action);

  // Test hook: place the fingers directly (still must be contact-free).
  void set_angles(const Eigen::VectorXd& theta);

 private:
  EnvConfig cfg_;
  ObjectSpec obj_;
  Eigen::VectorXd theta_;
  int t_ = 0;
  Rng rng_;  // observation noise only
};

// Proportional grasp schedule: the target alternates every 10 steps between
// a close pose and an open pose, both jittered once per episode.
struct GraspScript {
  double close_target = 1.2;
  double open_target = -1.0;

  static GraspScript sample(Rng& rng);
  double target_at(int t) const;
  Eigen::VectorXd action(int t, const Eigen::VectorXd& theta) const;
};

// Marker at the beginning of step t (t a multiple of 10); true = open pose.
bool open_marker(int t);
std::vector<std::pair<int, bool>> grasp_markers(int episode_length);

}  // namespace proprio
