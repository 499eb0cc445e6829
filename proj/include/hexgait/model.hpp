#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexgait/transform.hpp"

namespace hexgait {

constexpr int kMaxLegs = 8;
constexpr int kMaxJoints = 6;

// Joint-space vector for one leg. Fixed capacity keeps per-tick math off the heap.
using JointVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxJoints, 1>;

// Raised for malformed documents and for any out-of-range field. `field` is a
// path such as "legs[2].joints[0].position_max".
class ConfigError : public std::runtime_error
{
public:
  ConfigError(std::string field, const std::string& message)
      : std::runtime_error(field.empty() ? message : field + ": " + message), field_(std::move(field))
  {
  }
  const std::string& field() const { return field_; }

private:
  std::string field_;
};

enum class JointType
{
  Revolute,
  Prismatic,
};

// Denavit-Hartenberg row. For a revolute joint `theta` is the constant offset
// added to the joint angle.
struct DHParam
{
  double theta = 0.0;
  double d = 0.0;
  double a = 0.0;
  double alpha = 0.0;
  JointType type = JointType::Revolute;

  bool operator==(const DHParam&) const = default;
};

struct JointSpec
{
  std::string name;
  double position_min = -kPi;
  double position_max = kPi;
  double velocity_max = 1.0;
  double jla_weight = 1.0;
  double home_angle = 0.0;
  double packed_angle = 0.0;

  double range() const { return position_max - position_min; }
  double centre() const { return 0.5 * (position_min + position_max); }
  bool within_limits(double q) const { return q >= position_min && q <= position_max; }

  bool operator==(const JointSpec&) const = default;
};

struct JointLink
{
  JointSpec joint;
  DHParam dh;

  bool operator==(const JointLink&) const = default;
};

struct LegSpec
{
  int id = 1;
  std::string name;
  Transform base_frame = Transform::Identity();  // leg frame expressed in the body frame
  std::vector<JointLink> joints;
  Vec3 default_tip = Vec3::Zero();                // body frame
  std::optional<Vec3> tip_direction;              // body frame; constrains the last link axis (>= 5 joints)

  std::size_t joint_count() const { return joints.size(); }

  JointVector home() const
  {
    JointVector q(static_cast<Eigen::Index>(joints.size()));
    for (std::size_t i = 0; i < joints.size(); ++i) q[static_cast<Eigen::Index>(i)] = joints[i].joint.home_angle;
    return q;
  }
  JointVector packed() const
  {
    JointVector q(static_cast<Eigen::Index>(joints.size()));
    for (std::size_t i = 0; i < joints.size(); ++i) q[static_cast<Eigen::Index>(i)] = joints[i].joint.packed_angle;
    return q;
  }

  bool operator==(const LegSpec& o) const
  {
    // The base frame is stored as xyz/rpy in documents, so compare it to rounding level.
    return id == o.id && name == o.name &&
           (base_frame.matrix() - o.base_frame.matrix()).cwiseAbs().maxCoeff() <= 1e-12 && joints == o.joints &&
           default_tip == o.default_tip && tip_direction == o.tip_direction;
  }
};

// Translation limits (metres) then rotation limits (radians): x, y, z, roll, pitch, yaw.
using PoseLimits = std::array<double, 6>;

struct PidGains
{
  double kp = 0.5;
  double ki = 1.0;
  double kd = 0.05;
  double output_limit = 0.35;    // rad
  double integral_limit = 0.5;   // rad*s
  double derivative_filter = 0.25;  // s, first-order filter on the error derivative

  bool operator==(const PidGains&) const = default;
};

struct AdmittanceParams
{
  bool enabled = false;
  double virtual_mass = 0.1;        // kg
  double virtual_damping = 5.0;     // N*s/m
  double virtual_stiffness = 1000;  // N/m

  bool operator==(const AdmittanceParams&) const = default;
};

struct JlaParams
{
  int p = 2;
  double position_weight = 0.25;
  double velocity_weight = 0.75;
  double gradient_cap = 0.01;  // max |v| per IK step, rad

  bool operator==(const JlaParams&) const = default;
};

struct WorkspaceSearch
{
  double height_min = -0.04;
  double height_max = 0.04;
  double height_step = 0.02;
  double bearing_step = 5.0 * kPi / 180.0;
  double radial_step = 0.005;
  double tip_tolerance = 0.002;
  double max_radius = 1.0;  // hard stop for the outward walk

  bool operator==(const WorkspaceSearch&) const = default;
};

struct TouchdownParams
{
  double force_threshold = 5.0;  // N
  int ticks = 3;
  double release_ratio = 0.5;

  bool operator==(const TouchdownParams&) const = default;
};

// Quasi-static power proxy; absolute values are not meant to match hardware.
struct PowerParams
{
  double idle = 28.0;          // W
  double holding = 1.5;        // W per N*m of static torque
  double mechanical = 1.0;     // multiplier on |tau*omega|
  double joint_viscous = 0.4;  // N*m*s/rad, added to joint torque in motion

  bool operator==(const PowerParams&) const = default;
};

struct AutoPoseAxis
{
  double amplitude = 0.0;
  double phase = 0.0;  // fraction of the gait cycle

  bool operator==(const AutoPoseAxis&) const = default;
};

// Sinusoidal body pose keyed to gait phase: x, y, z, roll, pitch, yaw.
struct AutoPoseSpec
{
  std::array<AutoPoseAxis, 6> axes{};
  int period_cycles = 1;

  bool operator==(const AutoPoseSpec&) const = default;
};

struct Keyframe
{
  std::vector<std::vector<double>> targets;  // [leg index][joint index]
  double duration = 1.0;

  bool operator==(const Keyframe&) const = default;
};

struct SequenceSpec
{
  std::string name;
  std::vector<Keyframe> keyframes;

  bool operator==(const SequenceSpec&) const = default;
};

struct RobotSpec
{
  std::string name;
  std::vector<LegSpec> legs;
  double mass = 1.0;
  double body_clearance = 0.1;
  double step_clearance = 0.05;
  double step_frequency = 1.0;
  PoseLimits max_manual_pose{0.05, 0.05, 0.05, 0.2, 0.2, 0.3};
  PidGains imu_pid;
  AdmittanceParams admittance;
  JlaParams jla;
  double ik_lambda = 0.05;
  double swing_width = 0.0;
  double swing_depth = 0.0;
  double max_acceleration = 0.5;  // body linear acceleration limit, m/s^2
  WorkspaceSearch workspace;
  TouchdownParams touchdown;
  PowerParams power;
  AutoPoseSpec auto_pose;
  std::string default_gait = "tripod";
  std::map<std::string, SequenceSpec> sequences;

  std::size_t leg_count() const { return legs.size(); }
  std::size_t total_joints() const
  {
    std::size_t n = 0;
    for (const auto& l : legs) n += l.joint_count();
    return n;
  }
  const LegSpec& leg_by_id(int id) const
  {
    for (const auto& l : legs)
      if (l.id == id) return l;
    throw std::out_of_range("unknown leg id " + std::to_string(id));
  }

  bool operator==(const RobotSpec&) const = default;
};

struct GaitSpec
{
  std::string name;
  int stance_phase = 1;
  int swing_phase = 1;
  int phase_offset = 0;
  std::vector<int> offset_multiplier;

  int period() const { return stance_phase + swing_phase; }
  double duty_factor() const { return static_cast<double>(stance_phase) / period(); }

  bool operator==(const GaitSpec&) const = default;
};

namespace detail {

inline void require(bool ok, const std::string& field, const std::string& message)
{
  if (!ok) throw ConfigError(field, message);
}

inline void require_finite(double v, const std::string& field)
{
  require(std::isfinite(v), field, "must be finite");
}

inline std::string index_path(const std::string& base, std::size_t i)
{
  return base + "[" + std::to_string(i) + "]";
}

}  // namespace detail

inline void validate(const DHParam& dh, const std::string& path)
{
  using detail::require;
  detail::require_finite(dh.theta, path + ".theta");
  detail::require_finite(dh.d, path + ".d");
  detail::require_finite(dh.a, path + ".a");
  detail::require_finite(dh.alpha, path + ".alpha");
  require(dh.a >= 0.0, path + ".a", "must be >= 0");
  require(dh.type == JointType::Revolute, path + ".type", "only revolute joints are supported");
}

inline void validate(const JointSpec& j, const std::string& path)
{
  using detail::require;
  for (double v : {j.position_min, j.position_max, j.velocity_max, j.jla_weight, j.home_angle, j.packed_angle})
    detail::require_finite(v, path);
  require(j.position_min < j.position_max, path + ".position_min", "must be < position_max");
  require(j.velocity_max > 0.0, path + ".velocity_max", "must be > 0");
  require(j.jla_weight >= 0.0, path + ".jla_weight", "must be >= 0");
  require(j.within_limits(j.home_angle), path + ".home", "outside joint limits");
  require(j.within_limits(j.packed_angle), path + ".packed", "outside joint limits");
}

inline void validate(const GaitSpec& g, const std::string& path = "gait")
{
  using detail::require;
  require(g.stance_phase > 0, path + ".stance_phase", "must be > 0 (duty factor in (0,1))");
  require(g.swing_phase > 0, path + ".swing_phase", "must be > 0 (duty factor in (0,1))");
  require(g.phase_offset >= 0, path + ".phase_offset", "must be >= 0");
  require(!g.offset_multiplier.empty(), path + ".offset_multiplier", "must list one entry per leg");
  for (std::size_t i = 0; i < g.offset_multiplier.size(); ++i) {
    const int shift = g.offset_multiplier[i] * g.phase_offset;
    require(g.offset_multiplier[i] >= 0 && shift < g.period(), detail::index_path(path + ".offset_multiplier", i),
            "offset must lie in [0, period)");
  }
}

// Legs with a base offset must be numbered clockwise (seen from above).
inline bool legs_clockwise(const std::vector<LegSpec>& legs)
{
  std::vector<double> bearings;
  for (const auto& l : legs) {
    const Vec3 p = l.base_frame.translation();
    if (std::hypot(p.x(), p.y()) > 1e-9) bearings.push_back(std::atan2(p.y(), p.x()));
  }
  if (bearings.size() < 3) return true;
  double turn = 0.0;
  for (std::size_t i = 0; i < bearings.size(); ++i) {
    double step = bearings[i] - bearings[(i + 1) % bearings.size()];
    step = std::fmod(step, 2.0 * kPi);
    if (step < 0) step += 2.0 * kPi;
    turn += step;
  }
  return std::abs(turn - 2.0 * kPi) < 1e-6;
}

inline void validate(const RobotSpec& r)
{
  using detail::require;
  require(!r.legs.empty(), "legs", "at least one leg required");
  require(r.legs.size() <= static_cast<std::size_t>(kMaxLegs), "legs", "leg count exceeds 8");
  require(std::isfinite(r.mass) && r.mass > 0.0, "mass", "must be > 0");
  require(std::isfinite(r.body_clearance) && r.body_clearance >= 0.0, "body_clearance", "must be >= 0");
  require(std::isfinite(r.step_clearance) && r.step_clearance > 0.0, "step_clearance", "must be > 0");
  require(std::isfinite(r.step_frequency) && r.step_frequency > 0.0, "step_frequency", "must be > 0");
  require(std::isfinite(r.ik_lambda) && r.ik_lambda > 0.0, "ik_lambda", "must be > 0");
  require(r.jla.p >= 2 && r.jla.p % 2 == 0, "jla.p", "must be an even integer >= 2");
  require(r.jla.position_weight >= 0.0 && r.jla.velocity_weight >= 0.0, "jla", "weights must be >= 0");
  require(r.jla.gradient_cap > 0.0, "jla.gradient_cap", "must be > 0");
  for (std::size_t i = 0; i < r.max_manual_pose.size(); ++i)
    require(std::isfinite(r.max_manual_pose[i]) && r.max_manual_pose[i] >= 0.0,
            detail::index_path("max_manual_pose", i), "must be >= 0");
  require(r.imu_pid.kp >= 0 && r.imu_pid.ki >= 0 && r.imu_pid.kd >= 0, "imu_pid", "gains must be >= 0");
  require(r.imu_pid.output_limit > 0 && r.imu_pid.integral_limit > 0, "imu_pid", "limits must be > 0");
  require(r.imu_pid.derivative_filter >= 0, "imu_pid.derivative_filter", "must be >= 0");
  require(r.admittance.virtual_mass > 0 && r.admittance.virtual_damping > 0 && r.admittance.virtual_stiffness > 0,
          "admittance", "virtual mass, damping and stiffness must be > 0");
  require(r.max_acceleration > 0.0, "max_acceleration", "must be > 0");
  require(r.swing_width >= 0.0 && r.swing_depth >= 0.0, "swing_width", "swing width/depth must be >= 0");

  const auto& ws = r.workspace;
  require(ws.height_step > 0 && ws.bearing_step > 0 && ws.radial_step > 0 && ws.tip_tolerance > 0, "workspace",
          "search increments must be > 0");
  require(ws.height_min <= ws.height_max, "workspace.height_min", "must be <= height_max");
  require(ws.max_radius > 0, "workspace.max_radius", "must be > 0");
  require(r.touchdown.force_threshold > 0 && r.touchdown.ticks >= 1, "touchdown", "threshold > 0, ticks >= 1");
  require(r.touchdown.release_ratio > 0 && r.touchdown.release_ratio <= 1, "touchdown.release_ratio", "in (0,1]");
  require(r.power.idle >= 0 && r.power.holding >= 0 && r.power.mechanical >= 0 && r.power.joint_viscous >= 0,
          "power", "constants must be >= 0");
  require(r.auto_pose.period_cycles >= 1, "auto_pose.period_cycles", "must be >= 1");

  std::vector<int> ids;
  for (std::size_t li = 0; li < r.legs.size(); ++li) {
    const auto& leg = r.legs[li];
    const std::string lp = detail::index_path("legs", li);
    require(leg.id >= 1 && leg.id <= kMaxLegs, lp + ".id", "must be in 1..8");
    for (int other : ids) require(other != leg.id, lp + ".id", "duplicate leg id");
    require(ids.empty() || leg.id > ids.back(), lp + ".id", "legs must be listed in increasing id order");
    ids.push_back(leg.id);
    require(!leg.joints.empty(), lp + ".joints", "at least one joint required");
    require(leg.joints.size() <= static_cast<std::size_t>(kMaxJoints), lp + ".joints", "joint count exceeds 6");
    require(is_rigid(leg.base_frame, 1e-6), lp + ".base", "not a rigid transform");
    require(leg.default_tip.allFinite(), lp + ".default_tip", "must be finite");
    if (leg.tip_direction) {
      require(leg.tip_direction->allFinite() && leg.tip_direction->norm() > 1e-9, lp + ".tip_direction",
              "must be a finite non-zero vector");
      require(leg.joints.size() >= 5, lp + ".tip_direction", "needs at least 5 joints");
    }
    for (std::size_t ji = 0; ji < leg.joints.size(); ++ji) {
      const std::string jp = detail::index_path(lp + ".joints", ji);
      validate(leg.joints[ji].joint, jp);
      validate(leg.joints[ji].dh, jp + ".dh");
    }
  }
  require(legs_clockwise(r.legs), "legs", "leg ids must follow the clockwise convention from the front right leg");

  for (const auto& [name, seq] : r.sequences) {
    const std::string sp = "sequences." + name;
    require(!seq.keyframes.empty(), sp, "at least one keyframe required");
    for (std::size_t k = 0; k < seq.keyframes.size(); ++k) {
      const auto& kf = seq.keyframes[k];
      const std::string kp = detail::index_path(sp, k);
      require(std::isfinite(kf.duration) && kf.duration > 0, kp + ".duration", "must be > 0");
      require(kf.targets.size() == r.legs.size(), kp, "keyframe must cover every leg");
      for (std::size_t li = 0; li < r.legs.size(); ++li) {
        require(kf.targets[li].size() == r.legs[li].joint_count(), kp, "keyframe must cover every joint");
        for (std::size_t ji = 0; ji < kf.targets[li].size(); ++ji)
          require(r.legs[li].joints[ji].joint.within_limits(kf.targets[li][ji]), kp, "target outside joint limits");
      }
    }
  }
}

inline const GaitSpec& find_gait(const std::vector<GaitSpec>& gaits, const std::string& name)
{
  for (const auto& g : gaits)
    if (g.name == name) return g;
  throw ConfigError("gaits." + name, "unknown gait");
}

// Cross-checks a gait against a robot (one offset per leg).
inline void validate_gait_for_robot(const GaitSpec& g, const RobotSpec& r)
{
  detail::require(g.offset_multiplier.size() == r.legs.size(), "gaits." + g.name + ".offset_multiplier",
                  "needs one entry per leg (" + std::to_string(r.legs.size()) + ")");
}

}  // namespace hexgait
