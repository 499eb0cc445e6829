#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Eigenvalues>

#include "hexgait/model.hpp"
#include "hexgait/workspace.hpp"

namespace hexgait {

// x, y, z (m) then roll, pitch, yaw (rad).
using Pose6 = std::array<double, 6>;

inline Transform pose6_transform(const Pose6& p)
{
  return pose_rpy(p[0], p[1], p[2], p[3], p[4], p[5]);
}

// Integrates a pose velocity and clamps each axis to its limit.
inline Transform manual_pose_update(Pose6& offsets, const Pose6& velocity, double dt, const PoseLimits& limits)
{
  if (!(dt > 0)) throw std::invalid_argument("dt must be > 0");
  for (std::size_t i = 0; i < 6; ++i) offsets[i] = std::clamp(offsets[i] + velocity[i] * dt, -limits[i], limits[i]);
  return pose6_transform(offsets);
}

struct PidState
{
  double integral = 0.0;
  double previous_error = 0.0;
  double derivative = 0.0;
  double output = 0.0;
  bool primed = false;
};

// Position-form PID with clamped integral, conditional integration while
// saturated, and a first-order filter on the error derivative.
inline double pid_update(PidState& s, const PidGains& g, double error, double dt)
{
  double raw_d = 0.0;
  if (s.primed) raw_d = (error - s.previous_error) / dt;
  const double alpha = g.derivative_filter > 0 ? dt / (g.derivative_filter + dt) : 1.0;
  s.derivative += alpha * (raw_d - s.derivative);
  s.previous_error = error;
  s.primed = true;

  const double candidate = std::clamp(s.integral + error * dt, -g.integral_limit, g.integral_limit);
  const double unsat = g.kp * error + g.ki * candidate + g.kd * s.derivative;
  const bool winding = std::abs(unsat) > g.output_limit && unsat * error > 0;
  if (!winding) s.integral = candidate;
  s.output = std::clamp(g.kp * error + g.ki * s.integral + g.kd * s.derivative, -g.output_limit, g.output_limit);
  return s.output;
}

struct ImuPoseState
{
  PidState roll;
  PidState pitch;
};

// Counter-rotation that drives the measured body tilt toward zero.
inline Transform imu_pose_update(ImuPoseState& s, const PidGains& g, double roll, double pitch, double dt)
{
  const double r = -pid_update(s.roll, g, roll, dt);
  const double p = -pid_update(s.pitch, g, pitch, dt);
  return make_transform(Vec3::Zero(), rotation_rpy(r, p, 0.0));
}

// Lateral shift keeping the projected centre of mass over the support centroid
// on an incline: x = -h tan(pitch), y = h tan(roll).
inline Transform inclination_pose_update(double incline_roll, double incline_pitch, double body_clearance)
{
  if (!(std::abs(incline_roll) < kPi / 2 && std::abs(incline_pitch) < kPi / 2))
    throw std::invalid_argument("incline must be below 90 degrees");
  return translation(-body_clearance * std::tan(incline_pitch), body_clearance * std::tan(incline_roll), 0.0);
}

struct WalkPlane
{
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;  // normal . p = offset
  bool valid = false;
};

// Total least squares plane through the points; invalid for fewer than three
// points or a collinear set.
inline WalkPlane walk_plane_estimate(const std::vector<Vec3>& points)
{
  WalkPlane out;
  if (points.size() < 3) return out;
  Vec3 c = Vec3::Zero();
  for (const auto& p : points) c += p;
  c /= static_cast<double>(points.size());
  Mat3 cov = Mat3::Zero();
  for (const auto& p : points) cov += (p - c) * (p - c).transpose();
  Eigen::SelfAdjointEigenSolver<Mat3> es(cov);
  const Vec3 ev = es.eigenvalues();  // ascending
  if (!(ev[1] > 1e-12 * std::max(1.0, ev[2]))) return out;
  Vec3 n = es.eigenvectors().col(0);
  if (n.z() < 0) n = -n;
  out.normal = n.normalized();
  out.offset = out.normal.dot(c);
  out.valid = true;
  return out;
}

// Orientation parallel to the plane with no yaw; translation untouched.
inline Transform walk_plane_pose(const Vec3& normal)
{
  return make_transform(Vec3::Zero(), rotation_between(Vec3::UnitZ(), normal.normalized()));
}

// Sinusoid per axis, peaking at phase fraction `phase` of its period.
inline Pose6 auto_pose_offsets(double gait_cycles, const AutoPoseSpec& spec)
{
  Pose6 out{};
  for (std::size_t i = 0; i < 6; ++i) {
    const auto& a = spec.axes[i];
    if (a.amplitude == 0.0) continue;
    out[i] = a.amplitude * std::cos(2.0 * kPi * (gait_cycles / spec.period_cycles - a.phase));
  }
  return out;
}

inline Transform auto_pose_update(double gait_cycles, const AutoPoseSpec& spec)
{
  return pose6_transform(auto_pose_offsets(gait_cycles, spec));
}

// Sub-poses are relative to the default body pose; `walk` is the walk-plane
// orientation relative to it.
struct BodyPoseState
{
  Transform p_default = Transform::Identity();
  Transform h_man = Transform::Identity();
  Transform h_inc = Transform::Identity();
  Transform h_ali = Transform::Identity();
  Transform h_ai = Transform::Identity();
  Transform walk = Transform::Identity();

  Transform p_walk() const { return p_default * walk; }
  Transform relative() const { return h_ali * h_ai * h_inc * h_man * walk; }
};

// P_body = P_default * (H_ali H_AI H_inc H_man W), with P_walk = P_default * W.
inline Transform compose_body_pose(const BodyPoseState& s)
{
  return s.p_default * s.relative();
}

// Tip target given in the default body frame, expressed in the posed body
// frame; optionally clamped to the leg workspace.
inline Vec3 combine_tip_pose(const Transform& body_relative, const Vec3& tip, const WorkspacePolyhedron* ws = nullptr,
                             bool* clamped = nullptr)
{
  Vec3 p = body_relative.inverse(Eigen::Isometry) * tip;
  if (clamped) *clamped = false;
  if (ws && !ws->slices.empty()) {
    const Vec3 d = p - ws->origin;
    const double r = std::hypot(d.x(), d.y());
    if (r > 0) {
      const double limit = ws->radius(std::atan2(d.y(), d.x()), d.z());
      if (r > limit * (1.0 + 1e-9)) {
        p.x() = ws->origin.x() + d.x() * limit / r;
        p.y() = ws->origin.y() + d.y() * limit / r;
        if (clamped) *clamped = true;
      }
    }
  }
  return p;
}

// Keyframe playback from the current joint state. Each segment lasts the
// keyframe duration, stretched so no joint exceeds its velocity limit.
class SequencePlayer
{
public:
  SequencePlayer(const SequenceSpec& seq, const RobotSpec& robot, const std::vector<JointVector>& start, double dt)
      : dt_(dt)
  {
    if (!(dt > 0)) throw std::invalid_argument("dt must be > 0");
    std::vector<JointVector> from = start;
    for (const auto& kf : seq.keyframes) {
      Segment s;
      s.from = from;
      double duration = kf.duration;
      for (std::size_t l = 0; l < robot.legs.size(); ++l) {
        JointVector to(static_cast<Eigen::Index>(kf.targets[l].size()));
        for (std::size_t j = 0; j < kf.targets[l].size(); ++j) {
          to[static_cast<Eigen::Index>(j)] = kf.targets[l][j];
          const double dq = std::abs(kf.targets[l][j] - from[l][static_cast<Eigen::Index>(j)]);
          duration = std::max(duration, dq / robot.legs[l].joints[j].joint.velocity_max);
        }
        s.to.push_back(to);
      }
      s.duration = duration;
      from = s.to;
      segments_.push_back(std::move(s));
    }
    for (const auto& s : segments_) total_ += s.duration;
  }

  // Targets at elapsed time `t` (s).
  std::vector<JointVector> sample(double t) const
  {
    double t0 = 0.0;
    for (const auto& s : segments_) {
      if (t < t0 + s.duration) {
        const double w = std::clamp((t - t0) / s.duration, 0.0, 1.0);
        std::vector<JointVector> out;
        for (std::size_t l = 0; l < s.from.size(); ++l) out.push_back(s.from[l] + w * (s.to[l] - s.from[l]));
        return out;
      }
      t0 += s.duration;
    }
    return segments_.back().to;
  }

  std::vector<JointVector> step()
  {
    ++ticks_;
    return sample(ticks_ * dt_);
  }

  bool done() const { return ticks_ * dt_ >= total_ - 1e-12; }
  double total_duration() const { return total_; }
  double elapsed() const { return ticks_ * dt_; }

private:
  struct Segment
  {
    std::vector<JointVector> from;
    std::vector<JointVector> to;
    double duration = 0.0;
  };
  std::vector<Segment> segments_;
  double dt_;
  double total_ = 0.0;
  long long ticks_ = 0;
};

enum class PoseSource
{
  None,
  Imu,
  Auto,
};

inline const char* to_string(PoseSource s)
{
  switch (s) {
    case PoseSource::None: return "none";
    case PoseSource::Imu: return "imu";
    case PoseSource::Auto: return "auto";
  }
  return "?";
}

struct PoseInputs
{
  Pose6 pose_velocity{};
  std::optional<std::array<double, 2>> imu;  // measured body roll, pitch
  double gait_cycles = 0.0;                  // elapsed gait cycles, fractional
  bool walking = false;
  std::vector<Vec3> contact_tips;            // default body frame
};

class PoseController
{
public:
  static constexpr double kBlendTime = 0.5;      // s
  static constexpr double kPlaneTimeConstant = 1.0;  // s

  PoseController(const RobotSpec& robot, double tick_rate)
      : limits_(robot.max_manual_pose), pid_(robot.imu_pid), auto_spec_(robot.auto_pose),
        clearance_(robot.body_clearance), dt_(1.0 / tick_rate)
  {
    state_.p_default = translation(0, 0, robot.body_clearance);
  }

  void set_source(PoseSource s) { source_ = s; }
  PoseSource source() const { return source_; }
  void set_inclination(bool on) { inclination_ = on; }
  void set_walk_plane(bool on) { walk_plane_ = on; }
  bool inclination() const { return inclination_; }
  bool walk_plane() const { return walk_plane_; }

  void update(const PoseInputs& in)
  {
    state_.h_man = manual_pose_update(manual_, in.pose_velocity, dt_, limits_);

    const double step = dt_ / kBlendTime;
    imu_weight_ = std::clamp(imu_weight_ + (source_ == PoseSource::Imu ? step : -step), 0.0, 1.0);
    auto_weight_ = std::clamp(auto_weight_ + (source_ == PoseSource::Auto ? step : -step), 0.0, 1.0);

    Pose6 imu_pose{};
    if (source_ == PoseSource::Imu && in.imu) {
      imu_pose[3] = -pid_update(imu_.roll, pid_, (*in.imu)[0], dt_);
      imu_pose[4] = -pid_update(imu_.pitch, pid_, (*in.imu)[1], dt_);
      last_imu_pose_ = imu_pose;
    } else {
      imu_pose = last_imu_pose_;
      if (imu_weight_ == 0.0) {
        imu_ = {};
        last_imu_pose_ = {};
      }
    }
    const Pose6 auto_pose = auto_pose_offsets(in.gait_cycles, auto_spec_);
    Pose6 blended{};
    for (std::size_t i = 0; i < 6; ++i) blended[i] = imu_weight_ * imu_pose[i] + auto_weight_ * auto_pose[i];
    state_.h_ai = pose6_transform(blended);

    if (inclination_ && in.imu) {
      const Vec3 own = to_rpy((state_.h_ai * state_.h_man * state_.walk).linear());
      const double roll = std::clamp((*in.imu)[0] - own[0], -1.2, 1.2);
      const double pitch = std::clamp((*in.imu)[1] - own[1], -1.2, 1.2);
      incline_ = {roll, pitch};
      state_.h_inc = inclination_pose_update(roll, pitch, clearance_);
    } else {
      state_.h_inc = Transform::Identity();
    }

    if (walk_plane_) {
      const WalkPlane plane = walk_plane_estimate(in.contact_tips);
      if (plane.valid) {
        const double a = dt_ / (kPlaneTimeConstant + dt_);
        plane_normal_ = (plane_normal_ + a * (plane.normal - plane_normal_)).normalized();
      }
      state_.walk = walk_plane_pose(plane_normal_);
    } else {
      plane_normal_ = Vec3::UnitZ();
      state_.walk = Transform::Identity();
    }
  }

  const BodyPoseState& state() const { return state_; }
  Transform body_pose() const { return compose_body_pose(state_); }
  Transform relative() const { return state_.relative(); }
  const Pose6& manual_offsets() const { return manual_; }
  const Vec3& plane_normal() const { return plane_normal_; }
  std::array<double, 2> incline() const { return incline_; }
  void reset_manual() { manual_ = {}; state_.h_man = Transform::Identity(); }

private:
  PoseLimits limits_;
  PidGains pid_;
  AutoPoseSpec auto_spec_;
  double clearance_;
  double dt_;
  BodyPoseState state_;
  Pose6 manual_{};
  ImuPoseState imu_;
  Pose6 last_imu_pose_{};
  PoseSource source_ = PoseSource::None;
  double imu_weight_ = 0.0;
  double auto_weight_ = 0.0;
  bool inclination_ = false;
  bool walk_plane_ = false;
  Vec3 plane_normal_ = Vec3::UnitZ();
  std::array<double, 2> incline_{};
};

}  // namespace hexgait
