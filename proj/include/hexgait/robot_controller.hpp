#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/QR>

#include "hexgait/kinematics.hpp"
#include "hexgait/model.hpp"
#include "hexgait/pose_controller.hpp"
#include "hexgait/walk_controller.hpp"
#include "hexgait/workspace.hpp"

namespace hexgait {

struct TipWrench
{
  Vec3 force = Vec3::Zero();   // leg frame, N
  Vec3 moment = Vec3::Zero();  // leg frame, N*m
  bool damped = false;         // singular chain, damped pseudo-inverse used
};

// Solves J_e^T [F; M] = tau. A point foot carries no moment, so when the
// force-only system is exactly solvable (rank J = n) the moment is zero;
// otherwise the minimum-norm wrench is returned.
inline TipWrench tip_force_estimate(const LegSpec& leg, const JointVector& q, const JointVector& torques,
                                    double lambda = 0.05)
{
  const ChainFrames c = chain_frames(leg, q);
  const PoseJacobian je = pose_jacobian(c);
  const Eigen::Index n = je.cols();
  TipWrench w;
  using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
  using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;
  const Vec tau = torques;

  const Mat jt_lin = je.topRows<3>().transpose();  // n x 3
  Eigen::CompleteOrthogonalDecomposition<Mat> lin(jt_lin);
  lin.setThreshold(1e-9);
  if (n <= 3 && lin.rank() == n) {
    w.force = lin.solve(tau);
    return w;
  }
  const Mat jt = je.transpose();  // n x 6
  Eigen::CompleteOrthogonalDecomposition<Mat> full(jt);
  full.setThreshold(1e-9);
  Vec x;
  if (full.rank() == n) {
    x = full.solve(tau);
  } else {
    // A^+ = A^T (A A^T + lambda^2 I)^-1 with A = J_e^T
    Mat g = jt * jt.transpose();
    g.diagonal().array() += lambda * lambda;
    x = jt.transpose() * g.ldlt().solve(tau);
    w.damped = true;
  }
  w.force = x.head<3>();
  w.moment = x.tail<3>();
  return w;
}

struct AdmittanceState
{
  double dz = 0.0;
  double dz_dot = 0.0;
  // Lateral admittance is locked.
  static constexpr double dx = 0.0;
  static constexpr double dy = 0.0;
};

// One semi-implicit Euler step of -F = m z'' + b z' + c z. The adapted tip
// height is z_d = z_r - dz.
inline double admittance_update(AdmittanceState& s, const AdmittanceParams& p, double force_z, double dt)
{
  if (!(dt > 0)) throw std::invalid_argument("dt must be > 0");
  const double acc = (-force_z - p.virtual_damping * s.dz_dot - p.virtual_stiffness * s.dz) / p.virtual_mass;
  s.dz_dot += acc * dt;
  s.dz += s.dz_dot * dt;
  return s.dz;
}

// Contact after `ticks` consecutive samples above the threshold; released after
// `ticks` consecutive samples below threshold * release_ratio.
class TouchdownDetector
{
public:
  explicit TouchdownDetector(TouchdownParams p = {}) : p_(p) {}

  bool update(double force)
  {
    const double f = std::abs(force);
    if (!contact_) {
      count_ = f > p_.force_threshold ? count_ + 1 : 0;
      if (count_ >= p_.ticks) {
        contact_ = true;
        count_ = 0;
      }
    } else {
      count_ = f < p_.force_threshold * p_.release_ratio ? count_ + 1 : 0;
      if (count_ >= p_.ticks) {
        contact_ = false;
        count_ = 0;
      }
    }
    return contact_;
  }

  bool contact() const { return contact_; }
  void reset() { contact_ = false; count_ = 0; }

private:
  TouchdownParams p_;
  bool contact_ = false;
  int count_ = 0;
};

// Moves from `from` toward `to` by at most `max_step`; the returned value
// always satisfies |result - from| <= max_step exactly.
inline double step_toward(double from, double to, double max_step)
{
  if (std::abs(to - from) <= max_step) return to;
  double out = to > from ? from + max_step : from - max_step;
  while (std::abs(out - from) > max_step) out = std::nextafter(out, from);
  return out;
}

struct LegCommand
{
  JointVector position;
  JointVector velocity;
  bool velocity_clamped = false;
  bool position_clamped = false;
  bool ik_converged = true;
  double ik_error = 0.0;
};

// IK toward the desired tip (leg frame), then per-joint position and
// per-tick velocity limiting.
inline LegCommand joint_command(const LegSpec& leg, const JointVector& q, const TipTarget& target, double dt,
                                const IkOptions& base_options)
{
  IkOptions opts = base_options;
  opts.jla.velocity_reference = q;
  opts.jla.dt = dt;
  const IkResult ik = solve_ik(leg, q, target, opts);
  LegCommand c;
  c.ik_converged = ik.converged;
  c.ik_error = ik.error;
  c.position_clamped = ik.limit_hit && !ik.converged;
  c.position = q;
  c.velocity = JointVector::Zero(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    const double goal = std::clamp(ik.q[i], j.position_min, j.position_max);
    const double max_step = j.velocity_max * dt;
    const double next = step_toward(q[i], goal, max_step);
    if (next != goal) c.velocity_clamped = true;
    c.position[i] = next;
    c.velocity[i] = (next - q[i]) / dt;
  }
  return c;
}

// Bounds check used by tests and the fuzz harness.
inline bool command_within_limits(const LegSpec& leg, const JointVector& previous, const JointVector& next, double dt)
{
  for (Eigen::Index i = 0; i < next.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    if (!(next[i] >= j.position_min && next[i] <= j.position_max)) return false;
    if (!(std::abs(next[i] - previous[i]) <= j.velocity_max * dt)) return false;
  }
  return true;
}

enum class Mode
{
  Packed,
  Starting,
  Stance,
  Walking,
  Legipulation,
  Stopping,
};

inline const char* to_string(Mode m)
{
  switch (m) {
    case Mode::Packed: return "packed";
    case Mode::Starting: return "starting";
    case Mode::Stance: return "stance";
    case Mode::Walking: return "walking";
    case Mode::Legipulation: return "legipulation";
    case Mode::Stopping: return "stopping";
  }
  return "?";
}

struct JointCommand
{
  long long tick = 0;
  std::vector<JointVector> position;
  std::vector<JointVector> velocity;
};

struct SensorInputs
{
  std::optional<std::array<double, 2>> imu;       // body roll, pitch
  std::optional<std::vector<JointVector>> torques;  // measured joint torques per leg
  std::vector<Vec3> contact_tips;                   // body frame, legs in ground contact
};

struct LegStatus
{
  int id = 1;
  Vec3 tip_target = Vec3::Zero();  // body frame, after posing and admittance
  bool velocity_clamped = false;
  bool position_clamped = false;
  bool workspace_clamped = false;
  bool ik_converged = true;
  double ik_error = 0.0;
  bool contact = false;
  double admittance_dz = 0.0;
  double force_z = 0.0;
};

struct ControllerOptions
{
  double tick_rate = 200.0;
  Mode initial_mode = Mode::Stance;
  int ik_iterations = 20;
  double ik_tolerance = 1e-8;
};

enum class RequestResult
{
  Accepted,
  Deferred,
  Rejected,
};

// Single-owner tick pipeline: velocity limiting, gait timing and trajectories,
// body posing, tip combination, admittance, joint command.
class Controller
{
public:
  Controller(RobotSpec robot, std::vector<GaitSpec> gaits, std::vector<WorkspacePolyhedron> workspaces,
             ControllerOptions options = {})
      : robot_(std::move(robot)), workspaces_(std::move(workspaces)), options_(options), dt_(1.0 / options.tick_rate),
        walk_(robot_, std::move(gaits), derive_walkspace(workspaces_), options.tick_rate),
        pose_(robot_, options.tick_rate)
  {
    ik_.lambda = robot_.ik_lambda;
    ik_.tolerance = options_.ik_tolerance;
    ik_.max_iterations = options_.ik_iterations;
    ik_.jla = JlaConfig::from(robot_.jla);
    for (const auto& leg : robot_.legs) {
      IkOptions o = ik_;
      o.max_iterations = 200;
      const IkResult r = solve_ik(leg, leg.home(), leg_target(leg, leg.default_tip), o);
      stance_q_.push_back(r.q);
      LegStatus s;
      s.id = leg.id;
      s.tip_target = leg.default_tip;
      status_.push_back(s);
      admittance_.emplace_back();
      touchdown_.emplace_back(robot_.touchdown);
    }
    mode_ = options_.initial_mode;
    q_ = mode_ == Mode::Packed ? packed_q() : stance_q_;
    if (mode_ != Mode::Packed && mode_ != Mode::Stance) mode_ = Mode::Stance;
    command_.position = q_;
    command_.velocity.assign(q_.size(), JointVector());
    for (std::size_t l = 0; l < q_.size(); ++l) command_.velocity[l] = JointVector::Zero(q_[l].size());
  }

  // --- operator inputs (persist until changed) ---
  void set_velocity(const PlanarVelocity& v) { velocity_input_ = v; }
  void set_pose_velocity(const Pose6& v) { pose_velocity_ = v; }
  void request_gait(const std::string& name) { walk_.request_gait(name); }
  void request_step_frequency(double f) { walk_.request_step_frequency(f); }
  void set_pose_source(PoseSource s) { pose_.set_source(s); }
  void set_inclination(bool on) { pose_.set_inclination(on); }
  void set_walk_plane(bool on) { pose_.set_walk_plane(on); }
  void set_admittance(bool on) { robot_.admittance.enabled = on; }

  RequestResult request_mode(Mode target)
  {
    switch (target) {
      case Mode::Starting:
      case Mode::Stance:
        if (mode_ == Mode::Packed) {
          begin_sequence("startup", stance_q_);
          mode_ = Mode::Starting;
          return RequestResult::Accepted;
        }
        if (mode_ == Mode::Legipulation) {
          end_legipulation();
          return RequestResult::Accepted;
        }
        if (mode_ == Mode::Stance || mode_ == Mode::Starting) return RequestResult::Accepted;
        return RequestResult::Rejected;
      case Mode::Stopping:
      case Mode::Packed:
        if (mode_ == Mode::Stance) {
          begin_sequence("shutdown", packed_q());
          mode_ = Mode::Stopping;
          return RequestResult::Accepted;
        }
        if (mode_ == Mode::Walking || mode_ == Mode::Legipulation) {
          if (mode_ == Mode::Legipulation) end_legipulation();
          pack_pending_ = true;
          return RequestResult::Deferred;
        }
        if (mode_ == Mode::Packed || mode_ == Mode::Stopping) return RequestResult::Accepted;
        return RequestResult::Rejected;
      case Mode::Walking:
        return mode_ == Mode::Stance || mode_ == Mode::Walking ? RequestResult::Accepted : RequestResult::Rejected;
      case Mode::Legipulation:
        return RequestResult::Rejected;  // use begin_legipulation
    }
    return RequestResult::Rejected;
  }

  RequestResult begin_legipulation(int leg_id)
  {
    const std::size_t i = leg_index(leg_id);
    if (mode_ != Mode::Stance && mode_ != Mode::Legipulation) return RequestResult::Rejected;
    walk_.set_manual(i, true);
    mode_ = Mode::Legipulation;
    return RequestResult::Accepted;
  }

  void legipulate_velocity(int leg_id, const Vec3& v)
  {
    const std::size_t i = leg_index(leg_id);
    if (mode_ == Mode::Legipulation && walk_.legs()[i].manual) walk_.set_manual_velocity(i, v);
  }

  void legipulate_tip(int leg_id, const Vec3& p)
  {
    const std::size_t i = leg_index(leg_id);
    if (mode_ == Mode::Legipulation && walk_.legs()[i].manual) walk_.set_manual_tip(i, p);
  }

  const JointCommand& tick(const SensorInputs& sensors = {})
  {
    const std::vector<JointVector> previous = q_;
    switch (mode_) {
      case Mode::Packed: break;
      case Mode::Starting:
      case Mode::Stopping: run_sequence(); break;
      case Mode::Stance:
      case Mode::Walking:
      case Mode::Legipulation: run_locomotion(sensors); break;
    }
    ++tick_;
    command_.tick = tick_;
    command_.position = q_;
    for (std::size_t l = 0; l < q_.size(); ++l) command_.velocity[l] = (q_[l] - previous[l]) / dt_;
    return command_;
  }

  // --- state ---
  Mode mode() const { return mode_; }
  long long tick_count() const { return tick_; }
  double time() const { return tick_ * dt_; }
  double dt() const { return dt_; }
  const RobotSpec& robot() const { return robot_; }
  const std::vector<JointVector>& joint_positions() const { return q_; }
  const std::vector<JointVector>& stance_positions() const { return stance_q_; }
  const JointCommand& last_command() const { return command_; }
  const WalkController& walk() const { return walk_; }
  const PoseController& pose() const { return pose_; }
  const std::vector<LegStatus>& legs() const { return status_; }
  const std::vector<WorkspacePolyhedron>& workspaces() const { return workspaces_; }
  const PlanarVelocity& velocity_input() const { return velocity_input_; }
  const Pose6& pose_velocity_input() const { return pose_velocity_; }
  bool any_velocity_clamp() const
  {
    return std::any_of(status_.begin(), status_.end(), [](const LegStatus& s) { return s.velocity_clamped; });
  }
  std::size_t leg_index(int leg_id) const
  {
    for (std::size_t i = 0; i < robot_.legs.size(); ++i)
      if (robot_.legs[i].id == leg_id) return i;
    throw std::out_of_range("unknown leg id " + std::to_string(leg_id));
  }

private:
  std::vector<JointVector> packed_q() const
  {
    std::vector<JointVector> q;
    for (const auto& leg : robot_.legs) q.push_back(leg.packed());
    return q;
  }

  void begin_sequence(const std::string& name, const std::vector<JointVector>& fallback_target)
  {
    SequenceSpec seq;
    if (auto it = robot_.sequences.find(name); it != robot_.sequences.end()) {
      seq = it->second;
    } else {
      seq.name = name;
      Keyframe kf;
      kf.duration = 2.0;
      for (const auto& q : fallback_target) kf.targets.emplace_back(q.data(), q.data() + q.size());
      seq.keyframes.push_back(kf);
    }
    // The final keyframe of a startup must land on the stance posture the walk controller expects.
    if (name == "startup") {
      Keyframe kf;
      kf.duration = 0.5;
      for (const auto& q : stance_q_) kf.targets.emplace_back(q.data(), q.data() + q.size());
      seq.keyframes.push_back(kf);
    }
    sequence_ = std::make_unique<SequencePlayer>(seq, robot_, q_, dt_);
  }

  void run_sequence()
  {
    const auto targets = sequence_->step();
    for (std::size_t l = 0; l < q_.size(); ++l) {
      const auto& leg = robot_.legs[l];
      for (Eigen::Index i = 0; i < q_[l].size(); ++i) {
        const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
        q_[l][i] = step_toward(q_[l][i], std::clamp(targets[l][i], j.position_min, j.position_max), j.velocity_max * dt_);
      }
    }
    if (sequence_->done() && reached(targets)) {
      sequence_.reset();
      mode_ = mode_ == Mode::Starting ? Mode::Stance : Mode::Packed;
    }
  }

  bool reached(const std::vector<JointVector>& targets) const
  {
    for (std::size_t l = 0; l < q_.size(); ++l)
      if ((q_[l] - targets[l]).cwiseAbs().maxCoeff() > 0.0) return false;
    return true;
  }

  void end_legipulation()
  {
    for (std::size_t i = 0; i < walk_.legs().size(); ++i)
      if (walk_.legs()[i].manual) {
        walk_.set_manual_tip(i, walk_.legs()[i].default_tip);
        walk_.set_manual(i, false);
      }
    if (mode_ == Mode::Legipulation) mode_ = Mode::Stance;
  }

  void run_locomotion(const SensorInputs& sensors)
  {
    const bool can_walk = (mode_ == Mode::Stance || mode_ == Mode::Walking) && !pack_pending_;
    // Walking uses planar linear velocity and yaw rate only.
    walk_.set_desired_velocity(can_walk ? velocity_input_ : PlanarVelocity{});
    walk_.update();
    if (mode_ == Mode::Stance && walk_.state() != WalkState::Stopped) mode_ = Mode::Walking;
    if (mode_ == Mode::Walking && walk_.state() == WalkState::Stopped) mode_ = Mode::Stance;

    PoseInputs pin;
    pin.pose_velocity = pose_velocity_;
    pin.imu = sensors.imu;
    pin.walking = mode_ == Mode::Walking;
    cycles_ += walk_.state() == WalkState::Stopped ? 0.0 : 1.0 / walk_.period_ticks();
    pin.gait_cycles = cycles_;
    const Transform rel_prev = pose_.relative();
    for (const auto& p : sensors.contact_tips) pin.contact_tips.push_back(rel_prev * p);
    pose_.update(pin);
    const Transform rel = pose_.relative();

    for (std::size_t l = 0; l < robot_.legs.size(); ++l) {
      const auto& leg = robot_.legs[l];
      const auto& w = walk_.legs()[l];
      auto& st = status_[l];
      bool ws_clamped = false;
      Vec3 tip = combine_tip_pose(rel, w.tip, w.manual ? nullptr : &workspaces_[l], &ws_clamped);
      st.workspace_clamped = ws_clamped;

      if (sensors.torques) {
        const TipWrench wrench = tip_force_estimate(leg, q_[l], (*sensors.torques)[l], robot_.ik_lambda);
        st.force_z = (leg.base_frame.linear() * wrench.force).z();
      } else {
        st.force_z = 0.0;
      }
      st.contact = touchdown_[l].update(st.force_z);
      if (robot_.admittance.enabled) {
        const bool loaded = !w.manual && w.phase.state == StepState::Stance;
        admittance_update(admittance_[l], robot_.admittance, loaded ? st.force_z : 0.0, dt_);
        tip.z() -= admittance_[l].dz;
      } else {
        admittance_[l] = {};
      }
      st.admittance_dz = admittance_[l].dz;
      st.tip_target = tip;

      const LegCommand cmd = joint_command(leg, q_[l], leg_target(leg, tip, rel.linear()), dt_, ik_);
      q_[l] = cmd.position;
      st.velocity_clamped = cmd.velocity_clamped;
      st.position_clamped = cmd.position_clamped;
      st.ik_converged = cmd.ik_converged;
      st.ik_error = cmd.ik_error;
    }

    if (pack_pending_ && mode_ != Mode::Walking && walk_.state() == WalkState::Stopped) {
      pack_pending_ = false;
      if (settled()) {
        begin_sequence("shutdown", packed_q());
        mode_ = Mode::Stopping;
      } else {
        pack_pending_ = true;
      }
    }
  }

  bool settled() const
  {
    for (std::size_t l = 0; l < q_.size(); ++l)
      if (status_[l].velocity_clamped) return false;
    return true;
  }

  RobotSpec robot_;
  std::vector<WorkspacePolyhedron> workspaces_;
  ControllerOptions options_;
  double dt_;
  WalkController walk_;
  PoseController pose_;
  IkOptions ik_;
  std::vector<JointVector> stance_q_;
  std::vector<JointVector> q_;
  std::vector<LegStatus> status_;
  std::vector<AdmittanceState> admittance_;
  std::vector<TouchdownDetector> touchdown_;
  std::unique_ptr<SequencePlayer> sequence_;
  Mode mode_ = Mode::Stance;
  bool pack_pending_ = false;
  long long tick_ = 0;
  double cycles_ = 0.0;
  PlanarVelocity velocity_input_;
  Pose6 pose_velocity_{};
  JointCommand command_;
};

}  // namespace hexgait
