#pragma once

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "hexgait/gait.hpp"
#include "hexgait/model.hpp"
#include "hexgait/trajectory.hpp"
#include "hexgait/workspace.hpp"

namespace hexgait {

enum class WalkState
{
  Stopped,
  Starting,  // gait cycling, body velocity held at zero until every leg has stepped once
  Moving,
  Stopping,  // velocity ramped to zero, legs stepping back onto their default tips
};

inline const char* to_string(WalkState s)
{
  switch (s) {
    case WalkState::Stopped: return "stopped";
    case WalkState::Starting: return "starting";
    case WalkState::Moving: return "moving";
    case WalkState::Stopping: return "stopping";
  }
  return "?";
}

struct LegWalk
{
  int id = 1;
  Vec3 default_tip = Vec3::Zero();
  Vec3 tip = Vec3::Zero();           // target in the default body frame
  Vec3 tip_velocity = Vec3::Zero();
  Vec3 stride = Vec3::Zero();
  LegPhase phase;
  StepCycle cycle;
  Vec3 stance_velocity = Vec3::Zero();  // velocity of the most recent stance tick
  int swings = 0;                        // completed since the current walk began
  bool manual = false;
  Vec3 manual_velocity = Vec3::Zero();
};

// Gait timing, stride generation and tip trajectories for all legs, one tick
// per update(). Tip targets are in the body frame of the default body pose.
class WalkController
{
public:
  WalkController(const RobotSpec& robot, std::vector<GaitSpec> gaits, Walkspace walkspace, double tick_rate)
      : robot_(robot), gaits_(std::move(gaits)), walkspace_(std::move(walkspace)), tick_rate_(tick_rate),
        dt_(1.0 / tick_rate)
  {
    gait_ = find_gait(gaits_, robot.default_gait);
    validate_gait_for_robot(gait_, robot_);
    requested_frequency_ = robot.step_frequency;
    apply_timing();
    double rmax = 0.0;
    for (const auto& l : robot_.legs) {
      LegWalk w;
      w.id = l.id;
      w.default_tip = l.default_tip;
      w.tip = l.default_tip;
      legs_.push_back(w);
      rmax = std::max(rmax, std::hypot(l.default_tip.x(), l.default_tip.y()));
    }
    max_yaw_acceleration_ = rmax > 0 ? robot.max_acceleration / rmax : robot.max_acceleration;
  }

  // Gait and frequency changes take effect at the next cycle boundary (immediately when stopped).
  void request_gait(const std::string& name)
  {
    const GaitSpec& g = find_gait(gaits_, name);
    validate_gait_for_robot(g, robot_);
    pending_gait_ = g;
    if (state_ == WalkState::Stopped) apply_pending();
  }

  void request_step_frequency(double f)
  {
    if (!(std::isfinite(f) && f > 0)) throw std::invalid_argument("step frequency must be > 0");
    pending_frequency_ = f;
    if (state_ == WalkState::Stopped) apply_pending();
  }

  void set_desired_velocity(const PlanarVelocity& v) { desired_ = v; }

  void set_manual(std::size_t index, bool manual)
  {
    auto& l = legs_.at(index);
    l.manual = manual;
    l.manual_velocity = Vec3::Zero();
    l.tip_velocity = Vec3::Zero();
  }
  void set_manual_velocity(std::size_t index, const Vec3& v) { legs_.at(index).manual_velocity = v; }
  void set_manual_tip(std::size_t index, const Vec3& p)
  {
    auto& l = legs_.at(index);
    l.manual_velocity = Vec3::Zero();
    l.tip = clamp_manual(l, p);
  }
  bool any_manual() const
  {
    return std::any_of(legs_.begin(), legs_.end(), [](const LegWalk& l) { return l.manual; });
  }

  void update()
  {
    for (auto& l : legs_)
      if (l.manual) {
        const Vec3 before = l.tip;
        l.tip = clamp_manual(l, l.tip + l.manual_velocity * dt_);
        l.tip_velocity = (l.tip - before) / dt_;
      }

    const bool want_motion = !desired_.is_zero();
    if (state_ == WalkState::Stopped) {
      if (!want_motion || any_manual()) return;
      apply_pending();
      state_ = WalkState::Starting;
      clock_ = 0;
      for (auto& l : legs_) l.swings = 0;
    }

    if (want_motion && state_ == WalkState::Stopping) state_ = velocity_enabled_ ? WalkState::Moving : WalkState::Starting;
    if (!want_motion && (state_ == WalkState::Starting || state_ == WalkState::Moving)) state_ = WalkState::Stopping;
    if (state_ == WalkState::Starting && all_swung()) {
      state_ = WalkState::Moving;
      velocity_enabled_ = true;
    }

    if (clock_ == 0) apply_pending();
    target_ = limit_velocity(desired_, walkspace_, frequency_, gait_.duty_factor(), robot_);
    ramp(state_ == WalkState::Moving ? target_ : PlanarVelocity{});

    if (state_ == WalkState::Stopping) {
      if (velocity_.is_zero()) {
        if (!settling_) {
          settling_ = true;
          for (auto& l : legs_) l.swings = 0;
        }
      } else {
        settling_ = false;
      }
    }

    const double beta = gait_.duty_factor();
    for (std::size_t i = 0; i < legs_.size(); ++i) {
      auto& l = legs_[i];
      if (l.manual) continue;
      l.phase = gait_timing(gait_, clock_, i, unit_ticks_);
      l.stride = stride_for(velocity_, l.default_tip, frequency_, beta);
      const double n = l.phase.length;
      StepCycleInput in;
      in.default_tip = l.default_tip;
      in.stride = l.stride;
      in.step_clearance = robot_.step_clearance;
      in.swing_duration = swing_ticks() * dt_;
      in.stance_duration = stance_ticks() * dt_;
      in.swing_width = robot_.swing_width;
      in.swing_depth = robot_.swing_depth;
      const Vec3 outward(l.default_tip.x(), l.default_tip.y(), 0.0);
      in.width_direction = outward.norm() > 0 ? Vec3(outward.normalized()) : Vec3::Zero();
      if (l.phase.state == StepState::Stance) {
        l.cycle = build_step_cycle(in);
        const Vec3 d = stance_displacement(l.cycle, l.phase.tick / n, (l.phase.tick + 1) / n);
        const Vec3 before = l.tip;
        l.tip = clamp_to_walkspace(l, l.tip + d);
        l.tip_velocity = (l.tip - before) / dt_;
        l.stance_velocity = l.cycle.stance[4];
      } else {
        if (l.phase.tick == 0) {
          liftoff_[i] = l.tip;
          liftoff_velocity_[i] = l.stance_velocity;
        }
        in.liftoff = liftoff_[i];
        in.liftoff_velocity = liftoff_velocity_[i];
        l.cycle = build_step_cycle(in);
        const Vec3 next = swing_position(l.cycle, (l.phase.tick + 1) / n);
        l.tip_velocity = (next - l.tip) / dt_;
        l.tip = next;
        if (l.phase.tick + 1 == l.phase.length) ++l.swings;
      }
    }

    clock_ = (clock_ + 1) % period_ticks();
    ++ticks_walking_;

    if (state_ == WalkState::Stopping && settling_ && all_swung() && all_home()) {
      state_ = WalkState::Stopped;
      velocity_enabled_ = false;
      settling_ = false;
      clock_ = 0;
      for (auto& l : legs_) {
        l.tip_velocity = Vec3::Zero();
        l.stance_velocity = Vec3::Zero();
        l.phase = LegPhase{};
      }
      apply_pending();
    }
  }

  WalkState state() const { return state_; }
  const GaitSpec& gait() const { return gait_; }
  int unit_ticks() const { return unit_ticks_; }
  int period_ticks() const { return unit_ticks_ * gait_.period(); }
  int stance_ticks() const { return unit_ticks_ * gait_.stance_phase; }
  int swing_ticks() const { return unit_ticks_ * gait_.swing_phase; }
  double step_frequency() const { return frequency_; }
  double duty_factor() const { return gait_.duty_factor(); }
  double dt() const { return dt_; }
  double tick_rate() const { return tick_rate_; }
  long long clock() const { return clock_; }
  double cycle_fraction() const { return static_cast<double>(clock_) / period_ticks(); }
  const PlanarVelocity& velocity() const { return velocity_; }
  const PlanarVelocity& desired_velocity() const { return desired_; }
  const PlanarVelocity& limited_target() const { return target_; }
  const std::vector<LegWalk>& legs() const { return legs_; }
  const Walkspace& walkspace() const { return walkspace_; }
  const std::vector<GaitSpec>& gaits() const { return gaits_; }
  bool gait_change_pending() const { return pending_gait_.has_value() || pending_frequency_.has_value(); }

private:
  void apply_timing()
  {
    unit_ticks_ = unit_ticks_for(gait_, tick_rate_, requested_frequency_);
    frequency_ = effective_frequency(gait_, tick_rate_, unit_ticks_);
  }

  void apply_pending()
  {
    if (pending_gait_) gait_ = *pending_gait_;
    if (pending_frequency_) requested_frequency_ = *pending_frequency_;
    if (pending_gait_ || pending_frequency_) apply_timing();
    pending_gait_.reset();
    pending_frequency_.reset();
  }

  void ramp(const PlanarVelocity& target)
  {
    const double dv = robot_.max_acceleration * dt_;
    const double ex = target.vx - velocity_.vx, ey = target.vy - velocity_.vy;
    const double e = std::hypot(ex, ey);
    if (e <= dv) {
      velocity_.vx = target.vx;
      velocity_.vy = target.vy;
    } else {
      velocity_.vx += ex * dv / e;
      velocity_.vy += ey * dv / e;
    }
    const double dw = max_yaw_acceleration_ * dt_;
    velocity_.wz += std::clamp(target.wz - velocity_.wz, -dw, dw);
  }

  bool all_swung() const
  {
    return std::all_of(legs_.begin(), legs_.end(), [](const LegWalk& l) { return l.manual || l.swings >= 1; });
  }

  bool all_home() const
  {
    return std::all_of(legs_.begin(), legs_.end(),
                       [](const LegWalk& l) { return l.manual || (l.tip - l.default_tip).norm() < 1e-9; });
  }

  // A stance tip that would leave the walkspace stalls on its boundary.
  Vec3 clamp_to_walkspace(const LegWalk& l, const Vec3& p) const
  {
    const Vec3 d = p - l.default_tip;
    const double r = std::hypot(d.x(), d.y());
    if (r == 0.0) return p;
    const double limit = walkspace_.radius(std::atan2(d.y(), d.x()));
    if (r <= limit * (1.0 + 1e-9)) return p;
    Vec3 out = p;
    out.x() = l.default_tip.x() + d.x() * limit / r;
    out.y() = l.default_tip.y() + d.y() * limit / r;
    return out;
  }

  Vec3 clamp_manual(const LegWalk& l, const Vec3& p) const
  {
    const Vec3 d = p - l.default_tip;
    const double n = d.norm();
    const double r = robot_.workspace.max_radius;
    return n > r ? Vec3(l.default_tip + d * (r / n)) : p;
  }

  RobotSpec robot_;
  std::vector<GaitSpec> gaits_;
  Walkspace walkspace_;
  double tick_rate_;
  double dt_;
  GaitSpec gait_;
  std::optional<GaitSpec> pending_gait_;
  std::optional<double> pending_frequency_;
  double requested_frequency_ = 1.0;
  double frequency_ = 1.0;
  int unit_ticks_ = 1;
  long long clock_ = 0;
  long long ticks_walking_ = 0;
  WalkState state_ = WalkState::Stopped;
  bool velocity_enabled_ = false;
  bool settling_ = false;
  PlanarVelocity desired_;
  PlanarVelocity target_;
  PlanarVelocity velocity_;
  double max_yaw_acceleration_ = 1.0;
  std::vector<LegWalk> legs_;
  std::array<Vec3, kMaxLegs> liftoff_{};
  std::array<Vec3, kMaxLegs> liftoff_velocity_{};
};

}  // namespace hexgait
