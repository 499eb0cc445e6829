#pragma once

#include <array>
#include <optional>
#include <stdexcept>

#include "hexgait/transform.hpp"

namespace hexgait {

using ControlPoints = std::array<Vec3, 5>;

namespace detail {

inline void check_unit(double t)
{
  if (!(t >= 0.0 && t <= 1.0)) throw std::out_of_range("bezier parameter outside [0,1]");
}

}  // namespace detail

// Quartic Bezier: s^4 P0 + 4 t s^3 P1 + 6 s^2 t^2 P2 + 4 s t^3 P3 + t^4 P4, s = 1 - t.
inline Vec3 bezier(const ControlPoints& p, double t)
{
  detail::check_unit(t);
  const double s = 1.0 - t;
  return s * s * s * s * p[0] + 4.0 * t * s * s * s * p[1] + 6.0 * s * s * t * t * p[2] + 4.0 * s * t * t * t * p[3] +
         t * t * t * t * p[4];
}

inline Vec3 bezier_derivative(const ControlPoints& p, double t)
{
  detail::check_unit(t);
  const double s = 1.0 - t;
  return 4.0 * s * s * s * (p[1] - p[0]) + 12.0 * s * s * t * (p[2] - p[1]) + 12.0 * t * t * s * (p[3] - p[2]) +
         4.0 * t * t * t * (p[4] - p[3]);
}

// Integral of the curve from 0 to t: a quintic with control points
// Q0 = 0, Q(k+1) = Q(k) + P(k)/5.
inline Vec3 bezier_integral(const ControlPoints& p, double t)
{
  detail::check_unit(t);
  std::array<Vec3, 6> q;
  q[0] = Vec3::Zero();
  for (int k = 0; k < 5; ++k) q[static_cast<std::size_t>(k) + 1] = q[static_cast<std::size_t>(k)] + p[static_cast<std::size_t>(k)] / 5.0;
  const double s = 1.0 - t;
  const double b[6] = {s * s * s * s * s, 5 * t * s * s * s * s, 10 * t * t * s * s * s,
                       10 * t * t * t * s * s, 5 * t * t * t * t * s, t * t * t * t * t};
  Vec3 out = Vec3::Zero();
  for (int k = 0; k < 6; ++k) out += b[k] * q[static_cast<std::size_t>(k)];
  return out;
}

// One leg's step: two swing curves sharing the apex, and the stance curve
// expressed as tip velocities (m/s).
struct StepCycle
{
  ControlPoints primary{};
  ControlPoints secondary{};
  ControlPoints stance{};
  double swing_duration = 0.0;   // s
  double stance_duration = 0.0;  // s

  Vec3 apex() const { return primary[4]; }
  Vec3 touchdown() const { return secondary[4]; }
  Vec3 liftoff() const { return primary[0]; }
};

struct StepCycleInput
{
  Vec3 default_tip = Vec3::Zero();
  Vec3 stride = Vec3::Zero();      // planar, body frame
  double step_clearance = 0.0;
  double swing_duration = 1.0;
  double stance_duration = 1.0;
  // Actual tip position and velocity when the swing began; default to the
  // nominal liftoff point and the stance velocity of this stride.
  std::optional<Vec3> liftoff;
  std::optional<Vec3> liftoff_velocity;
  double swing_width = 0.0;        // lateral apex offset along `width_direction`
  double swing_depth = 0.0;        // lowering of the touchdown approach
  Vec3 width_direction = Vec3::Zero();
};

inline StepCycle build_step_cycle(const StepCycleInput& in)
{
  if (!(in.swing_duration > 0.0 && in.stance_duration > 0.0)) throw std::invalid_argument("durations must be > 0");
  StepCycle c;
  c.swing_duration = in.swing_duration;
  c.stance_duration = in.stance_duration;

  const Vec3 v_stance = -in.stride / in.stance_duration;
  for (auto& p : c.stance) p = v_stance;

  const double half = 0.5 * in.swing_duration;
  const Vec3 apex = in.default_tip + Vec3(0, 0, in.step_clearance) + in.swing_width * in.width_direction;
  const Vec3 liftoff = in.liftoff.value_or(in.default_tip - 0.5 * in.stride);
  const Vec3 v_liftoff = in.liftoff_velocity.value_or(v_stance);
  const Vec3 touchdown = in.default_tip + 0.5 * in.stride;

  const Vec3 lo_sep = v_liftoff * half / 4.0;
  c.primary[0] = liftoff;
  c.primary[1] = liftoff + lo_sep;
  c.primary[2] = liftoff + 2.0 * lo_sep;
  c.primary[3] = 0.5 * (apex + c.primary[2]);
  c.primary[3].z() = apex.z();
  c.primary[4] = apex;

  const Vec3 td_sep = v_stance * half / 4.0;
  c.secondary[0] = apex;
  c.secondary[1] = 2.0 * apex - c.primary[3];
  c.secondary[2] = touchdown - 2.0 * td_sep - Vec3(0, 0, in.swing_depth);
  c.secondary[3] = touchdown - td_sep;
  c.secondary[4] = touchdown;
  return c;
}

// Swing position at swing progress t (primary for t < 0.5).
inline Vec3 swing_position(const StepCycle& c, double t)
{
  detail::check_unit(t);
  return t < 0.5 ? bezier(c.primary, 2.0 * t) : bezier(c.secondary, 2.0 * t - 1.0);
}

inline Vec3 swing_velocity(const StepCycle& c, double t)
{
  detail::check_unit(t);
  const double half = 0.5 * c.swing_duration;
  return t < 0.5 ? Vec3(bezier_derivative(c.primary, 2.0 * t) / half)
                 : Vec3(bezier_derivative(c.secondary, 2.0 * t - 1.0) / half);
}

inline Vec3 stance_velocity(const StepCycle& c, double t)
{
  return bezier(c.stance, t);
}

// Exact tip displacement from stance progress t0 to t1.
inline Vec3 stance_displacement(const StepCycle& c, double t0, double t1)
{
  return c.stance_duration * (bezier_integral(c.stance, t1) - bezier_integral(c.stance, t0));
}

enum class StepState
{
  Stance,
  Swing,
};

struct TipTargetValue
{
  bool is_velocity = false;
  Vec3 value = Vec3::Zero();
};

// Swing yields a position, stance a velocity for the caller to integrate.
inline TipTargetValue tip_target(const StepCycle& c, StepState state, double t)
{
  if (state == StepState::Swing) return {false, swing_position(c, t)};
  return {true, stance_velocity(c, t)};
}

}  // namespace hexgait
