#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/LU>

#include "hexgait/model.hpp"

namespace hexgait {

// Linear-velocity Jacobian (3 x n) and the extended pose Jacobian (6 x n, angular rows last).
using Jacobian = Eigen::Matrix<double, 3, Eigen::Dynamic, 0, 3, kMaxJoints>;
using PoseJacobian = Eigen::Matrix<double, 6, Eigen::Dynamic, 0, 6, kMaxJoints>;

// Generic task-space matrices used by the damped least squares step.
using TaskMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, kMaxJoints>;
using TaskVector = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 6, 1>;

class SingularMatrixError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

// Rot_z(theta) * Trans_z(d) * Trans_x(a) * Rot_x(alpha), with theta = p.theta + q.
inline Transform dh_transform(const DHParam& p, double q)
{
  const double theta = p.theta + q;
  const double ct = std::cos(theta), st = std::sin(theta);
  const double ca = std::cos(p.alpha), sa = std::sin(p.alpha);
  Transform h = Transform::Identity();
  auto& m = h.matrix();
  m << ct, -st * ca, st * sa, p.a * ct,
       st, ct * ca, -ct * sa, p.a * st,
       0.0, sa, ca, p.d,
       0.0, 0.0, 0.0, 1.0;
  return h;
}

// Intermediate frames of a leg chain: frames[0] is the leg frame (identity),
// frames[j] the frame after joint j. frames[n] is the tip.
struct ChainFrames
{
  std::array<Transform, kMaxJoints + 1> frames;
  int count = 0;  // joints

  const Transform& tip() const { return frames[static_cast<std::size_t>(count)]; }
};

inline ChainFrames chain_frames(const LegSpec& leg, const JointVector& q)
{
  if (static_cast<std::size_t>(q.size()) != leg.joint_count())
    throw std::invalid_argument("joint vector length does not match leg joint count");
  ChainFrames c;
  c.count = static_cast<int>(leg.joint_count());
  c.frames[0] = Transform::Identity();
  for (int j = 0; j < c.count; ++j)
    c.frames[static_cast<std::size_t>(j) + 1] =
        c.frames[static_cast<std::size_t>(j)] * dh_transform(leg.joints[static_cast<std::size_t>(j)].dh, q[j]);
  return c;
}

// Tip pose in the leg frame.
inline Transform forward_kinematics(const LegSpec& leg, const JointVector& q)
{
  return chain_frames(leg, q).tip();
}

inline Vec3 tip_in_body(const LegSpec& leg, const JointVector& q)
{
  return leg.base_frame * forward_kinematics(leg, q).translation();
}

// Column j: z_{j-1} x (s - p_{j-1}), the axis and origin of joint j taken from
// the frame preceding it.
inline Jacobian jacobian(const ChainFrames& c)
{
  Jacobian jac(3, c.count);
  const Vec3 s = c.tip().translation();
  for (int j = 0; j < c.count; ++j) {
    const Transform& f = c.frames[static_cast<std::size_t>(j)];
    const Vec3 axis = f.linear().col(2);
    jac.col(j) = axis.cross(s - f.translation());
  }
  return jac;
}

inline Jacobian jacobian(const LegSpec& leg, const JointVector& q)
{
  return jacobian(chain_frames(leg, q));
}

inline PoseJacobian pose_jacobian(const ChainFrames& c)
{
  PoseJacobian jac(6, c.count);
  const Vec3 s = c.tip().translation();
  for (int j = 0; j < c.count; ++j) {
    const Transform& f = c.frames[static_cast<std::size_t>(j)];
    const Vec3 axis = f.linear().col(2);
    jac.block<3, 1>(0, j) = axis.cross(s - f.translation());
    jac.block<3, 1>(3, j) = axis;
  }
  return jac;
}

inline PoseJacobian pose_jacobian(const LegSpec& leg, const JointVector& q)
{
  return pose_jacobian(chain_frames(leg, q));
}

// Joint-limit avoidance settings for one IK step.
struct JlaConfig
{
  bool enabled = false;
  int p = 2;
  double position_weight = 0.25;
  double velocity_weight = 0.75;
  double gradient_cap = 0.01;
  // Joint positions at the start of the control tick; enables the velocity term.
  std::optional<JointVector> velocity_reference;
  double dt = 0.005;

  static JlaConfig from(const JlaParams& params)
  {
    JlaConfig c;
    c.enabled = true;
    c.p = params.p;
    c.position_weight = params.position_weight;
    c.velocity_weight = params.velocity_weight;
    c.gradient_cap = params.gradient_cap;
    return c;
  }
};

namespace detail {

// Gradient of (sum |x_i|^p)^(1/p) with respect to x, evaluated without overflow.
inline JointVector pnorm_gradient(const JointVector& x, int p)
{
  JointVector g = JointVector::Zero(x.size());
  const double m = x.cwiseAbs().maxCoeff();
  if (!(m > 0.0)) return g;
  const JointVector y = x / m;
  double sum = 0.0;
  for (Eigen::Index i = 0; i < y.size(); ++i) sum += std::pow(std::abs(y[i]), p);
  const double denom = std::pow(sum, static_cast<double>(p - 1) / p);
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    const double sign = y[i] < 0 ? -1.0 : 1.0;
    g[i] = sign * std::pow(std::abs(y[i]), p - 1) / denom;
  }
  return g;
}

}  // namespace detail

// Phi(q) = (sum |K_ii (q_i - q_c) / dq_i|^p)^(1/p)
inline double jla_position_cost(const LegSpec& leg, const JointVector& q, int p)
{
  double sum = 0.0;
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    sum += std::pow(std::abs(j.jla_weight * (q[i] - j.centre()) / j.range()), p);
  }
  return std::pow(sum, 1.0 / p);
}

inline JointVector jla_position_gradient(const LegSpec& leg, const JointVector& q, int p)
{
  JointVector x(q.size()), scale(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    scale[i] = j.jla_weight / j.range();
    x[i] = scale[i] * (q[i] - j.centre());
  }
  return detail::pnorm_gradient(x, p).cwiseProduct(scale);
}

// Same p-norm form on normalised joint speed (q - q_ref) / (dt * velocity_max).
// The returned gradient is taken with respect to the per-tick joint change, so
// it carries no 1/dt factor.
inline JointVector jla_velocity_gradient(const LegSpec& leg, const JointVector& q, const JointVector& q_ref,
                                         double dt, int p)
{
  JointVector x(q.size()), scale(q.size());
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    scale[i] = j.jla_weight / j.velocity_max;
    x[i] = scale[i] * (q[i] - q_ref[i]) / dt;
  }
  return detail::pnorm_gradient(x, p).cwiseProduct(scale);
}

// v = -(w_pos * grad Phi_pos + w_vel * grad Phi_vel), norm capped.
inline JointVector jla_direction(const LegSpec& leg, const JointVector& q, const JlaConfig& jla)
{
  JointVector v = -jla.position_weight * jla_position_gradient(leg, q, jla.p);
  if (jla.velocity_reference && jla.velocity_weight > 0.0)
    v -= jla.velocity_weight * jla_velocity_gradient(leg, q, *jla.velocity_reference, jla.dt, jla.p);
  const double n = v.norm();
  if (n > jla.gradient_cap) v *= jla.gradient_cap / n;
  return v;
}

// Damped least squares with null-space secondary motion:
//   dq = Z ds + (I - Z J) v,  Z = J^T (J J^T + lambda^2 I)^-1
// lambda == 0 is accepted only when J J^T is invertible.
inline JointVector dls_step(const TaskMatrix& jac, const TaskVector& ds, double lambda, const JointVector& v)
{
  const Eigen::Index m = jac.rows();
  const Eigen::Index n = jac.cols();
  using Gram = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, 6, 6>;
  Gram gram = jac * jac.transpose();
  gram.diagonal().array() += lambda * lambda;

  TaskMatrix z(n, m);
  if (lambda > 0.0) {
    Eigen::LLT<Gram> llt(gram);
    if (llt.info() != Eigen::Success) throw SingularMatrixError("damped Gram matrix not positive definite");
    z = llt.solve(jac).transpose();  // (G^-1 J)^T = J^T G^-1, G symmetric
  } else {
    Eigen::FullPivLU<Gram> lu(gram);
    if (!lu.isInvertible()) throw SingularMatrixError("J J^T is singular and lambda is zero");
    z = lu.solve(jac).transpose();
  }
  JointVector dq = z * ds;
  if (v.size() == n && !v.isZero(0.0)) {
    TaskMatrix projector = -z * jac;
    projector.diagonal().array() += 1.0;
    dq += projector * v;
  }
  return dq;
}

// One position-only IK increment for a tip displacement (leg frame).
inline JointVector solve_ik_step(const LegSpec& leg, const JointVector& q, const Vec3& delta_s, double lambda,
                                 const JlaConfig& jla = {})
{
  const ChainFrames c = chain_frames(leg, q);
  const TaskMatrix jac = jacobian(c);
  JointVector v = JointVector::Zero(q.size());
  if (jla.enabled) v = jla_direction(leg, q, jla);
  return dls_step(jac, delta_s, lambda, v);
}

inline JointVector clamp_to_limits(const LegSpec& leg, JointVector q)
{
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    q[i] = std::clamp(q[i], j.position_min, j.position_max);
  }
  return q;
}

inline bool within_limits(const LegSpec& leg, const JointVector& q)
{
  for (Eigen::Index i = 0; i < q.size(); ++i)
    if (!leg.joints[static_cast<std::size_t>(i)].joint.within_limits(q[i])) return false;
  return true;
}

inline bool at_any_limit(const LegSpec& leg, const JointVector& q)
{
  for (Eigen::Index i = 0; i < q.size(); ++i) {
    const auto& j = leg.joints[static_cast<std::size_t>(i)].joint;
    if (q[i] <= j.position_min || q[i] >= j.position_max) return true;
  }
  return false;
}

// Desired tip in the leg frame; `direction`, when set, constrains the tip
// frame x-axis (the last link direction) as well.
struct TipTarget
{
  Vec3 position = Vec3::Zero();
  std::optional<Vec3> direction;

  static TipTarget from_pose(const Transform& t) { return {t.translation(), Vec3(t.linear().col(0))}; }
};

struct IkOptions
{
  double lambda = 0.05;
  double tolerance = 1e-6;  // metres (and radians for the direction error)
  int max_iterations = 100;
  double max_step = 0.02;   // cap on the tip displacement requested per iteration
  JlaConfig jla;            // applied only when the leg has more joints than task rows
};

struct IkResult
{
  JointVector q;
  Vec3 tip = Vec3::Zero();
  double error = 0.0;
  int iterations = 0;
  bool converged = false;
  bool limit_hit = false;  // some joint sits on a position limit in the returned solution
};

// Iterated damped least squares; every iterate is clamped to the position limits.
// Non-convergence is reported in the result, never thrown.
inline IkResult solve_ik(const LegSpec& leg, const JointVector& q_current, const TipTarget& target,
                         const IkOptions& options = {})
{
  if (!target.position.allFinite() || (target.direction && !target.direction->allFinite()))
    throw std::invalid_argument("IK target must be finite");
  const Eigen::Index n = q_current.size();
  const bool use_direction = target.direction.has_value();
  const Vec3 dir_target = use_direction ? Vec3(target.direction->normalized()) : Vec3::UnitX();
  const Eigen::Index rows = use_direction ? 6 : 3;
  const bool jla_active = options.jla.enabled && n > rows;

  JointVector q = clamp_to_limits(leg, q_current);
  IkResult best;
  best.error = std::numeric_limits<double>::infinity();

  for (int it = 0;; ++it) {
    const ChainFrames c = chain_frames(leg, q);
    const Vec3 tip = c.tip().translation();
    TaskVector err(rows);
    err.head<3>() = target.position - tip;
    if (use_direction) {
      const Vec3 x_axis = c.tip().linear().col(0);
      err.tail<3>() = x_axis.cross(dir_target);
    }
    const double e = err.norm();
    if (e < best.error) {
      best.q = q;
      best.tip = tip;
      best.error = e;
      best.iterations = it;
    }
    if (e <= options.tolerance) {
      best.converged = true;
      break;
    }
    if (it >= options.max_iterations) break;

    TaskMatrix jac(rows, n);
    if (use_direction) {
      const PoseJacobian full = pose_jacobian(c);
      const Vec3 x_axis = c.tip().linear().col(0);
      const Mat3 projector = Mat3::Identity() - x_axis * x_axis.transpose();
      jac.topRows(3) = full.topRows<3>();
      jac.bottomRows(3) = projector * full.bottomRows<3>();
    } else {
      jac = jacobian(c);
    }
    TaskVector ds = err;
    const double step = ds.head(3).norm();
    if (step > options.max_step) ds.head(3) *= options.max_step / step;

    // The damped projector leaks the secondary term into the task space, so it
    // only drives the first iteration; the rest close the task error.
    JointVector v = JointVector::Zero(n);
    if (jla_active && it == 0) v = jla_direction(leg, q, options.jla);
    q = clamp_to_limits(leg, q + dls_step(jac, ds, options.lambda, v));
  }
  best.limit_hit = at_any_limit(leg, best.q);
  return best;
}

inline IkResult solve_ik(const LegSpec& leg, const JointVector& q_current, const Vec3& target,
                         const IkOptions& options = {})
{
  return solve_ik(leg, q_current, TipTarget{target, std::nullopt}, options);
}

// Body-frame point to leg frame.
inline Vec3 body_to_leg(const LegSpec& leg, const Vec3& p_body)
{
  return leg.base_frame.inverse() * p_body;
}

// IK target for a body-frame tip position. Legs with a configured tip
// direction also constrain the last link axis; `body_rotation` rotates the
// configured direction into the current (posed) body frame.
inline TipTarget leg_target(const LegSpec& leg, const Vec3& p_body, const Mat3& body_rotation = Mat3::Identity())
{
  TipTarget t{body_to_leg(leg, p_body), std::nullopt};
  if (leg.tip_direction && leg.joints.size() >= 5)
    t.direction = leg.base_frame.linear().transpose() * (body_rotation.transpose() * leg.tip_direction->normalized());
  return t;
}

}  // namespace hexgait
