#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Cholesky>

#include "hexgait/kinematics.hpp"
#include "hexgait/model.hpp"

namespace hexgait {

constexpr double kGravity = 9.81;

struct GroundPlane
{
  Vec3 normal = Vec3::UnitZ();
  double offset = 0.0;  // normal . x = offset on the surface

  // Plane through the origin tilted by roll then pitch.
  static GroundPlane inclined(double roll, double pitch)
  {
    return {rotation_rpy(roll, pitch, 0.0) * Vec3::UnitZ(), 0.0};
  }

  double height(const Vec3& x) const { return normal.dot(x) - offset; }
  Vec3 project(const Vec3& x) const { return x - height(x) * normal; }
  Mat3 frame() const { return rotation_between(Vec3::UnitZ(), normal); }
};

struct SimOptions
{
  bool grounded = true;  // false: robot held in the air, feet never touch
  GroundPlane ground;
  double imu_noise = 0.0;  // rad, standard deviation
  unsigned long long seed = 0;
  double supply_voltage = 12.0;
  double gravity = kGravity;
};

// Equal vertical load share per stance leg mapped to joint torques through
// the linear tip Jacobian: tau = J^T F, F in the leg frame.
inline std::vector<JointVector> static_torques(const RobotSpec& robot, const std::vector<JointVector>& q,
                                               const std::vector<bool>& stance, const Mat3& body_rotation,
                                               double gravity = kGravity)
{
  std::size_t n = 0;
  for (bool s : stance) n += s ? 1 : 0;
  std::vector<JointVector> tau;
  for (std::size_t l = 0; l < robot.legs.size(); ++l) {
    const auto& leg = robot.legs[l];
    JointVector t = JointVector::Zero(q[l].size());
    if (stance[l] && n > 0) {
      const Vec3 f_world(0, 0, robot.mass * gravity / static_cast<double>(n));
      const Vec3 f_leg = leg.base_frame.linear().transpose() * (body_rotation.transpose() * f_world);
      t = jacobian(leg, q[l]).transpose() * f_leg;
    }
    tau.push_back(t);
  }
  return tau;
}

// P = P_idle + sum(k_h |tau| + k_m |tau * omega|)
inline double power_model(const std::vector<JointVector>& torques, const std::vector<JointVector>& velocities,
                          const PowerParams& p)
{
  double w = p.idle;
  for (std::size_t l = 0; l < torques.size(); ++l)
    for (Eigen::Index i = 0; i < torques[l].size(); ++i) {
      const double tau = torques[l][i];
      const double omega = velocities.empty() ? 0.0 : velocities[l][i];
      w += p.holding * std::abs(tau) + p.mechanical * std::abs(tau * omega);
    }
  return w;
}

struct EnergyRecord
{
  double time = 0.0;      // s
  double voltage = 0.0;   // V
  double current = 0.0;   // A
  double power = 0.0;     // W
  double velocity = 0.0;  // m/s, planar body speed
  double distance = 0.0;  // m, accumulated planar path length
};

// mean(U I) / (m g dx/dt)
inline double cost_of_transport(double mean_power, double mass, double velocity, double gravity = kGravity)
{
  if (!(velocity > 0)) throw std::invalid_argument("cost of transport needs a positive distance");
  return mean_power / (mass * gravity * velocity);
}

inline double cost_of_transport(const std::vector<EnergyRecord>& records, double mass, double gravity = kGravity)
{
  if (records.size() < 2) throw std::invalid_argument("cost of transport needs at least two records");
  double sum = 0.0;
  for (const auto& r : records) sum += r.voltage * r.current;
  const double mean = sum / static_cast<double>(records.size());
  const double dx = records.back().distance - records.front().distance;
  const double dt = records.back().time - records.front().time;
  if (!(dx > 0) || !(dt > 0)) throw std::invalid_argument("cost of transport needs a positive distance");
  return cost_of_transport(mean, mass, dx / dt, gravity);
}

// Rigid transform T minimising sum |T p_i - w_i|^2 plus a small penalty on the
// change from `guess`; well-defined for one or two points as well.
inline Transform fit_rigid(const std::vector<Vec3>& body_points, const std::vector<Vec3>& world_points,
                           const Transform& guess, int iterations = 12)
{
  Transform t = guess;
  if (body_points.empty()) return t;
  using Mat6 = Eigen::Matrix<double, 6, 6>;
  using Vec6 = Eigen::Matrix<double, 6, 1>;
  for (int it = 0; it < iterations; ++it) {
    Vec3 c = Vec3::Zero();
    for (const auto& w : world_points) c += w;
    c /= static_cast<double>(world_points.size());
    Mat6 a = Mat6::Identity() * 1e-12;
    Vec6 b = Vec6::Zero();
    double err = 0.0;
    for (std::size_t i = 0; i < body_points.size(); ++i) {
      const Vec3 x = t * body_points[i];
      const Vec3 r = x - world_points[i];
      err = std::max(err, r.norm());
      Eigen::Matrix<double, 3, 6> j;
      const Vec3 u = x - c;
      j.leftCols<3>() = Mat3::Identity();
      j.rightCols<3>() << 0, u.z(), -u.y(), -u.z(), 0, u.x(), u.y(), -u.x(), 0;  // -[u]x
      a += j.transpose() * j;
      b += j.transpose() * r;
    }
    if (err < 1e-14) break;
    const Vec6 d = -a.ldlt().solve(b);
    const Vec3 v = d.head<3>(), w = d.tail<3>();
    const double angle = w.norm();
    const Mat3 r = angle > 0 ? Mat3(Eigen::AngleAxisd(angle, w / angle)) : Mat3::Identity();
    Transform next = Transform::Identity();
    next.linear() = r * t.linear();
    next.translation() = r * (t.translation() - c) + c + v;
    // Re-orthonormalise to keep the rotation block exact over long runs.
    Eigen::Quaterniond qn(next.linear());
    qn.normalize();
    next.linear() = qn.toRotationMatrix();
    t = next;
    if (d.norm() < 1e-15) break;
  }
  return t;
}

// Quasi-static kinematic world: joints follow commands exactly, stance feet are
// pinned, and the body pose is the rigid fit that keeps them in place.
class Sim
{
public:
  static constexpr double kTouchdownEpsilon = 5e-7;  // m; free feet this close to the ground touch down
  static constexpr double kLiftoffEpsilon = 1e-6;    // m a pinned foot must be held above its pin to lift

  Sim(const RobotSpec& robot, SimOptions options, const std::vector<JointVector>& q0)
      : robot_(robot), options_(options), rng_(options.seed), q_(q0)
  {
    const auto tips = body_tips();
    double lowest = 0.0;
    for (const auto& p : tips) lowest = std::min(lowest, p.z());
    const Mat3 frame = options_.ground.frame();
    body_ = make_transform(frame * Vec3(0, 0, -lowest) + options_.ground.offset * options_.ground.normal, frame);
    contact_.assign(tips.size(), false);
    pins_.assign(tips.size(), Vec3::Zero());
    if (options_.grounded) {
      for (std::size_t i = 0; i < tips.size(); ++i)
        if (tips[i].z() - lowest < 1e-6) {
          contact_[i] = true;
          pins_[i] = options_.ground.project(body_ * tips[i]);
        }
      body_ = fit(tips, body_);
    }
    velocity_.assign(q_.size(), JointVector());
    for (std::size_t l = 0; l < q_.size(); ++l) velocity_[l] = JointVector::Zero(q_[l].size());
    update_torques();
    start_ = body_;
  }

  void step(const std::vector<JointVector>& q, double dt)
  {
    for (std::size_t l = 0; l < q_.size(); ++l) velocity_[l] = (q[l] - q_[l]) / dt;
    q_ = q;
    time_ += dt;
    const Vec3 before = body_.translation();
    const auto tips = body_tips();
    airborne_ = false;
    if (options_.grounded) settle(tips);
    if (!options_.grounded || std::none_of(contact_.begin(), contact_.end(), [](bool c) { return c; }))
      airborne_ = true;
    const Vec3 moved = body_.translation() - before;
    const double planar = std::hypot(moved.x(), moved.y());
    distance_ += planar;
    speed_ = planar / dt;
    residual_ = 0.0;
    for (std::size_t i = 0; i < tips.size(); ++i)
      if (contact_[i]) residual_ = std::max(residual_, (body_ * tips[i] - pins_[i]).norm());
    update_torques();
  }

  std::array<double, 2> imu()
  {
    const Vec3 rpy = to_rpy(body_.linear());
    std::array<double, 2> out{rpy[0], rpy[1]};
    if (options_.imu_noise > 0) {
      std::normal_distribution<double> n(0.0, options_.imu_noise);
      out[0] += n(rng_);
      out[1] += n(rng_);
    }
    return out;
  }

  double power() const
  {
    std::vector<JointVector> total = torques_;
    for (std::size_t l = 0; l < total.size(); ++l) total[l] += robot_.power.joint_viscous * velocity_[l];
    return power_model(total, velocity_, robot_.power);
  }

  EnergyRecord record() const
  {
    EnergyRecord r;
    r.time = time_;
    r.voltage = options_.supply_voltage;
    r.power = power();
    r.current = r.power / r.voltage;
    r.velocity = speed_;
    r.distance = distance_;
    return r;
  }

  std::vector<Vec3> body_tips() const
  {
    std::vector<Vec3> out;
    for (std::size_t l = 0; l < robot_.legs.size(); ++l) out.push_back(tip_in_body(robot_.legs[l], q_[l]));
    return out;
  }

  std::vector<Vec3> world_tips() const
  {
    auto t = body_tips();
    for (auto& p : t) p = body_ * p;
    return t;
  }

  // Contact tips expressed in the body frame.
  std::vector<Vec3> contact_tips_body() const
  {
    std::vector<Vec3> out;
    const auto tips = body_tips();
    for (std::size_t i = 0; i < tips.size(); ++i)
      if (contact_[i]) out.push_back(tips[i]);
    return out;
  }

  const Transform& body() const { return body_; }
  const Transform& start_pose() const { return start_; }
  const std::vector<bool>& contacts() const { return contact_; }
  const std::vector<Vec3>& pins() const { return pins_; }
  const std::vector<JointVector>& torques() const { return torques_; }
  const std::vector<JointVector>& joint_velocities() const { return velocity_; }
  const std::vector<JointVector>& joint_positions() const { return q_; }
  bool airborne() const { return airborne_; }
  double residual() const { return residual_; }
  double distance() const { return distance_; }
  double time() const { return time_; }
  const SimOptions& options() const { return options_; }

private:
  Transform fit(const std::vector<Vec3>& tips, const Transform& guess, std::size_t skip = SIZE_MAX) const
  {
    std::vector<Vec3> b, w;
    for (std::size_t i = 0; i < tips.size(); ++i)
      if (contact_[i] && i != skip) {
        b.push_back(tips[i]);
        w.push_back(pins_[i]);
      }
    return fit_rigid(b, w, guess);
  }

  void settle(const std::vector<Vec3>& tips)
  {
    const GroundPlane& g = options_.ground;
    body_ = fit(tips, body_);
    // Touchdown: free feet at or below the ground become pinned where they meet it.
    bool added = false;
    for (std::size_t i = 0; i < tips.size(); ++i)
      if (!contact_[i] && g.height(body_ * tips[i]) <= kTouchdownEpsilon) {
        contact_[i] = true;
        pins_[i] = g.project(body_ * tips[i]);
        added = true;
      }
    if (added) body_ = fit(tips, body_);
    // Liftoff: the ground only pushes, so a pinned foot the fitted body holds
    // above its pin is pulling on the ground and is released, highest first.
    for (;;) {
      std::size_t count = 0, best = SIZE_MAX;
      double best_height = kLiftoffEpsilon;
      for (std::size_t i = 0; i < tips.size(); ++i) {
        if (!contact_[i]) continue;
        ++count;
        const double h = g.normal.dot(body_ * tips[i] - pins_[i]);
        if (h > best_height) {
          best_height = h;
          best = i;
        }
      }
      if (best == SIZE_MAX || count < 2) break;
      contact_[best] = false;
      body_ = fit(tips, body_);
    }
    // Any free foot pushed through the ground by the final pose touches down.
    added = false;
    for (std::size_t i = 0; i < tips.size(); ++i)
      if (!contact_[i] && g.height(body_ * tips[i]) <= kTouchdownEpsilon) {
        contact_[i] = true;
        pins_[i] = g.project(body_ * tips[i]);
        added = true;
      }
    if (added) body_ = fit(tips, body_);
  }

  void update_torques()
  {
    std::vector<bool> stance = contact_;
    if (!options_.grounded) stance.assign(stance.size(), false);
    torques_ = static_torques(robot_, q_, stance, body_.linear(), options_.gravity);
  }

  RobotSpec robot_;
  SimOptions options_;
  std::mt19937_64 rng_;
  std::vector<JointVector> q_;
  std::vector<JointVector> velocity_;
  std::vector<JointVector> torques_;
  Transform body_ = Transform::Identity();
  Transform start_ = Transform::Identity();
  std::vector<bool> contact_;
  std::vector<Vec3> pins_;
  bool airborne_ = false;
  double residual_ = 0.0;
  double distance_ = 0.0;
  double speed_ = 0.0;
  double time_ = 0.0;
};

}  // namespace hexgait
