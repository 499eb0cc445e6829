// Shared drivers for the test suite and the acceptance binary.
#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hexgait/hexgait.hpp"
#include "oracles.hpp"

namespace harness {

using namespace hexgait;

// Workspaces are the slowest thing to build; keep one copy per robot per process.
inline const std::vector<WorkspacePolyhedron>& workspaces(const RobotSpec& robot)
{
  static std::map<std::string, std::vector<WorkspacePolyhedron>> cache;
  const std::string key = spec_hash(robot);
  auto it = cache.find(key);
  if (it == cache.end()) it = cache.emplace(key, generate_workspaces(robot)).first;
  return it->second;
}

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct FuzzStats
{
  long long ticks = 0;
  long long violations = 0;   // position or per-tick velocity bound broken
  long long non_finite = 0;
  long long events = 0;
  std::map<std::string, long long> modes;  // ticks spent per mode
};

// Random operator inputs and sensor readings at random intervals; every
// emitted command is checked against the joint bounds.
inline FuzzStats fuzz_controller(const RobotSpec& robot, const std::vector<WorkspacePolyhedron>& ws, long long ticks,
                                 std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  auto uni = [&rng](double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); };
  auto pick = [&rng](int n) { return static_cast<int>(rng() % static_cast<std::uint64_t>(n)); };

  ControllerOptions opts;
  opts.initial_mode = pick(2) ? Mode::Stance : Mode::Packed;
  Controller c(robot, default_gait_library(), ws, opts);
  const auto& gaits = c.walk().gaits();
  const double dt = c.dt();
  FuzzStats s;

  for (long long k = 0; k < ticks; ++k) {
    if (pick(60) == 0) {
      ++s.events;
      const int leg = robot.legs[static_cast<std::size_t>(pick(static_cast<int>(robot.legs.size())))].id;
      switch (pick(12)) {
        case 0: c.set_velocity({uni(-1.5, 1.5), uni(-1.5, 1.5), uni(-2, 2)}); break;
        case 1: c.set_velocity({}); break;
        case 2: c.set_pose_velocity({uni(-1, 1), uni(-1, 1), uni(-1, 1), uni(-3, 3), uni(-3, 3), uni(-3, 3)}); break;
        case 3: c.request_gait(gaits[static_cast<std::size_t>(pick(static_cast<int>(gaits.size())))].name); break;
        case 4: c.request_step_frequency(uni(0.2, 4.0)); break;
        case 5: c.request_mode(static_cast<Mode>(pick(6))); break;
        case 6: c.begin_legipulation(leg); break;
        case 7: c.legipulate_velocity(leg, Vec3(uni(-1, 1), uni(-1, 1), uni(-1, 1))); break;
        case 8: c.legipulate_tip(leg, Vec3(uni(-0.6, 0.6), uni(-0.6, 0.6), uni(-0.6, 0.3))); break;
        case 9: c.set_pose_source(static_cast<PoseSource>(pick(3))); break;
        case 10:
          c.set_inclination(pick(2));
          c.set_walk_plane(pick(2));
          break;
        case 11: c.set_admittance(pick(2)); break;
      }
    }

    SensorInputs in;
    if (pick(4)) in.imu = std::array<double, 2>{uni(-0.4, 0.4), uni(-0.4, 0.4)};
    if (pick(2)) {
      std::vector<JointVector> tau;
      for (const auto& q : c.joint_positions()) tau.push_back(JointVector::Random(q.size()) * 6.0);
      in.torques = tau;
    }
    for (std::size_t l = 0; l < robot.legs.size(); ++l)
      if (pick(2)) in.contact_tips.push_back(tip_in_body(robot.legs[l], c.joint_positions()[l]) + Vec3::Random() * 0.01);

    const std::vector<JointVector> before = c.joint_positions();
    c.tick(in);
    ++s.ticks;
    ++s.modes[to_string(c.mode())];
    for (std::size_t l = 0; l < before.size(); ++l) {
      const JointVector& q = c.joint_positions()[l];
      if (!q.allFinite()) ++s.non_finite;
      if (!command_within_limits(robot.legs[l], before[l], q, dt)) ++s.violations;
    }
  }
  return s;
}

struct CruiseResult
{
  double distance = 0.0;       // straight-line planar displacement over the window, m
  double path_length = 0.0;    // m
  double warmup = 0.0;         // s of sim time before the window opened
  long long velocity_clamps = 0;
  double max_residual = 0.0;   // worst stance-foot slip seen by the sim, m
};

// Accelerates to `v`, waits until the walk is steady at the commanded speed,
// then measures for `window` seconds.
inline CruiseResult cruise(Runner& run, const PlanarVelocity& v, double window)
{
  CruiseResult out;
  Controller& c = run.controller();
  c.set_velocity(v);
  const long long guard = static_cast<long long>(30.0 / c.dt());
  for (long long k = 0; k < guard; ++k) {
    if (c.walk().state() == WalkState::Moving && c.walk().velocity() == c.walk().limited_target()) break;
    run.tick();
  }
  out.warmup = run.sim().time();
  const Vec3 p0 = run.sim().body().translation();
  const double d0 = run.sim().distance();
  const auto n = static_cast<long long>(std::llround(window / c.dt()));
  for (long long k = 0; k < n; ++k) {
    run.tick();
    for (const auto& s : c.legs()) out.velocity_clamps += s.velocity_clamped;
    out.max_residual = std::max(out.max_residual, run.sim().residual());
  }
  out.distance = (run.sim().body().translation() - p0).head<2>().norm();
  out.path_length = run.sim().distance() - d0;
  return out;
}

// Legs in stance at each tick of a steady walk over `periods` gait periods.
inline std::vector<int> stance_counts(const RobotSpec& robot, const std::string& gait, int periods,
                                      double tick_rate = 200.0)
{
  RobotSpec r = robot;
  r.default_gait = gait;
  Walkspace ws;
  ws.radii.assign(72, 0.05);
  WalkController w(r, default_gait_library(), ws, tick_rate);
  w.set_desired_velocity({0.02, 0.0, 0.0});
  while (w.state() != WalkState::Moving) w.update();
  std::vector<int> counts;
  for (long long k = 0; k < static_cast<long long>(periods) * w.period_ticks(); ++k) {
    w.update();
    int n = 0;
    for (const auto& l : w.legs()) n += l.phase.state == StepState::Stance;
    counts.push_back(n);
  }
  return counts;
}

}  // namespace harness
