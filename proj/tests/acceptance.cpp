// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.
//
//   hexgait_acceptance [name ...]     run all criteria, or only the named ones

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hexgait/hexgait.hpp"
#include "hexgait/teleop_server.hpp"

#include "harness.hpp"
#include "oracles.hpp"
#include "ws_client.hpp"

using namespace hexgait;

namespace {

struct Outcome
{
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a)
{
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <typename... A>
std::string fmtn(const char* f, A... a)
{
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a...);
  return buf;
}

Outcome jacobian_fd()
{
  harness::Stopwatch sw;
  std::mt19937_64 rng(11);
  double worst = 0.0;
  int configs = 0;
  for (const char* name : {"planar_2r", "hexapod_3dof", "bullet_insectoid"}) {
    const RobotSpec robot = oracle::robot(name);
    const LegSpec& leg = robot.legs.front();
    for (int k = 0; k < 100; ++k, ++configs) {
      const JointVector q = oracle::random_config(leg, rng);
      const Eigen::MatrixXd fd = oracle::fd_pose_jacobian(leg, q);
      const Eigen::MatrixXd lin = jacobian(leg, q);
      const Eigen::MatrixXd full = pose_jacobian(leg, q);
      worst = std::max(worst, (lin - fd.topRows(3)).cwiseAbs().maxCoeff());
      worst = std::max(worst, (full - fd).cwiseAbs().maxCoeff());
    }
  }
  const double t = sw.seconds();
  return {worst < 1e-6 && t < 5.0, fmtn("%d configs, max |J - J_fd| = %.2e (< 1e-6), %.2f s (< 5 s)", configs, worst, t)};
}

Outcome ik_oracle()
{
  harness::Stopwatch sw;
  std::mt19937_64 rng(12);

  const RobotSpec planar = oracle::robot("planar_2r");
  const LegSpec& arm = planar.legs.front();
  const oracle::TwoLink two{arm.joints[0].dh.a, arm.joints[1].dh.a};
  IkOptions exact;
  exact.lambda = planar.ik_lambda;
  exact.tolerance = 1e-12;
  exact.max_iterations = 2000;
  std::uniform_real_distribution<double> q1d(-kPi, kPi), q2d(0.2, 2.85);
  double worst_rad = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const Eigen::Vector2d target = two.tip(q1d(rng), q2d(rng));
    const auto expected = two.ik(target.x(), target.y());
    const IkResult r = solve_ik(arm, arm.home(), Vec3(target.x(), target.y(), 0.0), exact);
    const double e = std::max(std::abs(oracle::angle_difference(r.q[0], (*expected)[0])),
                              std::abs(oracle::angle_difference(r.q[1], (*expected)[1])));
    worst_rad = std::max(worst_rad, e);
  }

  const RobotSpec bullet = oracle::robot("bullet_insectoid");
  const LegSpec& leg = bullet.legs.front();
  IkOptions o;
  o.lambda = bullet.ik_lambda;
  o.tolerance = 1e-6;
  o.max_iterations = 300;
  o.jla = JlaConfig::from(bullet.jla);
  // Targets are FK tips of random in-limit configurations that fall inside the
  // computed workspace; the same draw over the whole joint box is reported too.
  const WorkspacePolyhedron ws = harness::workspaces(bullet).front();
  auto inside = [&ws](const Vec3& body_tip) {
    const Vec3 d = body_tip - ws.origin;
    if (d.z() < ws.slices.front().height || d.z() > ws.slices.back().height) return false;
    return std::hypot(d.x(), d.y()) <= ws.radius(std::atan2(d.y(), d.x()), d.z());
  };
  int converged = 0, trials = 0, box_converged = 0, box_trials = 0;
  while (trials < 1000) {
    const JointVector q = oracle::random_config(leg, rng);
    const Vec3 target = oracle::dh_tip(leg, q);
    const IkResult r = solve_ik(leg, leg.home(), target, o);
    const bool ok = (oracle::dh_tip(leg, r.q) - target).norm() < 1e-3;
    ++box_trials;
    box_converged += ok;
    if (!inside(leg.base_frame * target)) continue;
    ++trials;
    converged += ok;
  }
  const double rate = static_cast<double>(converged) / trials;
  const double t = sw.seconds();
  return {worst_rad < 1e-6 && rate >= 0.99 && t < 30.0,
          fmtn("2R max error %.2e rad (< 1e-6) over 1000 targets; 5-DOF %.1f%% of %d workspace targets within 1 mm "
               "(>= 99%%); %.2f s (< 30 s) [whole joint box: %.1f%%, not graded]",
               worst_rad, 100.0 * rate, trials, t, 100.0 * box_converged / box_trials)};
}

Outcome joint_safety()
{
  harness::Stopwatch sw;
  long long ticks = 0, violations = 0, non_finite = 0;
  const struct
  {
    const char* robot;
    long long ticks;
    std::uint64_t seed;
  } runs[] = {{"hexapod_3dof", 400000, 1}, {"bullet_insectoid", 400000, 2}, {"bullet_mammalian", 200000, 3}};
  for (const auto& r : runs) {
    const RobotSpec robot = oracle::robot(r.robot);
    const auto s = harness::fuzz_controller(robot, harness::workspaces(robot), r.ticks, r.seed);
    ticks += s.ticks;
    violations += s.violations;
    non_finite += s.non_finite;
  }
  return {ticks >= 1000000 && violations == 0 && non_finite == 0,
          fmtn("%lld ticks, %lld limit violations (== 0), %lld non-finite, %.1f s", ticks, violations, non_finite,
               sw.seconds())};
}

Outcome trajectory_contract()
{
  std::mt19937_64 rng(14);
  std::uniform_real_distribution<double> s(-0.15, 0.15), h(0.01, 0.1), d(0.05, 1.5), z(-0.3, 0.0);
  double c0 = 0, vel = 0, apex = 0, disp = 0;
  for (int k = 0; k < 100; ++k) {
    StepCycleInput in;
    in.default_tip = Vec3(s(rng), s(rng), z(rng));
    in.stride = Vec3(s(rng), s(rng), 0.0);
    in.step_clearance = h(rng);
    in.swing_duration = d(rng);
    in.stance_duration = d(rng);
    const StepCycle c = build_step_cycle(in);

    const Vec3 stance_start = in.default_tip + 0.5 * in.stride;
    const Vec3 stance_end = stance_start + c.stance_duration * oracle::simpson([&](double t) { return stance_velocity(c, t); });
    c0 = std::max({c0, (bezier(c.primary, 1.0) - bezier(c.secondary, 0.0)).norm(),
                   (swing_position(c, 0.0) - stance_end).norm(), (swing_position(c, 1.0) - stance_start).norm()});
    vel = std::max({vel, (swing_velocity(c, 0.0) - stance_velocity(c, 1.0)).norm(),
                    (swing_velocity(c, 1.0) - stance_velocity(c, 0.0)).norm()});
    double top = -1e9;
    for (int i = 0; i <= 2000; ++i) top = std::max(top, swing_position(c, i / 2000.0).z());
    apex = std::max({apex, std::abs(swing_position(c, 0.5).z() - in.default_tip.z() - in.step_clearance),
                     std::abs(top - in.default_tip.z() - in.step_clearance)});
    disp = std::max(disp, (stance_end - stance_start + in.stride).norm());
  }
  return {c0 < 1e-9 && vel < 1e-6 && apex < 1e-9 && disp < 1e-6,
          fmtn("100 strides: C0 %.1e m (< 1e-9), velocity jump %.1e m/s (< 1e-6), apex %.1e m (< 1e-9), "
               "stance displacement %.1e m (< 1e-6)",
               c0, vel, apex, disp)};
}

Outcome cruise_odometry()
{
  harness::Stopwatch sw;
  const RobotSpec robot = oracle::robot("bullet_insectoid");
  Runner run(robot, default_gait_library(), generate_workspaces(robot));
  const auto r = harness::cruise(run, {0.4, 0.0, 0.0}, 30.0);
  const double t = sw.seconds();
  return {std::abs(r.distance - 12.0) <= 0.12 && t < 10.0,
          fmtn("%.4f m in 30 s (12 m +- 1%%), %.2f s (< 10 s)", r.distance, t)};
}

Outcome gait_stance_counts()
{
  const RobotSpec robot = oracle::robot("hexapod_3dof");
  std::string detail;
  bool ok = true;
  for (const auto& [gait, expected] : std::vector<std::pair<std::string, int>>{{"tripod", 3}, {"bipod", 2}, {"wave", 5}}) {
    const auto counts = harness::stance_counts(robot, gait, 10);
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    ok = ok && *lo == expected && *hi == expected;
    detail += fmtn("%s %d..%d over %zu ticks (== %d); ", gait.c_str(), *lo, *hi, counts.size(), expected);
  }
  return {ok, detail.substr(0, detail.size() - 2)};
}

Outcome workspace_annulus()
{
  const RobotSpec robot = oracle::robot("planar_2r");
  const LegSpec& arm = robot.legs.front();
  const oracle::TwoLink two{arm.joints[0].dh.a, arm.joints[1].dh.a};
  const double rmin = two.reach(arm.joints[1].joint.position_max);
  const double rmax = two.reach(arm.joints[1].joint.position_min);
  const WorkspacePolyhedron ws = generate_workspace(robot, arm, robot.workspace);
  const auto& radii = ws.slices.front().radii;
  double worst = 0.0;
  for (int i = 0; i < static_cast<int>(radii.size()); ++i) {
    const double b = bearing_of(i, static_cast<int>(radii.size()));
    const double expect = oracle::annulus_exit(arm.default_tip.head<2>(), b, rmin, rmax);
    worst = std::max(worst, std::abs(radii[static_cast<std::size_t>(i)] - expect));
  }
  return {worst <= 0.005, fmtn("%zu bearings, max |r - r_annulus| = %.2e m (<= 5e-3)", radii.size(), worst)};
}

Outcome admittance_closed_form()
{
  AdmittanceParams p;  // m = 0.1, b = 5, c = 1000
  const double force = 10.0, dt = 1e-3;
  AdmittanceState s;
  double worst = 0.0;
  for (int k = 1; k <= 5000; ++k) {
    admittance_update(s, p, force, dt);
    const double expect = oracle::mass_spring_damper_step(p.virtual_mass, p.virtual_damping, p.virtual_stiffness, force, k * dt);
    worst = std::max(worst, std::abs(s.dz - expect));
  }
  const double steady = std::abs(s.dz + force / p.virtual_stiffness);
  return {worst < 1e-3 && steady <= 1e-9,
          fmtn("max error %.2e m (< 1e-3) over 5 s at 1 ms; |dz + F/c| = %.1e (<= 1e-9)", worst, steady)};
}

Outcome cost_of_transport_spot()
{
  const double direct = cost_of_transport(50.0, 10.0, 0.25);
  std::vector<EnergyRecord> records;
  for (int k = 0; k <= 100; ++k) {
    EnergyRecord r;
    r.time = 0.1 * k;
    r.voltage = 12.0;
    r.current = 50.0 / 12.0;
    r.distance = 0.25 * r.time;
    records.push_back(r);
  }
  const double logged = cost_of_transport(records, 10.0);
  const double expect = oracle::cost_of_transport(50.0, 10.0, 0.25);
  return {std::abs(direct - 2.039) <= 1e-3 && std::abs(logged - 2.039) <= 1e-3 && std::abs(direct - expect) < 1e-12,
          fmtn("CoT %.5f from mean power, %.5f from records (2.039 +- 1e-3)", direct, logged)};
}

Outcome static_power_direction()
{
  auto standing = [](const RobotSpec& robot, bool grounded) {
    RunnerOptions o;
    o.sim.grounded = grounded;
    Runner run(robot, default_gait_library(), harness::workspaces(robot), o);
    run.run(0.5);
    double sum = 0.0;
    for (const auto& t : run.sim().torques()) sum += t.cwiseAbs().sum();
    return std::make_pair(run.sim().power(), sum);
  };
  const RobotSpec insectoid = oracle::robot("bullet_insectoid");
  const RobotSpec mammalian = oracle::robot("bullet_mammalian");
  const auto [p_ground, tau_insectoid] = standing(insectoid, true);
  const auto [p_air, tau_air] = standing(insectoid, false);
  const auto [p_mammal, tau_mammal] = standing(mammalian, true);
  return {p_ground > p_air && tau_mammal < tau_insectoid,
          fmtn("P ground %.2f W > P air %.2f W; sum|tau| mammalian %.3f < insectoid %.3f N*m", p_ground, p_air,
               tau_mammal, tau_insectoid)};
}

Outcome frequency_sweep_minimum()
{
  harness::Stopwatch sw;
  const RobotSpec robot = oracle::robot("bullet_insectoid");
  SweepRequest req;
  for (int i = 1; i <= 10; ++i) req.frequencies.push_back(0.25 * i);
  req.stride = 0.1;
  req.gait = "tripod";
  req.duration = 10.0;
  req.settle = 4.0;
  const auto points = frequency_sweep(robot, default_gait_library(), harness::workspaces(robot), req);
  int changes = 0, last = 0;
  std::string curve;
  for (std::size_t i = 0; i < points.size(); ++i) {
    curve += fmt("%.2f ", points[i].cost_of_transport);
    if (i == 0) continue;
    const double d = points[i].cost_of_transport - points[i - 1].cost_of_transport;
    const int sign = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (sign != 0 && last != 0 && sign != last) ++changes;
    if (sign != 0) last = sign;
  }
  const auto best = std::min_element(points.begin(), points.end(), [](const SweepPoint& a, const SweepPoint& b) {
    return a.cost_of_transport < b.cost_of_transport;
  });
  const bool interior = best != points.begin() && best != points.end() - 1;
  const double t = sw.seconds();
  return {changes == 1 && interior && t < 60.0,
          fmtn("CoT [%s] sign changes %d (== 1), minimum at %.2f Hz, %.1f s (< 60 s)", curve.c_str(), changes,
               best->frequency, t)};
}

Outcome teleop_protocol()
{
  using wsclient::Clock;
  using json = nlohmann::json;
  const RobotSpec robot = oracle::robot("bullet_insectoid");
  Runner runner(robot, default_gait_library(), harness::workspaces(robot));
  teleop::Service service(runner);
  teleop::Server server(service, "127.0.0.1:0");
  teleop::TickLoop loop(service, 200.0);
  wsclient::Client client(server.port());

  auto is = [](const char* type) { return [type](const json& m) { return m.value("type", "") == type; }; };
  if (client.wait_for(is("hello"), 5.0) < 0) return {false, "no hello payload"};
  const double tick_rate = client.frames().front().message["tick_rate"].get<double>();

  // State stream rate over a 3 s window.
  std::this_thread::sleep_for(std::chrono::milliseconds(300));
  const auto w0 = Clock::now();
  std::this_thread::sleep_for(std::chrono::seconds(3));
  const auto w1 = Clock::now();
  int states = 0;
  for (const auto& f : client.frames())
    if (f.received >= w0 && f.received < w1 && f.message.value("type", "") == "state") ++states;
  const double rate = states / std::chrono::duration<double>(w1 - w0).count();

  // Command -> stride latency, counted in controller ticks from the last state
  // seen before the command to the first state with a non-zero stride.
  auto last_state = [&client]() {
    const auto frames = client.frames();
    for (auto it = frames.rbegin(); it != frames.rend(); ++it)
      if (it->message.value("type", "") == "state") return it->message;
    return json();
  };
  const json before = last_state();
  const long long tick0 = before["tick"].get<long long>();
  const double period_ticks = tick_rate / before["step_frequency"].get<double>();
  long long seq = 1;
  auto velocity = [&seq](double vx) {
    return json{{"proto", 1}, {"type", "velocity"}, {"seq", seq++}, {"linear", {vx, 0.0, 0.0}}, {"angular", {0.0, 0.0, 0.0}}};
  };
  std::size_t mark = client.frames().size();
  client.send(velocity(0.2));
  long moving = -1;
  for (int k = 0; k < 40 && moving < 0; ++k) {
    moving = client.wait_for(
        [](const json& m) {
          if (m.value("type", "") != "state") return false;
          for (const auto& l : m["legs"])
            if (std::hypot(l["stride"][0].get<double>(), l["stride"][1].get<double>()) > 0) return true;
          return false;
        },
        0.1, mark);
    if (moving < 0) client.send(velocity(0.2));
  }
  if (moving < 0) return {false, "stride never became non-zero"};
  const long long latency = client.frames()[static_cast<std::size_t>(moving)].message["tick"].get<long long>() - tick0;

  // Dead-man: keep commanding for a while, then go silent.
  for (int k = 0; k < 5; ++k) {
    client.send(velocity(0.2));
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
  }
  mark = client.frames().size();
  const auto silent = Clock::now();
  client.send(velocity(0.2));
  const long zeroed = client.wait_for(
      [](const json& m) {
        if (m.value("type", "") != "state") return false;
        const auto& v = m["metrics"]["velocity_command"];
        return v[0].get<double>() == 0.0 && v[1].get<double>() == 0.0 && v[2].get<double>() == 0.0;
      },
      3.0, mark);
  if (zeroed < 0) return {false, "velocity command never zeroed after silence"};
  const double deadman = std::chrono::duration<double>(client.frames()[static_cast<std::size_t>(zeroed)].received - silent).count();

  int acks = 0, errors = 0;
  for (const auto& f : client.frames()) {
    acks += f.message.value("type", "") == "ack";
    errors += f.message.value("type", "") == "error";
  }
  client.close();
  loop.stop();
  server.stop();
  const bool ok = latency <= 2 * period_ticks && deadman <= 0.6 && std::abs(rate - 20.0) <= 2.0 && errors == 0 &&
                  acks == seq - 1;
  return {ok, fmtn("latency %lld ticks (<= %.0f = 2 cycles), dead-man %.3f s (<= 0.6), stream %.2f Hz (20 +- 2), "
                   "%d/%lld acks",
                   latency, 2 * period_ticks, deadman, rate, acks, seq - 1)};
}

}  // namespace

int main(int argc, char** argv)
{
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"jacobian_finite_difference", jacobian_fd},
      {"ik_oracle", ik_oracle},
      {"joint_safety_fuzz", joint_safety},
      {"trajectory_contract", trajectory_contract},
      {"cruise_odometry", cruise_odometry},
      {"gait_stance_counts", gait_stance_counts},
      {"workspace_annulus", workspace_annulus},
      {"admittance_closed_form", admittance_closed_form},
      {"cost_of_transport_spot", cost_of_transport_spot},
      {"static_power_direction", static_power_direction},
      {"frequency_sweep_minimum", frequency_sweep_minimum},
      {"teleop_protocol", teleop_protocol},
  };
  const std::vector<std::string> only(argv + 1, argv + argc);
  int failed = 0, run = 0;
  for (const auto& [name, fn] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
    ++run;
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << std::endl;
  }
  std::cout << (run - failed) << "/" << run << " criteria passed" << std::endl;
  return failed == 0 && run > 0 ? 0 : 1;
}
