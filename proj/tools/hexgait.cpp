// hexgait command-line front end: validate, workspace, trajectory, run, serve.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <thread>

#include <CLI11.hpp>

#include "hexgait/hexgait.hpp"
#include "hexgait/teleop_server.hpp"

namespace fs = std::filesystem;
using namespace hexgait;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

struct Common
{
  std::string robot;
  std::string gaits;
  std::string out = "out";
  double tick_rate = 200.0;
  unsigned long long seed = 0;
};

std::vector<GaitSpec> load_gaits(const Common& c)
{
  return c.gaits.empty() ? default_gait_library() : load_gait_library_file(c.gaits);
}

void write_file(const fs::path& path, const std::string& text)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int cmd_validate(const Common& c)
{
  const RobotSpec robot = load_robot_spec_file(c.robot);
  const auto gaits = load_gaits(c);
  int usable = 0;
  for (const auto& g : gaits)
    if (g.offset_multiplier.size() == robot.legs.size()) ++usable;
  find_gait(gaits, robot.default_gait);
  validate_gait_for_robot(find_gait(gaits, robot.default_gait), robot);
  std::cout << "ok: " << robot.name << ", " << robot.legs.size() << " legs, " << robot.total_joints() << " joints, "
            << usable << "/" << gaits.size() << " gaits usable\n";
  return 0;
}

int cmd_workspace(const Common& c)
{
  const RobotSpec robot = load_robot_spec_file(c.robot);
  const fs::path out(c.out);
  fs::create_directories(out);
  bool hit = false;
  const auto ws = load_or_generate_workspaces(robot, out / "cache", &hit);
  const Walkspace walk = derive_walkspace(ws);
  for (const auto& w : ws) {
    write_file(out / ("leg" + std::to_string(w.leg_id) + "_workspace.csv"), workspace_csv({w}));
    write_file(out / ("leg" + std::to_string(w.leg_id) + "_walkspace.csv"), walkspace_csv(walk));
  }
  std::cout << (hit ? "cache hit" : "generated") << ": " << ws.size() << " legs, " << walk.bearings()
            << " bearings -> " << out.string() << "\n";
  return 0;
}

int cmd_trajectory(const Common& c, const std::string& gait, const std::vector<double>& velocity, int cycles)
{
  RobotSpec robot = load_robot_spec_file(c.robot);
  if (!gait.empty()) robot.default_gait = gait;
  const auto gaits = load_gaits(c);
  const fs::path out(c.out);
  fs::create_directories(out);
  const auto ws = load_or_generate_workspaces(robot, out / "cache");
  WalkController walk(robot, gaits, derive_walkspace(ws), c.tick_rate);
  walk.set_desired_velocity({velocity[0], velocity[1], velocity[2]});
  std::ofstream f(out / "trajectory.csv", std::ios::binary);
  f << "tick,time,walk_state,leg_id,phase,progress,x,y,z\n";
  long long moving_cycles_ticks = 0;
  for (long long k = 0; moving_cycles_ticks < static_cast<long long>(cycles) * walk.period_ticks(); ++k) {
    walk.update();
    if (walk.state() == WalkState::Moving) ++moving_cycles_ticks;
    if (k > 1000000) throw std::runtime_error("walk never reached steady motion");
    for (const auto& l : walk.legs())
      f << k << ',' << fmt((k + 1) / c.tick_rate) << ',' << to_string(walk.state()) << ',' << l.id << ','
        << (l.phase.state == StepState::Stance ? "stance" : "swing") << ',' << fmt(l.phase.t) << ',' << fmt(l.tip.x())
        << ',' << fmt(l.tip.y()) << ',' << fmt(l.tip.z()) << '\n';
  }
  std::cout << "wrote " << (out / "trajectory.csv").string() << "\n";
  return 0;
}

RunnerOptions runner_options(const Common& c)
{
  RunnerOptions o;
  o.controller.tick_rate = c.tick_rate;
  o.sim.seed = c.seed;
  return o;
}

int cmd_run(const Common& c, const std::string& script_path)
{
  const RobotSpec robot = load_robot_spec_file(c.robot);
  const auto gaits = load_gaits(c);
  const Script script = parse_script(script_path.empty() ? std::string() : read_text_file(script_path));
  const fs::path out(c.out);
  fs::create_directories(out);
  const auto ws = load_or_generate_workspaces(robot, out / "cache");

  if (script.sweep) {
    const auto points = frequency_sweep(robot, gaits, ws, *script.sweep, runner_options(c));
    write_file(out / "sweep.csv", sweep_csv(points));
    std::cout << sweep_csv(points);
    return 0;
  }

  Runner runner(robot, gaits, ws, runner_options(c));
  std::ofstream commands(out / "commands.csv", std::ios::binary);
  std::ofstream torques(out / "torques.csv", std::ios::binary);
  std::ofstream log(out / "run.csv", std::ios::binary);
  std::string header = "tick";
  for (const auto& leg : robot.legs)
    for (const auto& j : leg.joints) header += ",leg" + std::to_string(leg.id) + "_" + j.joint.name;
  commands << header << '\n';
  torques << header << '\n';
  log << "tick,time,mode,walk_state,gait,x,y,z,roll,pitch,yaw,vx_cmd,vy_cmd,wz_cmd,vx,vy,wz,power,cot,contacts\n";

  auto row = [](std::ostream& o, long long tick, const std::vector<JointVector>& v) {
    o << tick;
    for (const auto& q : v)
      for (Eigen::Index i = 0; i < q.size(); ++i) o << ',' << fmt(q[i]);
    o << '\n';
  };
  const RunSummary s = run_script(runner, script, [&](const Runner& r) {
    const Snapshot snap = r.snapshot();
    row(commands, snap.tick, r.controller().last_command().position);
    row(torques, snap.tick, r.sim().torques());
    const Vec3 p = snap.body.translation(), rpy = to_rpy(snap.body.linear());
    std::string contacts;
    for (bool b : snap.contacts) contacts += b ? '1' : '0';
    log << snap.tick << ',' << fmt(snap.time) << ',' << to_string(snap.mode) << ',' << to_string(snap.walk_state) << ','
        << snap.gait << ',' << fmt(p.x()) << ',' << fmt(p.y()) << ',' << fmt(p.z()) << ',' << fmt(rpy.x()) << ','
        << fmt(rpy.y()) << ',' << fmt(rpy.z()) << ',' << fmt(snap.velocity_command.vx) << ','
        << fmt(snap.velocity_command.vy) << ',' << fmt(snap.velocity_command.wz) << ',' << fmt(snap.velocity.vx) << ','
        << fmt(snap.velocity.vy) << ',' << fmt(snap.velocity.wz) << ',' << fmt(snap.power) << ','
        << fmt(snap.cost_of_transport) << ',' << contacts << '\n';
  });
  nlohmann::json summary = {{"ticks", s.ticks},
                            {"duration_s", s.duration},
                            {"distance_m", s.distance},
                            {"displacement_m", {s.displacement.x(), s.displacement.y(), s.displacement.z()}},
                            {"mean_power_w", s.mean_power},
                            {"cost_of_transport", s.cost_of_transport},
                            {"limit_violations", s.limit_violations}};
  write_file(out / "summary.json", summary.dump(2) + "\n");
  std::cout << summary.dump(2) << "\n";
  return 0;
}

std::atomic<bool> g_stop{false};

int cmd_serve(const Common& c, const std::string& bind, double state_rate, double deadman)
{
  const RobotSpec robot = load_robot_spec_file(c.robot);
  const auto gaits = load_gaits(c);
  const auto ws = load_or_generate_workspaces(robot, fs::path(c.out) / "cache");
  Runner runner(robot, gaits, ws, runner_options(c));
  teleop::ServiceOptions so;
  so.state_rate = state_rate;
  so.deadman_timeout = deadman;
  teleop::Service service(runner, so);
  std::unique_ptr<teleop::Server> server;
  try {
    server = std::make_unique<teleop::Server>(service, bind);
  } catch (const std::exception& e) {
    std::cerr << "error: cannot bind " << bind << ": " << e.what() << "\n";
    return kExitRuntime;
  }
  std::cout << "listening on port " << server->port() << " (ws /ws, GET /state)" << std::endl;
  std::signal(SIGINT, [](int) { g_stop = true; });
  std::signal(SIGTERM, [](int) { g_stop = true; });
  teleop::TickLoop loop(service, c.tick_rate);
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  loop.stop();
  server->stop();
  return 0;
}

}  // namespace

int main(int argc, char** argv)
{
  CLI::App app{"hexgait: quasi-static multilegged locomotion controller and simulator"};
  app.require_subcommand(1);
  Common c;
  auto common = [&c](CLI::App* sub, bool gaits) {
    sub->add_option("--robot", c.robot, "robot YAML")->required()->envname("HEXGAIT_ROBOT");
    if (gaits) sub->add_option("--gaits", c.gaits, "gait library YAML (built-in library if omitted)")->envname("HEXGAIT_GAITS");
    sub->add_option("--out", c.out, "output directory")->envname("HEXGAIT_OUT");
    sub->add_option("--tick-rate", c.tick_rate, "controller rate, Hz")->envname("HEXGAIT_TICK_RATE")->check(CLI::PositiveNumber);
    sub->add_option("--seed", c.seed, "simulation RNG seed")->envname("HEXGAIT_SEED");
  };

  auto* validate = app.add_subcommand("validate", "load and check a robot and gait library");
  common(validate, true);

  auto* workspace = app.add_subcommand("workspace", "export leg workspaces and the walkspace");
  common(workspace, false);

  auto* trajectory = app.add_subcommand("trajectory", "export tip trajectories");
  common(trajectory, true);
  std::string gait;
  std::vector<double> velocity{0.1, 0.0, 0.0};
  int cycles = 2;
  trajectory->add_option("--gait", gait, "gait name (robot default if omitted)");
  trajectory->add_option("--velocity", velocity, "vx vy wz")->expected(3);
  trajectory->add_option("--cycles", cycles, "steady cycles to export")->check(CLI::PositiveNumber);

  auto* run = app.add_subcommand("run", "run a timed command script in simulation");
  common(run, true);
  std::string script;
  run->add_option("--script", script, "script file (empty: stand for 1 s)")->envname("HEXGAIT_SCRIPT");

  auto* serve = app.add_subcommand("serve", "serve the teleoperation protocol");
  common(serve, true);
  std::string bind = "127.0.0.1:8080";
  double state_rate = 20.0, deadman = 0.5;
  serve->add_option("--bind", bind, "host:port")->envname("HEXGAIT_BIND");
  serve->add_option("--state-rate", state_rate, "state stream rate, Hz")->check(CLI::PositiveNumber);
  serve->add_option("--deadman", deadman, "command silence before velocity is zeroed, s")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : kExitValidation;
  }

  try {
    if (*validate) return cmd_validate(c);
    if (*workspace) return cmd_workspace(c);
    if (*trajectory) return cmd_trajectory(c, gait, velocity, cycles);
    if (*run) return cmd_run(c, script);
    if (*serve) return cmd_serve(c, bind, state_rate, deadman);
  } catch (const ConfigError& e) {
    std::cerr << "invalid: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ScriptError& e) {
    std::cerr << "invalid script: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return 0;
}
