#pragma once

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexgait/runner.hpp"

namespace hexgait {

struct ScriptError : std::runtime_error
{
  ScriptError(int line, const std::string& msg)
      : std::runtime_error("line " + std::to_string(line) + ": " + msg), line(line)
  {
  }
  int line;
};

// One `t=<sec> <event> <args...>` line.
struct ScriptEvent
{
  double time = 0.0;
  std::string event;
  std::vector<std::string> args;
  int line = 0;
};

struct SweepRequest
{
  std::vector<double> frequencies;  // Hz
  double stride = 0.1;              // m, stance sweep length per cycle
  std::string gait = "tripod";
  double duration = 20.0;           // s per point, after settling
  double settle = 5.0;              // s discarded before measuring
};

struct Script
{
  std::vector<ScriptEvent> events;  // sorted by time, stable
  double end_time = 1.0;
  std::optional<SweepRequest> sweep;
};

namespace detail {

inline double parse_number(const std::string& s, int line)
{
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &used);
  } catch (const std::exception&) {
    throw ScriptError(line, "expected a number, got '" + s + "'");
  }
  if (used != s.size() || !std::isfinite(v)) throw ScriptError(line, "expected a number, got '" + s + "'");
  return v;
}

inline bool parse_switch(const std::string& s, int line)
{
  if (s == "on" || s == "true" || s == "1") return true;
  if (s == "off" || s == "false" || s == "0") return false;
  throw ScriptError(line, "expected on/off, got '" + s + "'");
}

inline const std::map<std::string, std::size_t>& event_arity()
{
  static const std::map<std::string, std::size_t> a = {
      {"velocity", 3},   {"pose_velocity", 6}, {"gait", 1},       {"frequency", 1}, {"mode", 1},
      {"legipulate", 1}, {"leg_velocity", 4},  {"leg_tip", 4},    {"pose_source", 1},
      {"inclination", 1}, {"walk_plane", 1},  {"admittance", 1}, {"end", 0},       {"sweep", SIZE_MAX},
  };
  return a;
}

}  // namespace detail

// Blank lines and '#' comments are ignored.
inline Script parse_script(const std::string& text)
{
  Script s;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  bool has_end = false;
  while (std::getline(in, raw)) {
    ++line;
    if (auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    std::istringstream ls(raw);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    if (tok[0].rfind("t=", 0) != 0) throw ScriptError(line, "line must start with t=<seconds>");
    ScriptEvent e;
    e.line = line;
    e.time = detail::parse_number(tok[0].substr(2), line);
    if (e.time < 0) throw ScriptError(line, "negative time");
    if (tok.size() < 2) throw ScriptError(line, "missing event");
    e.event = tok[1];
    e.args.assign(tok.begin() + 2, tok.end());
    const auto& arity = detail::event_arity();
    const auto it = arity.find(e.event);
    if (it == arity.end()) throw ScriptError(line, "unknown event '" + e.event + "'");
    if (it->second != SIZE_MAX && e.args.size() != it->second)
      throw ScriptError(line, e.event + " takes " + std::to_string(it->second) + " argument(s)");

    if (e.event == "velocity" || e.event == "pose_velocity" || e.event == "frequency" || e.event == "leg_velocity" ||
        e.event == "leg_tip" || e.event == "legipulate")
      for (const auto& a : e.args) detail::parse_number(a, line);
    if (e.event == "frequency" && !(detail::parse_number(e.args[0], line) > 0))
      throw ScriptError(line, "frequency must be > 0");
    if (e.event == "mode" && e.args[0] != "packed" && e.args[0] != "stance")
      throw ScriptError(line, "mode must be packed or stance");
    if (e.event == "pose_source" && e.args[0] != "none" && e.args[0] != "imu" && e.args[0] != "auto")
      throw ScriptError(line, "pose_source must be none, imu or auto");
    if (e.event == "inclination" || e.event == "walk_plane" || e.event == "admittance")
      detail::parse_switch(e.args[0], line);

    if (e.event == "end") {
      s.end_time = e.time;
      has_end = true;
      continue;
    }
    if (e.event == "sweep") {
      SweepRequest r;
      for (const auto& a : e.args) {
        const auto eq = a.find('=');
        if (eq == std::string::npos) throw ScriptError(line, "sweep arguments are key=value");
        const std::string key = a.substr(0, eq), value = a.substr(eq + 1);
        if (key == "frequencies") {
          std::istringstream vs(value);
          for (std::string v; std::getline(vs, v, ',');) r.frequencies.push_back(detail::parse_number(v, line));
        } else if (key == "stride") {
          r.stride = detail::parse_number(value, line);
        } else if (key == "gait") {
          r.gait = value;
        } else if (key == "duration") {
          r.duration = detail::parse_number(value, line);
        } else if (key == "settle") {
          r.settle = detail::parse_number(value, line);
        } else {
          throw ScriptError(line, "unknown sweep key '" + key + "'");
        }
      }
      if (r.frequencies.empty()) throw ScriptError(line, "sweep needs frequencies=<f1,f2,...>");
      for (double f : r.frequencies)
        if (!(f > 0)) throw ScriptError(line, "sweep frequencies must be > 0");
      if (!(r.stride > 0) || !(r.duration > 0) || r.settle < 0) throw ScriptError(line, "invalid sweep parameters");
      s.sweep = r;
      continue;
    }
    s.events.push_back(std::move(e));
  }
  std::stable_sort(s.events.begin(), s.events.end(),
                   [](const ScriptEvent& a, const ScriptEvent& b) { return a.time < b.time; });
  if (!has_end && !s.events.empty()) s.end_time = s.events.back().time + 1.0;
  return s;
}

inline void apply_event(Controller& c, const ScriptEvent& e)
{
  auto num = [&e](std::size_t i) { return detail::parse_number(e.args[i], e.line); };
  if (e.event == "velocity") {
    c.set_velocity({num(0), num(1), num(2)});
  } else if (e.event == "pose_velocity") {
    c.set_pose_velocity({num(0), num(1), num(2), num(3), num(4), num(5)});
  } else if (e.event == "gait") {
    c.request_gait(e.args[0]);
  } else if (e.event == "frequency") {
    c.request_step_frequency(num(0));
  } else if (e.event == "mode") {
    c.request_mode(e.args[0] == "packed" ? Mode::Packed : Mode::Stance);
  } else if (e.event == "legipulate") {
    c.begin_legipulation(static_cast<int>(num(0)));
  } else if (e.event == "leg_velocity") {
    c.legipulate_velocity(static_cast<int>(num(0)), Vec3(num(1), num(2), num(3)));
  } else if (e.event == "leg_tip") {
    c.legipulate_tip(static_cast<int>(num(0)), Vec3(num(1), num(2), num(3)));
  } else if (e.event == "pose_source") {
    c.set_pose_source(e.args[0] == "imu" ? PoseSource::Imu : e.args[0] == "auto" ? PoseSource::Auto : PoseSource::None);
  } else if (e.event == "inclination") {
    c.set_inclination(detail::parse_switch(e.args[0], e.line));
  } else if (e.event == "walk_plane") {
    c.set_walk_plane(detail::parse_switch(e.args[0], e.line));
  } else if (e.event == "admittance") {
    c.set_admittance(detail::parse_switch(e.args[0], e.line));
  }
}

struct RunSummary
{
  long long ticks = 0;
  double duration = 0.0;
  double distance = 0.0;  // planar path length, m
  Vec3 displacement = Vec3::Zero();
  double mean_power = 0.0;
  double cost_of_transport = 0.0;  // 0 when the robot did not move
  long long limit_violations = 0;
};

// Runs a script, calling `on_tick` after every tick.
template <typename OnTick>
RunSummary run_script(Runner& runner, const Script& script, OnTick&& on_tick)
{
  Controller& c = runner.controller();
  const double dt = c.dt();
  const auto total = static_cast<long long>(std::llround(script.end_time / dt));
  std::size_t next = 0;
  RunSummary out;
  double energy = 0.0;
  const Vec3 start = runner.sim().body().translation();
  const double d0 = runner.sim().distance();
  for (long long k = 0; k < total; ++k) {
    const double t = static_cast<double>(k) * dt;
    while (next < script.events.size() && script.events[next].time <= t + 1e-9) apply_event(c, script.events[next++]);
    const auto before = c.joint_positions();
    runner.tick();
    for (std::size_t l = 0; l < before.size(); ++l)
      if (!command_within_limits(c.robot().legs[l], before[l], c.joint_positions()[l], dt)) ++out.limit_violations;
    energy += runner.sim().power() * dt;
    on_tick(runner);
  }
  out.ticks = total;
  out.duration = static_cast<double>(total) * dt;
  out.distance = runner.sim().distance() - d0;
  out.displacement = runner.sim().body().translation() - start;
  out.mean_power = out.duration > 0 ? energy / out.duration : 0.0;
  if (out.distance > 1e-6)
    out.cost_of_transport = cost_of_transport(out.mean_power, c.robot().mass, out.distance / out.duration,
                                              runner.sim().options().gravity);
  return out;
}

inline RunSummary run_script(Runner& runner, const Script& script)
{
  return run_script(runner, script, [](const Runner&) {});
}

struct SweepPoint
{
  double frequency = 0.0;  // realised step frequency, Hz
  double velocity = 0.0;   // commanded, m/s
  double measured_velocity = 0.0;
  double mean_power = 0.0;  // W
  double cost_of_transport = 0.0;
};

// Cost of transport against step frequency at a fixed stride. Each point is an
// independent run: start, settle, then measure over `duration`.
inline std::vector<SweepPoint> frequency_sweep(const RobotSpec& robot, const std::vector<GaitSpec>& gaits,
                                               const std::vector<WorkspacePolyhedron>& workspaces,
                                               const SweepRequest& req, RunnerOptions options = {})
{
  std::vector<SweepPoint> out;
  const GaitSpec& gait = find_gait(gaits, req.gait);
  for (double f_req : req.frequencies) {
    RobotSpec r = robot;
    r.default_gait = req.gait;
    r.step_frequency = f_req;
    Runner run(r, gaits, workspaces, options);
    const double f = run.controller().walk().step_frequency();
    const double v = req.stride * f / gait.duty_factor();
    run.controller().set_velocity({v, 0.0, 0.0});
    run.run(req.settle);
    const double d0 = run.sim().distance();
    const double t0 = run.sim().time();
    double energy = 0.0;
    const auto n = static_cast<long long>(std::llround(req.duration / run.controller().dt()));
    for (long long k = 0; k < n; ++k) {
      run.tick();
      energy += run.sim().power() * run.controller().dt();
    }
    SweepPoint p;
    p.frequency = f;
    p.velocity = v;
    const double elapsed = run.sim().time() - t0;
    p.measured_velocity = (run.sim().distance() - d0) / elapsed;
    p.mean_power = energy / elapsed;
    p.cost_of_transport = cost_of_transport(p.mean_power, r.mass, p.measured_velocity, options.sim.gravity);
    out.push_back(p);
  }
  return out;
}

inline std::string sweep_csv(const std::vector<SweepPoint>& points)
{
  std::ostringstream o;
  o << std::setprecision(10) << "frequency_hz,velocity_mps,measured_velocity_mps,mean_power_w,cost_of_transport\n";
  for (const auto& p : points)
    o << p.frequency << ',' << p.velocity << ',' << p.measured_velocity << ',' << p.mean_power << ','
      << p.cost_of_transport << '\n';
  return o.str();
}

// Number of sign changes in the first differences, zero differences skipped.
inline int difference_sign_changes(const std::vector<double>& y)
{
  int changes = 0, last = 0;
  for (std::size_t i = 1; i < y.size(); ++i) {
    const double d = y[i] - y[i - 1];
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s == 0) continue;
    if (last != 0 && s != last) ++changes;
    last = s;
  }
  return changes;
}

}  // namespace hexgait
