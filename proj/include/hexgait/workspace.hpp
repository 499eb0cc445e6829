#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "hexgait/config.hpp"
#include "hexgait/kinematics.hpp"
#include "hexgait/model.hpp"

namespace hexgait {

// Bearings are uniform: bearing(i) = i * 2pi / count, measured in the body frame
// about the leg's default tip.
inline int bearing_count(double bearing_step)
{
  const int n = static_cast<int>(std::lround(2.0 * kPi / bearing_step));
  if (n < 3) throw std::invalid_argument("bearing step too coarse");
  return n;
}

inline double bearing_of(int i, int count)
{
  return 2.0 * kPi * i / count;
}

// Radius along `theta` of the star polygon with vertices (r_i, bearing(i)):
// exact intersection of the ray with the edge it crosses.
inline double polygon_radius(const std::vector<double>& radii, double theta)
{
  const int n = static_cast<int>(radii.size());
  double a = std::fmod(theta, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  const double step = 2.0 * kPi / n;
  int i = static_cast<int>(std::floor(a / step));
  i = std::clamp(i, 0, n - 1);
  const int j = (i + 1) % n;
  const double ai = bearing_of(i, n), aj = bearing_of(j, n);
  const double xi = radii[static_cast<std::size_t>(i)] * std::cos(ai), yi = radii[static_cast<std::size_t>(i)] * std::sin(ai);
  const double xj = radii[static_cast<std::size_t>(j)] * std::cos(aj), yj = radii[static_cast<std::size_t>(j)] * std::sin(aj);
  const double ex = xj - xi, ey = yj - yi;
  const double ux = std::cos(a), uy = std::sin(a);
  const double denom = ux * ey - uy * ex;
  if (std::abs(denom) < 1e-15) return std::min(radii[static_cast<std::size_t>(i)], radii[static_cast<std::size_t>(j)]);
  const double s = (xi * ey - yi * ex) / denom;
  return std::max(0.0, s);
}

struct RadialSlice
{
  double height = 0.0;          // offset along body z from the default tip
  std::vector<double> radii;    // one per bearing

  bool operator==(const RadialSlice&) const = default;
};

struct WorkspacePolyhedron
{
  int leg_id = 1;
  Vec3 origin = Vec3::Zero();   // default tip, body frame
  std::vector<RadialSlice> slices;  // increasing height

  int bearings() const { return slices.empty() ? 0 : static_cast<int>(slices.front().radii.size()); }

  // Linear interpolation between slices; clamped to the outermost slices.
  std::vector<double> radii_at(double height) const
  {
    if (slices.empty()) throw std::runtime_error("empty workspace");
    if (height <= slices.front().height) return slices.front().radii;
    if (height >= slices.back().height) return slices.back().radii;
    for (std::size_t k = 0; k + 1 < slices.size(); ++k) {
      const auto& lo = slices[k];
      const auto& hi = slices[k + 1];
      if (height <= hi.height) {
        const double w = (height - lo.height) / (hi.height - lo.height);
        std::vector<double> r(lo.radii.size());
        for (std::size_t i = 0; i < r.size(); ++i) r[i] = (1.0 - w) * lo.radii[i] + w * hi.radii[i];
        return r;
      }
    }
    return slices.back().radii;
  }

  double radius(double bearing, double height) const { return polygon_radius(radii_at(height), bearing); }

  bool operator==(const WorkspacePolyhedron& o) const
  {
    return leg_id == o.leg_id && origin == o.origin && slices == o.slices;
  }
};

// Planar polygon shared by all legs, centred on each leg's default tip.
struct Walkspace
{
  std::vector<double> radii;

  double radius(double bearing) const { return polygon_radius(radii, bearing); }
  int bearings() const { return static_cast<int>(radii.size()); }

  bool operator==(const Walkspace&) const = default;
};

struct WorkspaceProbe
{
  bool warm_start = true;  // seed each outward probe with the previous solution
};

namespace detail {

inline IkOptions workspace_ik_options(const RobotSpec& robot)
{
  IkOptions o;
  o.lambda = robot.ik_lambda;
  o.tolerance = 1e-6;
  o.max_iterations = 60;
  o.jla = JlaConfig::from(robot.jla);
  return o;
}

}  // namespace detail

// Outward probing along each (height, bearing): the recorded radius is the last
// probe distance whose IK solution stayed off the joint limits and within the
// tip tolerance.
inline WorkspacePolyhedron generate_workspace(const RobotSpec& robot, const LegSpec& leg, const WorkspaceSearch& search,
                                              const WorkspaceProbe& probe = {})
{
  if (!(search.height_step > 0 && search.bearing_step > 0 && search.radial_step > 0 && search.tip_tolerance > 0))
    throw std::invalid_argument("workspace search increments must be > 0");
  const IkOptions opts = detail::workspace_ik_options(robot);
  const Vec3 origin = leg.default_tip;
  const IkResult start = solve_ik(leg, leg.home(), leg_target(leg, origin), opts);
  if (start.error > search.tip_tolerance)
    throw ConfigError("legs[" + std::to_string(leg.id) + "].default_tip", "default tip position is not reachable");

  const int nb = bearing_count(search.bearing_step);
  const int nh = static_cast<int>(std::floor((search.height_max - search.height_min) / search.height_step + 1e-9)) + 1;
  WorkspacePolyhedron ws;
  ws.leg_id = leg.id;
  ws.origin = origin;
  for (int k = 0; k < nh; ++k) {
    RadialSlice slice;
    slice.height = nh == 1 ? search.height_min : search.height_min + k * search.height_step;
    slice.radii.assign(static_cast<std::size_t>(nb), 0.0);
    const Vec3 centre = origin + Vec3(0, 0, slice.height);
    const IkResult base = solve_ik(leg, start.q, leg_target(leg, centre), opts);
    if (base.error <= search.tip_tolerance && !base.limit_hit) {
      for (int i = 0; i < nb; ++i) {
        const double a = bearing_of(i, nb);
        const Vec3 dir(std::cos(a), std::sin(a), 0.0);
        JointVector q = base.q;
        double r = 0.0;
        for (int step = 1;; ++step) {
          const double d = step * search.radial_step;
          if (d > search.max_radius + 1e-12) break;
          const IkResult res = solve_ik(leg, probe.warm_start ? q : base.q, leg_target(leg, centre + d * dir), opts);
          if (res.limit_hit || res.error > search.tip_tolerance) break;
          r = d;
          q = res.q;
        }
        slice.radii[static_cast<std::size_t>(i)] = r;
      }
    }
    ws.slices.push_back(std::move(slice));
  }
  return ws;
}

inline std::vector<WorkspacePolyhedron> generate_workspaces(const RobotSpec& robot)
{
  std::vector<WorkspacePolyhedron> out;
  for (const auto& leg : robot.legs) out.push_back(generate_workspace(robot, leg, robot.workspace));
  return out;
}

// Distance along `bearing` from `from` to the perpendicular bisector between
// `from` and `other` (infinite when moving away from `other`).
inline double bisector_distance(const Vec3& from, const Vec3& other, double bearing)
{
  const double wx = other.x() - from.x(), wy = other.y() - from.y();
  const double along = std::cos(bearing) * wx + std::sin(bearing) * wy;
  if (along <= 0.0) return std::numeric_limits<double>::infinity();
  return 0.5 * (wx * wx + wy * wy) / along;
}

// Slice at `height`, clipped at the bisectors with the cyclically adjacent legs.
inline std::vector<double> restricted_slice(const std::vector<WorkspacePolyhedron>& all, std::size_t index, double height)
{
  std::vector<double> r = all[index].radii_at(height);
  const int nb = static_cast<int>(r.size());
  const std::size_t n = all.size();
  std::vector<std::size_t> neighbours;
  if (n >= 2) neighbours.push_back((index + 1) % n);
  if (n >= 3) neighbours.push_back((index + n - 1) % n);
  for (std::size_t j : neighbours)
    for (int i = 0; i < nb; ++i)
      r[static_cast<std::size_t>(i)] =
          std::min(r[static_cast<std::size_t>(i)], bisector_distance(all[index].origin, all[j].origin, bearing_of(i, nb)));
  return r;
}

inline Walkspace derive_walkspace(const std::vector<WorkspacePolyhedron>& all, double height = 0.0)
{
  if (all.empty()) throw std::invalid_argument("no workspaces");
  Walkspace w;
  for (std::size_t l = 0; l < all.size(); ++l) {
    const auto r = restricted_slice(all, l, height);
    if (r.empty()) throw std::invalid_argument("empty workspace slice");
    if (w.radii.empty())
      w.radii = r;
    else if (r.size() != w.radii.size())
      throw std::invalid_argument("workspaces use different bearing grids");
    else
      for (std::size_t i = 0; i < r.size(); ++i) w.radii[i] = std::min(w.radii[i], r[i]);
  }
  const std::size_t nb = w.radii.size();
  std::vector<double> sym(nb);
  for (std::size_t i = 0; i < nb; ++i) sym[i] = std::min(w.radii[i], w.radii[(nb - i) % nb]);
  w.radii = std::move(sym);
  return w;
}

// Ground speed from stride length, step frequency and duty factor.
inline double body_velocity(double stride_length, double step_frequency, double duty_factor)
{
  if (!(duty_factor > 0.0 && duty_factor < 1.0)) throw std::invalid_argument("duty factor must lie in (0,1)");
  if (!(stride_length >= 0.0)) throw std::invalid_argument("stride length must be >= 0");
  if (!(step_frequency > 0.0)) throw std::invalid_argument("step frequency must be > 0");
  return stride_length * step_frequency / duty_factor;
}

// Walking velocity command: planar linear (m/s) and yaw rate (rad/s).
struct PlanarVelocity
{
  double vx = 0.0;
  double vy = 0.0;
  double wz = 0.0;

  PlanarVelocity scaled(double s) const { return {vx * s, vy * s, wz * s}; }
  bool is_zero() const { return vx == 0.0 && vy == 0.0 && wz == 0.0; }
  bool operator==(const PlanarVelocity&) const = default;
};

// Stride for a leg whose default tip is `tip` (body frame): (v + w z x r) * beta / f.
inline Vec3 stride_for(const PlanarVelocity& v, const Vec3& tip, double step_frequency, double duty_factor)
{
  const double k = duty_factor / step_frequency;
  return Vec3((v.vx - v.wz * tip.y()) * k, (v.vy + v.wz * tip.x()) * k, 0.0);
}

// Uniformly scales v so that every leg's stride, centred on its default tip,
// stays inside the walkspace. Direction is preserved.
inline PlanarVelocity limit_velocity(const PlanarVelocity& v, const Walkspace& walkspace, double step_frequency,
                                     double duty_factor, const RobotSpec& robot)
{
  double scale = 1.0;
  for (const auto& leg : robot.legs) {
    const Vec3 s = stride_for(v, leg.default_tip, step_frequency, duty_factor);
    const double len = std::hypot(s.x(), s.y());
    if (len == 0.0) continue;
    const double theta = std::atan2(s.y(), s.x());
    const double half = std::min(walkspace.radius(theta), walkspace.radius(theta + kPi));
    const double allowed = 2.0 * half / len;
    if (allowed < scale) scale = allowed;
  }
  if (scale >= 1.0 - 1e-12) return v;
  return v.scaled(std::max(0.0, scale));
}

// Largest linear speed along `heading` (rad) that the walkspace admits.
inline double max_linear_speed(const Walkspace& walkspace, double heading, double step_frequency, double duty_factor,
                               const RobotSpec& robot)
{
  const PlanarVelocity probe{std::cos(heading) * 1e3, std::sin(heading) * 1e3, 0.0};
  const PlanarVelocity lim = limit_velocity(probe, walkspace, step_frequency, duty_factor, robot);
  return std::hypot(lim.vx, lim.vy);
}

inline double max_yaw_rate(const Walkspace& walkspace, double step_frequency, double duty_factor, const RobotSpec& robot)
{
  return limit_velocity({0, 0, 1e3}, walkspace, step_frequency, duty_factor, robot).wz;
}

// CSV: leg_id,height,bearing,radius with full precision.
inline std::string workspace_csv(const std::vector<WorkspacePolyhedron>& all)
{
  std::string out = "leg_id,height,bearing,radius,origin_x,origin_y,origin_z\n";
  char buf[256];
  for (const auto& ws : all)
    for (const auto& s : ws.slices)
      for (int i = 0; i < static_cast<int>(s.radii.size()); ++i) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", ws.leg_id, s.height,
                      bearing_of(i, static_cast<int>(s.radii.size())), s.radii[static_cast<std::size_t>(i)],
                      ws.origin.x(), ws.origin.y(), ws.origin.z());
        out += buf;
      }
  return out;
}

inline std::vector<WorkspacePolyhedron> parse_workspace_csv(const std::string& text)
{
  std::vector<WorkspacePolyhedron> out;
  std::istringstream in(text);
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    int id = 0;
    double h = 0, b = 0, r = 0, ox = 0, oy = 0, oz = 0;
    if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf,%lf,%lf", &id, &h, &b, &r, &ox, &oy, &oz) != 7)
      throw std::runtime_error("malformed workspace cache line: " + line);
    if (out.empty() || out.back().leg_id != id) {
      out.emplace_back();
      out.back().leg_id = id;
      out.back().origin = Vec3(ox, oy, oz);
    }
    auto& ws = out.back();
    if (ws.slices.empty() || ws.slices.back().height != h) ws.slices.push_back({h, {}});
    ws.slices.back().radii.push_back(r);
  }
  return out;
}

// Polygon vertices (x,y relative to the default tip) for plotting.
inline std::string walkspace_csv(const Walkspace& w, const Vec3& origin = Vec3::Zero())
{
  std::string out = "bearing,radius,x,y\n";
  char buf[160];
  const int n = w.bearings();
  for (int i = 0; i <= n; ++i) {
    const int k = i % n;
    const double a = bearing_of(k, n), r = w.radii[static_cast<std::size_t>(k)];
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%.17g\n", a, r, origin.x() + r * std::cos(a),
                  origin.y() + r * std::sin(a));
    out += buf;
  }
  return out;
}

// Returns cached workspaces when the cache file for this spec's hash exists,
// otherwise generates and writes them.
inline std::vector<WorkspacePolyhedron> load_or_generate_workspaces(const RobotSpec& robot,
                                                                    const std::filesystem::path& cache_dir,
                                                                    bool* cache_hit = nullptr)
{
  const auto file = cache_dir / ("workspace-" + spec_hash(robot) + ".csv");
  if (std::filesystem::exists(file)) {
    auto ws = parse_workspace_csv(read_text_file(file.string()));
    if (ws.size() == robot.legs.size()) {
      if (cache_hit) *cache_hit = true;
      return ws;
    }
  }
  if (cache_hit) *cache_hit = false;
  auto ws = generate_workspaces(robot);
  std::filesystem::create_directories(cache_dir);
  std::ofstream(file, std::ios::binary) << workspace_csv(ws);
  return ws;
}

}  // namespace hexgait
