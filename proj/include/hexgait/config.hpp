#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "hexgait/kinematics.hpp"
#include "hexgait/model.hpp"

namespace hexgait {

namespace detail {

inline std::string join_path(const std::string& base, const std::string& key)
{
  return base.empty() ? key : base + "." + key;
}

inline void check_keys(const YAML::Node& node, const std::string& path, std::initializer_list<const char*> allowed)
{
  if (!node.IsMap()) throw ConfigError(path, "expected a mapping");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (!ok.count(key)) throw ConfigError(join_path(path, key), "unknown field");
  }
}

template <typename T>
T read_scalar(const YAML::Node& node, const std::string& path)
{
  if (!node.IsScalar()) throw ConfigError(path, "expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ConfigError(path, "malformed value '" + node.Scalar() + "'");
  }
}

template <typename T>
T required(const YAML::Node& parent, const std::string& path, const char* key)
{
  const YAML::Node n = parent[key];
  if (!n) throw ConfigError(join_path(path, key), "missing required field");
  return read_scalar<T>(n, join_path(path, key));
}

template <typename T>
void optional(const YAML::Node& parent, const std::string& path, const char* key, T& out)
{
  const YAML::Node n = parent[key];
  if (n) out = read_scalar<T>(n, join_path(path, key));
}

inline std::vector<double> read_list(const YAML::Node& node, const std::string& path, std::size_t expected = 0)
{
  if (!node.IsSequence()) throw ConfigError(path, "expected a list");
  if (expected && node.size() != expected)
    throw ConfigError(path, "expected " + std::to_string(expected) + " values");
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) out.push_back(read_scalar<double>(node[i], index_path(path, i)));
  return out;
}

inline Vec3 read_vec3(const YAML::Node& node, const std::string& path)
{
  const auto v = read_list(node, path, 3);
  return {v[0], v[1], v[2]};
}

inline const char* kPoseAxes[6] = {"x", "y", "z", "roll", "pitch", "yaw"};

inline JointLink parse_joint(const YAML::Node& n, const std::string& path)
{
  check_keys(n, path, {"name", "dh", "position_min", "position_max", "velocity_max", "jla_weight", "home", "packed"});
  JointLink link;
  link.joint.name = required<std::string>(n, path, "name");
  const YAML::Node dh = n["dh"];
  if (!dh) throw ConfigError(path + ".dh", "missing required field");
  const std::string dp = path + ".dh";
  check_keys(dh, dp, {"theta", "d", "a", "alpha", "type"});
  link.dh.theta = required<double>(dh, dp, "theta");
  link.dh.d = required<double>(dh, dp, "d");
  link.dh.a = required<double>(dh, dp, "a");
  link.dh.alpha = required<double>(dh, dp, "alpha");
  std::string type = "revolute";
  optional(dh, dp, "type", type);
  if (type == "revolute")
    link.dh.type = JointType::Revolute;
  else if (type == "prismatic")
    link.dh.type = JointType::Prismatic;
  else
    throw ConfigError(dp + ".type", "expected revolute or prismatic");
  link.joint.position_min = required<double>(n, path, "position_min");
  link.joint.position_max = required<double>(n, path, "position_max");
  link.joint.velocity_max = required<double>(n, path, "velocity_max");
  optional(n, path, "jla_weight", link.joint.jla_weight);
  link.joint.home_angle = 0.0;
  optional(n, path, "home", link.joint.home_angle);
  link.joint.packed_angle = link.joint.home_angle;
  optional(n, path, "packed", link.joint.packed_angle);
  return link;
}

inline LegSpec parse_leg(const YAML::Node& n, const std::string& path)
{
  check_keys(n, path, {"id", "name", "base", "joints", "default_tip", "tip_direction"});
  LegSpec leg;
  leg.id = required<int>(n, path, "id");
  optional(n, path, "name", leg.name);
  if (const YAML::Node base = n["base"]) {
    const std::string bp = path + ".base";
    check_keys(base, bp, {"xyz", "rpy"});
    Vec3 xyz = Vec3::Zero(), rpy = Vec3::Zero();
    if (base["xyz"]) xyz = read_vec3(base["xyz"], bp + ".xyz");
    if (base["rpy"]) rpy = read_vec3(base["rpy"], bp + ".rpy");
    leg.base_frame = make_transform(xyz, rotation_rpy(rpy[0], rpy[1], rpy[2]));
  }
  const YAML::Node joints = n["joints"];
  if (!joints) throw ConfigError(path + ".joints", "missing required field");
  if (!joints.IsSequence()) throw ConfigError(path + ".joints", "expected a list");
  for (std::size_t i = 0; i < joints.size(); ++i) leg.joints.push_back(parse_joint(joints[i], index_path(path + ".joints", i)));
  if (const YAML::Node dir = n["tip_direction"]) leg.tip_direction = read_vec3(dir, path + ".tip_direction");
  if (const YAML::Node tip = n["default_tip"]) {
    leg.default_tip = read_vec3(tip, path + ".default_tip");
  } else if (!leg.joints.empty() && leg.joints.size() <= static_cast<std::size_t>(kMaxJoints)) {
    leg.default_tip = tip_in_body(leg, leg.home());
  }
  return leg;
}

inline void parse_pose_limits(const YAML::Node& n, const std::string& path, PoseLimits& out)
{
  check_keys(n, path, {"x", "y", "z", "roll", "pitch", "yaw"});
  for (int i = 0; i < 6; ++i) optional(n, path, kPoseAxes[i], out[static_cast<std::size_t>(i)]);
}

inline SequenceSpec parse_sequence(const std::string& name, const YAML::Node& n, const std::string& path)
{
  SequenceSpec seq;
  seq.name = name;
  check_keys(n, path, {"keyframes"});
  const YAML::Node kfs = n["keyframes"];
  if (!kfs || !kfs.IsSequence()) throw ConfigError(path + ".keyframes", "expected a list");
  for (std::size_t k = 0; k < kfs.size(); ++k) {
    const std::string kp = index_path(path + ".keyframes", k);
    check_keys(kfs[k], kp, {"duration", "targets"});
    Keyframe kf;
    kf.duration = required<double>(kfs[k], kp, "duration");
    const YAML::Node targets = kfs[k]["targets"];
    if (!targets || !targets.IsSequence()) throw ConfigError(kp + ".targets", "expected a list per leg");
    for (std::size_t l = 0; l < targets.size(); ++l) kf.targets.push_back(read_list(targets[l], index_path(kp + ".targets", l)));
    seq.keyframes.push_back(std::move(kf));
  }
  return seq;
}

inline YAML::Node load_document(const std::string& text)
{
  try {
    return YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError("", std::string("parse error: ") + e.what());
  }
}

}  // namespace detail

// Parses and validates a robot description document (YAML, radians and metres).
inline RobotSpec load_robot_spec(const std::string& text)
{
  using namespace detail;
  const YAML::Node root = load_document(text);
  if (!root.IsMap()) throw ConfigError("", "parse error: robot document must be a mapping");
  check_keys(root, "",
             {"name", "mass", "body_clearance", "step_clearance", "step_frequency", "max_manual_pose", "imu_pid",
              "admittance", "jla", "ik_lambda", "swing_width", "swing_depth", "max_acceleration", "workspace",
              "touchdown", "power", "auto_pose", "default_gait", "legs", "sequences"});
  RobotSpec r;
  r.name = required<std::string>(root, "", "name");
  r.mass = required<double>(root, "", "mass");
  r.body_clearance = required<double>(root, "", "body_clearance");
  r.step_clearance = required<double>(root, "", "step_clearance");
  r.step_frequency = required<double>(root, "", "step_frequency");
  optional(root, "", "ik_lambda", r.ik_lambda);
  optional(root, "", "swing_width", r.swing_width);
  optional(root, "", "swing_depth", r.swing_depth);
  optional(root, "", "max_acceleration", r.max_acceleration);
  optional(root, "", "default_gait", r.default_gait);
  if (const auto n = root["max_manual_pose"]) parse_pose_limits(n, "max_manual_pose", r.max_manual_pose);
  if (const auto n = root["imu_pid"]) {
    check_keys(n, "imu_pid", {"kp", "ki", "kd", "output_limit", "integral_limit", "derivative_filter"});
    optional(n, "imu_pid", "kp", r.imu_pid.kp);
    optional(n, "imu_pid", "ki", r.imu_pid.ki);
    optional(n, "imu_pid", "kd", r.imu_pid.kd);
    optional(n, "imu_pid", "output_limit", r.imu_pid.output_limit);
    optional(n, "imu_pid", "integral_limit", r.imu_pid.integral_limit);
    optional(n, "imu_pid", "derivative_filter", r.imu_pid.derivative_filter);
  }
  if (const auto n = root["admittance"]) {
    check_keys(n, "admittance", {"enabled", "virtual_mass", "virtual_damping", "virtual_stiffness"});
    optional(n, "admittance", "enabled", r.admittance.enabled);
    optional(n, "admittance", "virtual_mass", r.admittance.virtual_mass);
    optional(n, "admittance", "virtual_damping", r.admittance.virtual_damping);
    optional(n, "admittance", "virtual_stiffness", r.admittance.virtual_stiffness);
  }
  if (const auto n = root["jla"]) {
    check_keys(n, "jla", {"p", "position_weight", "velocity_weight", "gradient_cap"});
    optional(n, "jla", "p", r.jla.p);
    optional(n, "jla", "position_weight", r.jla.position_weight);
    optional(n, "jla", "velocity_weight", r.jla.velocity_weight);
    optional(n, "jla", "gradient_cap", r.jla.gradient_cap);
  }
  if (const auto n = root["workspace"]) {
    const std::string p = "workspace";
    check_keys(n, p,
               {"height_min", "height_max", "height_step", "bearing_step", "radial_step", "tip_tolerance",
                "max_radius"});
    optional(n, p, "height_min", r.workspace.height_min);
    optional(n, p, "height_max", r.workspace.height_max);
    optional(n, p, "height_step", r.workspace.height_step);
    optional(n, p, "bearing_step", r.workspace.bearing_step);
    optional(n, p, "radial_step", r.workspace.radial_step);
    optional(n, p, "tip_tolerance", r.workspace.tip_tolerance);
    optional(n, p, "max_radius", r.workspace.max_radius);
  }
  if (const auto n = root["touchdown"]) {
    check_keys(n, "touchdown", {"force_threshold", "ticks", "release_ratio"});
    optional(n, "touchdown", "force_threshold", r.touchdown.force_threshold);
    optional(n, "touchdown", "ticks", r.touchdown.ticks);
    optional(n, "touchdown", "release_ratio", r.touchdown.release_ratio);
  }
  if (const auto n = root["power"]) {
    check_keys(n, "power", {"idle", "holding", "mechanical", "joint_viscous"});
    optional(n, "power", "idle", r.power.idle);
    optional(n, "power", "holding", r.power.holding);
    optional(n, "power", "mechanical", r.power.mechanical);
    optional(n, "power", "joint_viscous", r.power.joint_viscous);
  }
  if (const auto n = root["auto_pose"]) {
    check_keys(n, "auto_pose", {"period_cycles", "x", "y", "z", "roll", "pitch", "yaw"});
    optional(n, "auto_pose", "period_cycles", r.auto_pose.period_cycles);
    for (int i = 0; i < 6; ++i) {
      if (const auto a = n[kPoseAxes[i]]) {
        const std::string ap = std::string("auto_pose.") + kPoseAxes[i];
        check_keys(a, ap, {"amplitude", "phase"});
        optional(a, ap, "amplitude", r.auto_pose.axes[static_cast<std::size_t>(i)].amplitude);
        optional(a, ap, "phase", r.auto_pose.axes[static_cast<std::size_t>(i)].phase);
      }
    }
  }
  const YAML::Node legs = root["legs"];
  if (!legs) throw ConfigError("legs", "missing required field");
  if (!legs.IsSequence()) throw ConfigError("legs", "expected a list");
  if (legs.size() > static_cast<std::size_t>(kMaxLegs)) throw ConfigError("legs", "leg count exceeds 8");
  for (std::size_t i = 0; i < legs.size(); ++i) r.legs.push_back(parse_leg(legs[i], index_path("legs", i)));
  if (const auto seqs = root["sequences"]) {
    if (!seqs.IsMap()) throw ConfigError("sequences", "expected a mapping");
    for (const auto& kv : seqs) {
      const auto name = kv.first.as<std::string>();
      r.sequences[name] = parse_sequence(name, kv.second, "sequences." + name);
    }
  }
  validate(r);
  return r;
}

// Canonical text form; every field is written, so load(serialize(r)) == r.
inline std::string serialize_robot_spec(const RobotSpec& r)
{
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out.SetFloatPrecision(17);
  auto vec = [&out](const Vec3& v) {
    out << YAML::Flow << YAML::BeginSeq << v[0] << v[1] << v[2] << YAML::EndSeq;
  };
  out << YAML::BeginMap;
  out << YAML::Key << "name" << YAML::Value << r.name;
  out << YAML::Key << "mass" << YAML::Value << r.mass;
  out << YAML::Key << "body_clearance" << YAML::Value << r.body_clearance;
  out << YAML::Key << "step_clearance" << YAML::Value << r.step_clearance;
  out << YAML::Key << "step_frequency" << YAML::Value << r.step_frequency;
  out << YAML::Key << "ik_lambda" << YAML::Value << r.ik_lambda;
  out << YAML::Key << "swing_width" << YAML::Value << r.swing_width;
  out << YAML::Key << "swing_depth" << YAML::Value << r.swing_depth;
  out << YAML::Key << "max_acceleration" << YAML::Value << r.max_acceleration;
  out << YAML::Key << "default_gait" << YAML::Value << r.default_gait;
  out << YAML::Key << "max_manual_pose" << YAML::Value << YAML::BeginMap;
  for (int i = 0; i < 6; ++i)
    out << YAML::Key << detail::kPoseAxes[i] << YAML::Value << r.max_manual_pose[static_cast<std::size_t>(i)];
  out << YAML::EndMap;
  out << YAML::Key << "imu_pid" << YAML::Value << YAML::BeginMap << YAML::Key << "kp" << YAML::Value << r.imu_pid.kp
      << YAML::Key << "ki" << YAML::Value << r.imu_pid.ki << YAML::Key << "kd" << YAML::Value << r.imu_pid.kd
      << YAML::Key << "output_limit" << YAML::Value << r.imu_pid.output_limit << YAML::Key << "integral_limit"
      << YAML::Value << r.imu_pid.integral_limit << YAML::Key << "derivative_filter" << YAML::Value
      << r.imu_pid.derivative_filter << YAML::EndMap;
  out << YAML::Key << "admittance" << YAML::Value << YAML::BeginMap << YAML::Key << "enabled" << YAML::Value
      << r.admittance.enabled << YAML::Key << "virtual_mass" << YAML::Value << r.admittance.virtual_mass << YAML::Key
      << "virtual_damping" << YAML::Value << r.admittance.virtual_damping << YAML::Key << "virtual_stiffness"
      << YAML::Value << r.admittance.virtual_stiffness << YAML::EndMap;
  out << YAML::Key << "jla" << YAML::Value << YAML::BeginMap << YAML::Key << "p" << YAML::Value << r.jla.p
      << YAML::Key << "position_weight" << YAML::Value << r.jla.position_weight << YAML::Key << "velocity_weight"
      << YAML::Value << r.jla.velocity_weight << YAML::Key << "gradient_cap" << YAML::Value << r.jla.gradient_cap
      << YAML::EndMap;
  const auto& ws = r.workspace;
  out << YAML::Key << "workspace" << YAML::Value << YAML::BeginMap << YAML::Key << "height_min" << YAML::Value
      << ws.height_min << YAML::Key << "height_max" << YAML::Value << ws.height_max << YAML::Key << "height_step"
      << YAML::Value << ws.height_step << YAML::Key << "bearing_step" << YAML::Value << ws.bearing_step << YAML::Key
      << "radial_step" << YAML::Value << ws.radial_step << YAML::Key << "tip_tolerance" << YAML::Value
      << ws.tip_tolerance << YAML::Key << "max_radius" << YAML::Value << ws.max_radius << YAML::EndMap;
  out << YAML::Key << "touchdown" << YAML::Value << YAML::BeginMap << YAML::Key << "force_threshold" << YAML::Value
      << r.touchdown.force_threshold << YAML::Key << "ticks" << YAML::Value << r.touchdown.ticks << YAML::Key
      << "release_ratio" << YAML::Value << r.touchdown.release_ratio << YAML::EndMap;
  out << YAML::Key << "power" << YAML::Value << YAML::BeginMap << YAML::Key << "idle" << YAML::Value << r.power.idle
      << YAML::Key << "holding" << YAML::Value << r.power.holding << YAML::Key << "mechanical" << YAML::Value
      << r.power.mechanical << YAML::Key << "joint_viscous" << YAML::Value << r.power.joint_viscous << YAML::EndMap;
  out << YAML::Key << "auto_pose" << YAML::Value << YAML::BeginMap << YAML::Key << "period_cycles" << YAML::Value
      << r.auto_pose.period_cycles;
  for (int i = 0; i < 6; ++i) {
    const auto& a = r.auto_pose.axes[static_cast<std::size_t>(i)];
    out << YAML::Key << detail::kPoseAxes[i] << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key
        << "amplitude" << YAML::Value << a.amplitude << YAML::Key << "phase" << YAML::Value << a.phase
        << YAML::EndMap;
  }
  out << YAML::EndMap;

  out << YAML::Key << "legs" << YAML::Value << YAML::BeginSeq;
  for (const auto& leg : r.legs) {
    out << YAML::BeginMap << YAML::Key << "id" << YAML::Value << leg.id << YAML::Key << "name" << YAML::Value
        << leg.name;
    out << YAML::Key << "base" << YAML::Value << YAML::BeginMap << YAML::Key << "xyz" << YAML::Value;
    vec(leg.base_frame.translation());
    out << YAML::Key << "rpy" << YAML::Value;
    vec(to_rpy(leg.base_frame.linear()));
    out << YAML::EndMap;
    out << YAML::Key << "default_tip" << YAML::Value;
    vec(leg.default_tip);
    if (leg.tip_direction) {
      out << YAML::Key << "tip_direction" << YAML::Value;
      vec(*leg.tip_direction);
    }
    out << YAML::Key << "joints" << YAML::Value << YAML::BeginSeq;
    for (const auto& j : leg.joints) {
      out << YAML::BeginMap << YAML::Key << "name" << YAML::Value << j.joint.name;
      out << YAML::Key << "dh" << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "theta" << YAML::Value
          << j.dh.theta << YAML::Key << "d" << YAML::Value << j.dh.d << YAML::Key << "a" << YAML::Value << j.dh.a
          << YAML::Key << "alpha" << YAML::Value << j.dh.alpha << YAML::Key << "type" << YAML::Value
          << (j.dh.type == JointType::Revolute ? "revolute" : "prismatic") << YAML::EndMap;
      out << YAML::Key << "position_min" << YAML::Value << j.joint.position_min << YAML::Key << "position_max"
          << YAML::Value << j.joint.position_max << YAML::Key << "velocity_max" << YAML::Value
          << j.joint.velocity_max << YAML::Key << "jla_weight" << YAML::Value << j.joint.jla_weight << YAML::Key
          << "home" << YAML::Value << j.joint.home_angle << YAML::Key << "packed" << YAML::Value
          << j.joint.packed_angle << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndSeq;

  out << YAML::Key << "sequences" << YAML::Value << YAML::BeginMap;
  for (const auto& [name, seq] : r.sequences) {
    out << YAML::Key << name << YAML::Value << YAML::BeginMap << YAML::Key << "keyframes" << YAML::Value
        << YAML::BeginSeq;
    for (const auto& kf : seq.keyframes) {
      out << YAML::BeginMap << YAML::Key << "duration" << YAML::Value << kf.duration << YAML::Key << "targets"
          << YAML::Value << YAML::BeginSeq;
      for (const auto& t : kf.targets) out << YAML::Flow << t;
      out << YAML::EndSeq << YAML::EndMap;
    }
    out << YAML::EndSeq << YAML::EndMap;
  }
  out << YAML::EndMap;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

inline std::vector<GaitSpec> load_gait_library(const std::string& text)
{
  using namespace detail;
  const YAML::Node root = load_document(text);
  if (!root.IsMap()) throw ConfigError("", "parse error: gait document must be a mapping");
  check_keys(root, "", {"gaits"});
  const YAML::Node gaits = root["gaits"];
  if (!gaits || !gaits.IsMap()) throw ConfigError("gaits", "expected a mapping of gait name to definition");
  std::vector<GaitSpec> out;
  for (const auto& kv : gaits) {
    GaitSpec g;
    g.name = kv.first.as<std::string>();
    const std::string p = "gaits." + g.name;
    check_keys(kv.second, p, {"stance_phase", "swing_phase", "phase_offset", "offset_multiplier"});
    g.stance_phase = required<int>(kv.second, p, "stance_phase");
    g.swing_phase = required<int>(kv.second, p, "swing_phase");
    g.phase_offset = required<int>(kv.second, p, "phase_offset");
    const YAML::Node m = kv.second["offset_multiplier"];
    if (!m || !m.IsSequence()) throw ConfigError(p + ".offset_multiplier", "expected a list");
    for (std::size_t i = 0; i < m.size(); ++i)
      g.offset_multiplier.push_back(read_scalar<int>(m[i], index_path(p + ".offset_multiplier", i)));
    validate(g, p);
    out.push_back(std::move(g));
  }
  if (out.empty()) throw ConfigError("gaits", "at least one gait required");
  return out;
}

inline std::string serialize_gait_library(const std::vector<GaitSpec>& gaits)
{
  YAML::Emitter out;
  out << YAML::BeginMap << YAML::Key << "gaits" << YAML::Value << YAML::BeginMap;
  for (const auto& g : gaits) {
    out << YAML::Key << g.name << YAML::Value << YAML::Flow << YAML::BeginMap << YAML::Key << "stance_phase"
        << YAML::Value << g.stance_phase << YAML::Key << "swing_phase" << YAML::Value << g.swing_phase << YAML::Key
        << "phase_offset" << YAML::Value << g.phase_offset << YAML::Key << "offset_multiplier" << YAML::Value
        << YAML::Flow << g.offset_multiplier << YAML::EndMap;
  }
  out << YAML::EndMap << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

// Hexapod gait library (legs numbered clockwise from front right).
inline const char* default_gait_library_text()
{
  return R"(gaits:
  wave:   {stance_phase: 10, swing_phase: 2, phase_offset: 2, offset_multiplier: [2, 3, 4, 1, 0, 5]}
  amble:  {stance_phase: 2, swing_phase: 1, phase_offset: 1, offset_multiplier: [0, 1, 2, 0, 2, 1]}
  ripple: {stance_phase: 4, swing_phase: 2, phase_offset: 1, offset_multiplier: [4, 2, 0, 3, 5, 1]}
  tripod: {stance_phase: 2, swing_phase: 2, phase_offset: 2, offset_multiplier: [0, 1, 0, 1, 0, 1]}
  bipod:  {stance_phase: 1, swing_phase: 2, phase_offset: 1, offset_multiplier: [0, 1, 2, 0, 1, 2]}
)";
}

inline std::vector<GaitSpec> default_gait_library()
{
  return load_gait_library(default_gait_library_text());
}

inline std::string read_text_file(const std::string& path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RobotSpec load_robot_spec_file(const std::string& path)
{
  return load_robot_spec(read_text_file(path));
}

inline std::vector<GaitSpec> load_gait_library_file(const std::string& path)
{
  return load_gait_library(read_text_file(path));
}

// FNV-1a over the canonical serialization; used to key cached workspaces.
inline std::string spec_hash(const RobotSpec& r)
{
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : serialize_robot_spec(r)) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace hexgait
