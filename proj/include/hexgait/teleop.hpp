#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "hexgait/runner.hpp"

namespace hexgait::teleop {

using json = nlohmann::json;

constexpr int kProto = 1;

// ---------------------------------------------------------------------------
// Commands

enum class CommandType
{
  Velocity,
  PoseVelocity,
  GaitSelect,
  Mode,
  Legipulate,
  Params,
};

inline const char* to_string(CommandType t)
{
  switch (t) {
    case CommandType::Velocity: return "velocity";
    case CommandType::PoseVelocity: return "pose_velocity";
    case CommandType::GaitSelect: return "gait_select";
    case CommandType::Mode: return "mode";
    case CommandType::Legipulate: return "legipulate";
    case CommandType::Params: return "params";
  }
  return "?";
}

struct Command
{
  CommandType type = CommandType::Velocity;
  long long seq = 0;
  Vec3 linear = Vec3::Zero();   // m/s (velocity, pose_velocity)
  Vec3 angular = Vec3::Zero();  // rad/s
  std::string gait;
  std::string mode;             // packed | stance | legipulation
  int leg = 0;
  std::optional<Vec3> tip_velocity;  // m/s, body frame
  std::optional<Vec3> tip;           // m, body frame
  std::optional<double> step_frequency;
  std::optional<std::string> pose_source;
  std::optional<bool> inclination;
  std::optional<bool> walk_plane;
  std::optional<bool> admittance;
};

struct ProtocolError
{
  std::string code;  // parse | proto | type | field | non_finite | stale_seq | busy
  std::string message;
  std::optional<long long> seq;
};

namespace detail {

struct FieldError
{
  std::string code, message;
};

inline Vec3 read_vec3(const json& j, const char* key)
{
  if (!j.contains(key)) throw FieldError{"field", std::string("missing field '") + key + "'"};
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) throw FieldError{"field", std::string("'") + key + "' must be a 3-element array"};
  Vec3 out;
  for (int i = 0; i < 3; ++i) {
    if (!v[static_cast<std::size_t>(i)].is_number())
      throw FieldError{"field", std::string("'") + key + "' must contain numbers"};
    out[i] = v[static_cast<std::size_t>(i)].get<double>();
    if (!std::isfinite(out[i])) throw FieldError{"non_finite", std::string("'") + key + "' is not finite"};
  }
  return out;
}

inline void check_number(const json& v, const char* key)
{
  if (!v.is_number()) throw FieldError{"field", std::string("'") + key + "' must be a number"};
  if (!std::isfinite(v.get<double>())) throw FieldError{"non_finite", std::string("'") + key + "' is not finite"};
}

inline std::string read_string(const json& j, const char* key)
{
  if (!j.contains(key) || !j.at(key).is_string())
    throw FieldError{"field", std::string("'") + key + "' must be a string"};
  return j.at(key).get<std::string>();
}

}  // namespace detail

// Parses one client text frame. Non-finite numbers never pass.
inline std::variant<Command, ProtocolError> parse_command(const std::string& text)
{
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    return ProtocolError{"parse", e.what(), std::nullopt};
  } catch (const json::out_of_range& e) {
    // number literal overflows a double, e.g. 1e999
    return ProtocolError{"non_finite", e.what(), std::nullopt};
  } catch (const json::exception& e) {
    return ProtocolError{"parse", e.what(), std::nullopt};
  }
  if (!j.is_object()) return ProtocolError{"parse", "message must be a JSON object", std::nullopt};
  std::optional<long long> seq;
  if (j.contains("seq") && j["seq"].is_number_integer()) seq = j["seq"].get<long long>();
  if (!j.contains("proto") || !j["proto"].is_number_integer() || j["proto"].get<int>() != kProto)
    return ProtocolError{"proto", "unsupported proto version", seq};
  if (!seq) return ProtocolError{"field", "'seq' must be an integer", std::nullopt};
  Command c;
  c.seq = *seq;
  try {
    const std::string type = detail::read_string(j, "type");
    if (type == "velocity" || type == "pose_velocity") {
      c.type = type == "velocity" ? CommandType::Velocity : CommandType::PoseVelocity;
      c.linear = detail::read_vec3(j, "linear");
      c.angular = detail::read_vec3(j, "angular");
    } else if (type == "gait_select") {
      c.type = CommandType::GaitSelect;
      c.gait = detail::read_string(j, "gait");
    } else if (type == "mode") {
      c.type = CommandType::Mode;
      c.mode = detail::read_string(j, "mode");
      if (c.mode != "packed" && c.mode != "stance" && c.mode != "legipulation")
        throw detail::FieldError{"field", "unknown mode '" + c.mode + "'"};
      if (c.mode == "legipulation") {
        if (!j.contains("leg") || !j["leg"].is_number_integer())
          throw detail::FieldError{"field", "'leg' must be an integer"};
        c.leg = j["leg"].get<int>();
      }
    } else if (type == "legipulate") {
      c.type = CommandType::Legipulate;
      if (!j.contains("leg") || !j["leg"].is_number_integer()) throw detail::FieldError{"field", "'leg' must be an integer"};
      c.leg = j["leg"].get<int>();
      if (j.contains("tip_velocity")) c.tip_velocity = detail::read_vec3(j, "tip_velocity");
      if (j.contains("tip")) c.tip = detail::read_vec3(j, "tip");
      if (!c.tip_velocity == !c.tip) throw detail::FieldError{"field", "exactly one of 'tip_velocity' or 'tip' required"};
    } else if (type == "params") {
      c.type = CommandType::Params;
      if (j.contains("step_frequency")) {
        detail::check_number(j["step_frequency"], "step_frequency");
        c.step_frequency = j["step_frequency"].get<double>();
        if (!(*c.step_frequency > 0)) throw detail::FieldError{"field", "'step_frequency' must be > 0"};
      }
      if (j.contains("pose_source")) {
        c.pose_source = detail::read_string(j, "pose_source");
        if (*c.pose_source != "none" && *c.pose_source != "imu" && *c.pose_source != "auto")
          throw detail::FieldError{"field", "unknown pose_source '" + *c.pose_source + "'"};
      }
      auto flag = [&j](const char* key, std::optional<bool>& out) {
        if (!j.contains(key)) return;
        if (!j[key].is_boolean()) throw detail::FieldError{"field", std::string("'") + key + "' must be a boolean"};
        out = j[key].get<bool>();
      };
      flag("inclination", c.inclination);
      flag("walk_plane", c.walk_plane);
      flag("admittance", c.admittance);
    } else {
      return ProtocolError{"type", "unknown type '" + type + "'", seq};
    }
  } catch (const detail::FieldError& e) {
    return ProtocolError{e.code, e.message, seq};
  }
  return c;
}

inline json ack_message(long long seq)
{
  return {{"proto", kProto}, {"type", "ack"}, {"seq", seq}};
}

inline json error_message(const ProtocolError& e)
{
  json j = {{"proto", kProto}, {"type", "error"}, {"code", e.code}, {"message", e.message}};
  j["seq"] = e.seq ? json(*e.seq) : json(nullptr);
  return j;
}

// ---------------------------------------------------------------------------
// State

struct PoseMessage
{
  std::array<double, 3> position{};  // m
  std::array<double, 3> rpy{};       // rad

  bool operator==(const PoseMessage&) const = default;
};

struct LegState
{
  int id = 0;
  std::vector<double> joints;  // rad
  std::array<double, 3> tip{};     // m, body frame
  std::array<double, 3> stride{};  // m
  std::string phase;               // stance | swing
  double phase_progress = 0.0;
  bool contact = false;
  bool velocity_clamped = false;
  bool position_clamped = false;
  bool workspace_clamped = false;

  bool operator==(const LegState&) const = default;
};

struct StateMessage
{
  long long tick = 0;
  double time = 0.0;  // s
  std::string mode;
  std::string walk_state;
  std::string gait;
  double step_frequency = 0.0;  // Hz
  PoseMessage body;              // world frame
  std::map<std::string, PoseMessage> sub_poses;  // relative to the default body pose
  std::vector<LegState> legs;
  double power = 0.0;             // W
  double cost_of_transport = 0.0;
  std::array<double, 3> velocity_command{};   // vx m/s, vy m/s, wz rad/s
  std::array<double, 3> velocity_achieved{};
  bool airborne = false;

  bool operator==(const StateMessage&) const = default;
};

inline PoseMessage pose_message(const Transform& t)
{
  const Vec3 p = t.translation();
  const Vec3 r = to_rpy(t.linear());
  return {{p.x(), p.y(), p.z()}, {r.x(), r.y(), r.z()}};
}

inline void to_json(json& j, const PoseMessage& p)
{
  j = {{"position", p.position}, {"rpy", p.rpy}};
}

inline void from_json(const json& j, PoseMessage& p)
{
  j.at("position").get_to(p.position);
  j.at("rpy").get_to(p.rpy);
}

inline void to_json(json& j, const LegState& l)
{
  j = {{"id", l.id},
       {"joints", l.joints},
       {"tip", l.tip},
       {"stride", l.stride},
       {"phase", l.phase},
       {"phase_progress", l.phase_progress},
       {"contact", l.contact},
       {"clamps", {{"velocity", l.velocity_clamped}, {"position", l.position_clamped}, {"workspace", l.workspace_clamped}}}};
}

inline void from_json(const json& j, LegState& l)
{
  j.at("id").get_to(l.id);
  j.at("joints").get_to(l.joints);
  j.at("tip").get_to(l.tip);
  j.at("stride").get_to(l.stride);
  j.at("phase").get_to(l.phase);
  j.at("phase_progress").get_to(l.phase_progress);
  j.at("contact").get_to(l.contact);
  const json& c = j.at("clamps");
  c.at("velocity").get_to(l.velocity_clamped);
  c.at("position").get_to(l.position_clamped);
  c.at("workspace").get_to(l.workspace_clamped);
}

inline void to_json(json& j, const StateMessage& s)
{
  j = {{"proto", kProto},
       {"type", "state"},
       {"tick", s.tick},
       {"time", s.time},
       {"mode", s.mode},
       {"walk_state", s.walk_state},
       {"gait", s.gait},
       {"step_frequency", s.step_frequency},
       {"body", {{"world", s.body}, {"sub_poses", s.sub_poses}}},
       {"legs", s.legs},
       {"metrics",
        {{"power", s.power},
         {"cost_of_transport", s.cost_of_transport},
         {"velocity_command", s.velocity_command},
         {"velocity_achieved", s.velocity_achieved},
         {"airborne", s.airborne}}}};
}

inline void from_json(const json& j, StateMessage& s)
{
  if (j.at("proto").get<int>() != kProto || j.at("type").get<std::string>() != "state")
    throw std::invalid_argument("not a state message");
  j.at("tick").get_to(s.tick);
  j.at("time").get_to(s.time);
  j.at("mode").get_to(s.mode);
  j.at("walk_state").get_to(s.walk_state);
  j.at("gait").get_to(s.gait);
  j.at("step_frequency").get_to(s.step_frequency);
  j.at("body").at("world").get_to(s.body);
  j.at("body").at("sub_poses").get_to(s.sub_poses);
  j.at("legs").get_to(s.legs);
  const json& m = j.at("metrics");
  m.at("power").get_to(s.power);
  m.at("cost_of_transport").get_to(s.cost_of_transport);
  m.at("velocity_command").get_to(s.velocity_command);
  m.at("velocity_achieved").get_to(s.velocity_achieved);
  m.at("airborne").get_to(s.airborne);
}

inline StateMessage state_message(const Runner& runner)
{
  const Snapshot snap = runner.snapshot();
  const Controller& c = runner.controller();
  StateMessage s;
  s.tick = snap.tick;
  s.time = snap.time;
  s.mode = to_string(snap.mode);
  s.walk_state = to_string(snap.walk_state);
  s.gait = snap.gait;
  s.step_frequency = snap.step_frequency;
  s.body = pose_message(snap.body);
  const BodyPoseState& ps = c.pose().state();
  s.sub_poses = {{"manual", pose_message(ps.h_man)},
                 {"inclination", pose_message(ps.h_inc)},
                 {"alignment", pose_message(ps.h_ali)},
                 {"imu_auto", pose_message(ps.h_ai)},
                 {"walk_plane", pose_message(ps.walk)}};
  for (std::size_t i = 0; i < snap.legs.size(); ++i) {
    const LegStatus& st = snap.legs[i];
    const LegWalk& w = c.walk().legs()[i];
    LegState l;
    l.id = st.id;
    l.joints.assign(snap.joints[i].data(), snap.joints[i].data() + snap.joints[i].size());
    l.tip = {st.tip_target.x(), st.tip_target.y(), st.tip_target.z()};
    l.stride = {w.stride.x(), w.stride.y(), w.stride.z()};
    l.phase = w.manual ? "manual" : (w.phase.state == StepState::Stance ? "stance" : "swing");
    l.phase_progress = w.phase.t;
    l.contact = snap.contacts[i];
    l.velocity_clamped = st.velocity_clamped;
    l.position_clamped = st.position_clamped;
    l.workspace_clamped = st.workspace_clamped;
    s.legs.push_back(std::move(l));
  }
  s.power = snap.power;
  s.cost_of_transport = snap.cost_of_transport;
  s.velocity_command = {snap.velocity_command.vx, snap.velocity_command.vy, snap.velocity_command.wz};
  s.velocity_achieved = {snap.velocity.vx, snap.velocity.vy, snap.velocity.wz};
  s.airborne = snap.airborne;
  return s;
}

// Static payload sent once per connection.
inline json hello_message(const Runner& runner, double state_rate)
{
  const Controller& c = runner.controller();
  const RobotSpec& r = c.robot();
  json legs = json::array();
  for (const auto& leg : r.legs) {
    const Vec3 p = leg.base_frame.translation();
    const Vec3 rpy = to_rpy(leg.base_frame.linear());
    json joints = json::array();
    for (const auto& j : leg.joints)
      joints.push_back({{"name", j.joint.name}, {"min", j.joint.position_min}, {"max", j.joint.position_max}});
    legs.push_back({{"id", leg.id},
                    {"name", leg.name},
                    {"base", {{"position", {p.x(), p.y(), p.z()}}, {"rpy", {rpy.x(), rpy.y(), rpy.z()}}}},
                    {"default_tip", {leg.default_tip.x(), leg.default_tip.y(), leg.default_tip.z()}},
                    {"joints", joints}});
  }
  const Walkspace& ws = c.walk().walkspace();
  json polygons = json::array();
  for (const auto& leg : r.legs) {
    json pts = json::array();
    for (int i = 0; i < ws.bearings(); ++i) {
      const double b = bearing_of(i, ws.bearings());
      const double rad = ws.radii[static_cast<std::size_t>(i)];
      pts.push_back({leg.default_tip.x() + rad * std::cos(b), leg.default_tip.y() + rad * std::sin(b)});
    }
    polygons.push_back({{"leg", leg.id}, {"polygon", pts}});
  }
  json gaits = json::array();
  for (const auto& g : c.walk().gaits()) gaits.push_back(g.name);
  const double f = c.walk().step_frequency(), beta = c.walk().duty_factor();
  return {{"proto", kProto},
          {"type", "hello"},
          {"robot", {{"name", r.name}, {"mass", r.mass}, {"body_clearance", r.body_clearance}, {"legs", legs}}},
          {"tick_rate", 1.0 / c.dt()},
          {"state_rate", state_rate},
          {"gaits", gaits},
          {"walkspaces", polygons},
          {"limits",
           {{"max_linear_speed", max_linear_speed(ws, 0.0, f, beta, r)},
            {"max_lateral_speed", max_linear_speed(ws, kPi / 2, f, beta, r)},
            {"max_yaw_rate", max_yaw_rate(ws, f, beta, r)}}}};
}

// ---------------------------------------------------------------------------
// Sessions and mailboxes

// Bounded FIFO shared between one producer and one consumer context.
template <typename T>
class Mailbox
{
public:
  explicit Mailbox(std::size_t capacity) : capacity_(capacity) {}

  // Rejects the new item when full.
  bool try_push(T item)
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (items_.size() >= capacity_) return false;
    items_.push_back(std::move(item));
    return true;
  }

  // Evicts the oldest item when full; returns the number evicted.
  std::size_t push_drop_oldest(T item)
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::size_t dropped = 0;
    while (items_.size() >= capacity_) {
      items_.pop_front();
      ++dropped;
    }
    items_.push_back(std::move(item));
    return dropped;
  }

  std::deque<T> drain()
  {
    std::lock_guard<std::mutex> lock(mutex_);
    std::deque<T> out;
    out.swap(items_);
    return out;
  }

  std::optional<T> pop()
  {
    std::lock_guard<std::mutex> lock(mutex_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::size_t size() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return items_.size();
  }

private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::deque<T> items_;
};

struct Session
{
  explicit Session(int id, std::size_t backlog) : id(id), outbox(backlog) {}

  int id;
  long long last_seq = -1;  // written only by the session's intake context
  Mailbox<std::string> outbox;
  std::size_t dropped = 0;
};

struct ServiceOptions
{
  double state_rate = 20.0;         // Hz
  double deadman_timeout = 0.5;     // s without commands zeroes desired velocity
  std::size_t command_capacity = 256;
  std::size_t session_backlog = 64;
};

// Controller + sim behind the wire protocol. handle_* may be called from the
// network context; tick() only from the tick owner.
class Service
{
public:
  Service(Runner& runner, ServiceOptions options = {})
      : runner_(runner), options_(options), commands_(options.command_capacity)
  {
    const double rate = 1.0 / runner_.controller().dt();
    decimation_ = std::max(1LL, static_cast<long long>(std::llround(rate / options_.state_rate)));
    publish();
  }

  std::shared_ptr<Session> open_session()
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    auto s = std::make_shared<Session>(next_id_++, options_.session_backlog);
    sessions_[s->id] = s;
    return s;
  }

  void close_session(int id)
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    sessions_.erase(id);
  }

  std::size_t session_count() const
  {
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    return sessions_.size();
  }

  // Validates a client frame and queues it for the next tick; returns the reply.
  json handle_message(Session& session, const std::string& text)
  {
    auto parsed = parse_command(text);
    if (auto* e = std::get_if<ProtocolError>(&parsed)) return error_message(*e);
    Command c = std::get<Command>(parsed);
    if (c.seq <= session.last_seq)
      return error_message({"stale_seq", "sequence number not increasing", c.seq});
    if (c.type == CommandType::GaitSelect && !known_gait(c.gait))
      return error_message({"field", "unknown gait '" + c.gait + "'", c.seq});
    if ((c.type == CommandType::Legipulate || (c.type == CommandType::Mode && c.mode == "legipulation")) &&
        !known_leg(c.leg))
      return error_message({"field", "unknown leg " + std::to_string(c.leg), c.seq});
    if (!commands_.try_push(c)) return error_message({"busy", "command mailbox full", c.seq});
    session.last_seq = c.seq;
    return ack_message(c.seq);
  }

  json hello() const
  {
    std::lock_guard<std::mutex> lock(hello_mutex_);
    return hello_message(runner_, options_.state_rate);
  }

  // Latest published state, safe from any context.
  std::string latest_state() const
  {
    std::lock_guard<std::mutex> lock(latest_mutex_);
    return latest_;
  }

  // One controller tick: drain commands, dead-man, step, publish.
  std::size_t tick()
  {
    Controller& c = runner_.controller();
    for (auto& cmd : commands_.drain()) {
      last_command_tick_ = c.tick_count();
      apply(cmd);
    }
    const double silence = static_cast<double>(c.tick_count() - last_command_tick_) * c.dt();
    if (silence >= options_.deadman_timeout) {
      c.set_velocity({});
      c.set_pose_velocity({});
    }
    {
      std::lock_guard<std::mutex> lock(hello_mutex_);
      runner_.tick();
    }
    if (c.tick_count() % decimation_ == 0) return publish();
    return 0;
  }

  long long decimation() const { return decimation_; }
  const Runner& runner() const { return runner_; }
  const std::vector<std::string>& apply_errors() const { return apply_errors_; }

private:
  // Robot and gait library are fixed after construction.
  bool known_gait(const std::string& name) const
  {
    const auto& g = runner_.controller().walk().gaits();
    return std::any_of(g.begin(), g.end(), [&](const GaitSpec& s) { return s.name == name; });
  }

  bool known_leg(int id) const
  {
    const auto& legs = runner_.controller().robot().legs;
    return std::any_of(legs.begin(), legs.end(), [&](const LegSpec& l) { return l.id == id; });
  }

  void apply(const Command& cmd)
  {
    Controller& c = runner_.controller();
    try {
      switch (cmd.type) {
        case CommandType::Velocity:
          // Walking uses planar linear velocity and yaw rate; the rest is ignored.
          c.set_velocity({cmd.linear.x(), cmd.linear.y(), cmd.angular.z()});
          break;
        case CommandType::PoseVelocity:
          c.set_pose_velocity({cmd.linear.x(), cmd.linear.y(), cmd.linear.z(), cmd.angular.x(), cmd.angular.y(),
                               cmd.angular.z()});
          break;
        case CommandType::GaitSelect: c.request_gait(cmd.gait); break;
        case CommandType::Mode:
          if (cmd.mode == "packed") c.request_mode(Mode::Packed);
          else if (cmd.mode == "stance") c.request_mode(Mode::Stance);
          else c.begin_legipulation(cmd.leg);
          break;
        case CommandType::Legipulate:
          if (cmd.tip_velocity) c.legipulate_velocity(cmd.leg, *cmd.tip_velocity);
          if (cmd.tip) c.legipulate_tip(cmd.leg, *cmd.tip);
          break;
        case CommandType::Params:
          if (cmd.step_frequency) c.request_step_frequency(*cmd.step_frequency);
          if (cmd.pose_source)
            c.set_pose_source(*cmd.pose_source == "imu"    ? PoseSource::Imu
                              : *cmd.pose_source == "auto" ? PoseSource::Auto
                                                           : PoseSource::None);
          if (cmd.inclination) c.set_inclination(*cmd.inclination);
          if (cmd.walk_plane) c.set_walk_plane(*cmd.walk_plane);
          if (cmd.admittance) c.set_admittance(*cmd.admittance);
          break;
      }
    } catch (const std::exception& e) {
      // Rejected at apply time (unknown gait, unknown leg): the controller is untouched.
      if (apply_errors_.size() < 64) apply_errors_.push_back(e.what());
    }
  }

  std::size_t publish()
  {
    const std::string text = json(state_message(runner_)).dump();
    {
      std::lock_guard<std::mutex> lock(latest_mutex_);
      latest_ = text;
    }
    std::lock_guard<std::mutex> lock(sessions_mutex_);
    for (auto& [id, s] : sessions_) s->dropped += s->outbox.push_drop_oldest(text);
    return sessions_.size();
  }

  Runner& runner_;
  ServiceOptions options_;
  Mailbox<Command> commands_;
  long long decimation_ = 10;
  long long last_command_tick_ = 0;
  mutable std::mutex sessions_mutex_;
  std::map<int, std::shared_ptr<Session>> sessions_;
  int next_id_ = 1;
  mutable std::mutex latest_mutex_;
  mutable std::mutex hello_mutex_;
  std::string latest_;
  std::vector<std::string> apply_errors_;
};

}  // namespace hexgait::teleop
