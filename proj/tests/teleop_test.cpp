#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <thread>

#include <gtest/gtest.h>

#include "hexgait/hexgait.hpp"
#include "hexgait/teleop_server.hpp"

#include "harness.hpp"
#include "oracles.hpp"
#include "ws_client.hpp"

using namespace hexgait;
using json = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const RobotSpec& hexapod()
{
  static const RobotSpec r = oracle::robot("hexapod_3dof");
  return r;
}

std::string error_code(const std::string& text)
{
  const auto r = teleop::parse_command(text);
  if (const auto* e = std::get_if<teleop::ProtocolError>(&r)) return e->code;
  return "ok";
}

json velocity(long long seq, double vx)
{
  return {{"proto", 1}, {"type", "velocity"}, {"seq", seq}, {"linear", {vx, 0.0, 0.0}}, {"angular", {0.0, 0.0, 0.0}}};
}

struct Fixture
{
  Runner runner{hexapod(), default_gait_library(), harness::workspaces(hexapod())};
  teleop::Service service{runner};
};

// ---------------------------------------------------------------------------
// CLI helpers

fs::path scratch(const std::string& name)
{
  const fs::path p = fs::temp_directory_path() / ("hexgait_teleop_test_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int cli(const std::string& args)
{
  const std::string cmd = std::string(HEXGAIT_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string config(const std::string& name)
{
  return std::string(HEXGAIT_CONFIG_DIR) + "/" + name;
}

std::string slurp(const fs::path& p)
{
  std::ifstream f(p, std::ios::binary);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Checks required keys, const/enum values and basic types, following $ref.
void conforms(const json& root, const json& schema, const json& value, const std::string& path)
{
  if (schema.contains("$ref")) {
    const std::string ref = schema["$ref"].get<std::string>();
    return conforms(root, root["$defs"][ref.substr(ref.rfind('/') + 1)], value, path);
  }
  if (schema.contains("allOf"))
    for (const auto& s : schema["allOf"]) conforms(root, s, value, path);
  if (schema.contains("const")) EXPECT_EQ(value, schema["const"]) << path;
  if (schema.contains("enum"))
    EXPECT_NE(std::find(schema["enum"].begin(), schema["enum"].end(), value), schema["enum"].end()) << path << " " << value;
  if (schema.contains("type") && schema["type"].is_string()) {
    const std::string t = schema["type"];
    if (t == "object") EXPECT_TRUE(value.is_object()) << path;
    if (t == "array") EXPECT_TRUE(value.is_array()) << path;
    if (t == "number") EXPECT_TRUE(value.is_number()) << path;
    if (t == "integer") EXPECT_TRUE(value.is_number_integer()) << path;
    if (t == "string") EXPECT_TRUE(value.is_string()) << path;
    if (t == "boolean") EXPECT_TRUE(value.is_boolean()) << path;
  }
  if (schema.contains("required"))
    for (const auto& k : schema["required"]) EXPECT_TRUE(value.contains(k.get<std::string>())) << path << "." << k;
  if (value.is_object()) {
    for (const auto& [k, v] : value.items()) {
      if (schema.contains("properties") && schema["properties"].contains(k))
        conforms(root, schema["properties"][k], v, path + "." + k);
      else if (schema.contains("additionalProperties") && schema["additionalProperties"].is_object())
        conforms(root, schema["additionalProperties"], v, path + "." + k);
    }
  }
  if (value.is_array() && schema.contains("items"))
    for (std::size_t i = 0; i < value.size(); ++i) conforms(root, schema["items"], value[i], path + "[" + std::to_string(i) + "]");
}

json protocol_schema()
{
  return json::parse(slurp(fs::path(HEXGAIT_CONFIG_DIR) / ".." / "docs" / "protocol.schema.json"));
}

}  // namespace

// ---------------------------------------------------------------------------
// Command parsing

TEST(Parse, AcceptsEveryCommandType)
{
  EXPECT_EQ(error_code(velocity(1, 0.1).dump()), "ok");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"pose_velocity","seq":2,"linear":[0,0,0.01],"angular":[0,0.1,0]})"), "ok");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"gait_select","seq":3,"gait":"wave"})"), "ok");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"mode","seq":4,"mode":"legipulation","leg":2})"), "ok");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"legipulate","seq":5,"leg":2,"tip":[0.2,0.1,-0.1]})"), "ok");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"params","seq":6,"step_frequency":1.5,"admittance":true})"), "ok");
}

TEST(Parse, ErrorCodes)
{
  EXPECT_EQ(error_code("{not json"), "parse");
  EXPECT_EQ(error_code("[1,2,3]"), "parse");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"velocity","seq":1,"linear":[NaN,0,0],"angular":[0,0,0]})"), "parse");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"velocity","seq":1,"linear":[1e999,0,0],"angular":[0,0,0]})"), "non_finite");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"params","seq":1,"step_frequency":-1e999})"), "non_finite");
  EXPECT_EQ(error_code(R"({"proto":2,"type":"velocity","seq":1})"), "proto");
  EXPECT_EQ(error_code(R"({"type":"velocity","seq":1})"), "proto");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"dance","seq":1})"), "type");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"velocity","linear":[0,0,0],"angular":[0,0,0]})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"velocity","seq":1,"linear":[0,0],"angular":[0,0,0]})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"velocity","seq":1,"linear":["a",0,0],"angular":[0,0,0]})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"mode","seq":1,"mode":"flying"})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"legipulate","seq":1,"leg":1})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"legipulate","seq":1,"leg":1,"tip":[0,0,0],"tip_velocity":[0,0,0]})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"params","seq":1,"step_frequency":0})"), "field");
  EXPECT_EQ(error_code(R"({"proto":1,"type":"params","seq":1,"walk_plane":"yes"})"), "field");
}

TEST(Parse, ErrorEchoesSeq)
{
  const auto r = teleop::parse_command(R"({"proto":1,"type":"dance","seq":41})");
  const json e = teleop::error_message(std::get<teleop::ProtocolError>(r));
  EXPECT_EQ(e["type"], "error");
  EXPECT_EQ(e["seq"], 41);
  EXPECT_EQ(e["code"], "type");
  EXPECT_TRUE(teleop::error_message({"parse", "x", std::nullopt})["seq"].is_null());
}

// ---------------------------------------------------------------------------
// Service

TEST(Service, AcksAndRejects)
{
  Fixture f;
  auto s = f.service.open_session();
  EXPECT_EQ(f.service.handle_message(*s, velocity(1, 0.1).dump())["type"], "ack");
  EXPECT_EQ(f.service.handle_message(*s, velocity(1, 0.1).dump())["code"], "stale_seq");
  EXPECT_EQ(f.service.handle_message(*s, velocity(0, 0.1).dump())["code"], "stale_seq");
  EXPECT_EQ(f.service.handle_message(*s, R"({"proto":1,"type":"gait_select","seq":5,"gait":"gallop"})")["code"], "field");
  EXPECT_EQ(f.service.handle_message(*s, R"({"proto":1,"type":"legipulate","seq":6,"leg":7,"tip":[0,0,0]})")["code"], "field");
  EXPECT_EQ(f.service.handle_message(*s, R"({"proto":1,"type":"mode","seq":7,"mode":"legipulation","leg":0})")["code"], "field");
  // a rejected seq is not consumed
  EXPECT_EQ(f.service.handle_message(*s, velocity(5, 0.1).dump())["type"], "ack");

  // sequence numbers are per session
  auto other = f.service.open_session();
  EXPECT_EQ(f.service.handle_message(*other, velocity(1, 0.1).dump())["type"], "ack");
}

TEST(Service, BusyWhenMailboxFull)
{
  Runner runner(hexapod(), default_gait_library(), harness::workspaces(hexapod()));
  teleop::ServiceOptions o;
  o.command_capacity = 3;
  teleop::Service service(runner, o);
  auto s = service.open_session();
  for (int k = 1; k <= 3; ++k) EXPECT_EQ(service.handle_message(*s, velocity(k, 0.1).dump())["type"], "ack");
  EXPECT_EQ(service.handle_message(*s, velocity(4, 0.1).dump())["code"], "busy");
  service.tick();
  EXPECT_EQ(service.handle_message(*s, velocity(4, 0.1).dump())["type"], "ack");
}

TEST(Service, PublishesEveryDecimatedTick)
{
  Fixture f;
  EXPECT_EQ(f.service.decimation(), 10);
  for (int k = 0; k < 30; ++k) EXPECT_EQ(f.service.tick(), 0u);  // no sessions
  auto a = f.service.open_session();
  auto b = f.service.open_session();
  int published = 0;
  for (int k = 0; k < 100; ++k) {
    const std::size_t n = f.service.tick();
    if (n > 0) {
      EXPECT_EQ(n, 2u);
      EXPECT_EQ(f.runner.controller().tick_count() % 10, 0);
      ++published;
    }
  }
  EXPECT_EQ(published, 10);
  EXPECT_EQ(a->outbox.size(), 10u);
  f.service.close_session(b->id);
  EXPECT_EQ(f.service.session_count(), 1u);
  const json last = json::parse(f.service.latest_state());
  EXPECT_EQ(last["tick"], f.runner.controller().tick_count());
}

TEST(Service, SlowSessionKeepsNewestStates)
{
  Runner runner(hexapod(), default_gait_library(), harness::workspaces(hexapod()));
  teleop::ServiceOptions o;
  o.session_backlog = 4;
  teleop::Service service(runner, o);
  auto s = service.open_session();
  for (int k = 0; k < 100; ++k) service.tick();
  EXPECT_EQ(s->outbox.size(), 4u);
  EXPECT_EQ(s->dropped, 6u);
  const auto kept = s->outbox.drain();
  EXPECT_EQ(json::parse(kept.back())["tick"], 100);
  EXPECT_EQ(json::parse(kept.front())["tick"], 70);
}

TEST(Service, DeadManZeroesVelocity)
{
  Fixture f;
  auto s = f.service.open_session();
  f.service.handle_message(*s, velocity(1, 0.1).dump());
  f.service.tick();
  EXPECT_DOUBLE_EQ(f.runner.controller().walk().desired_velocity().vx, 0.1);
  const int limit = static_cast<int>(std::ceil(0.5 / f.runner.controller().dt()));
  for (int k = 1; k < limit; ++k) f.service.tick();
  EXPECT_DOUBLE_EQ(f.runner.controller().walk().desired_velocity().vx, 0.1);
  f.service.tick();
  EXPECT_DOUBLE_EQ(f.runner.controller().walk().desired_velocity().vx, 0.0);
}

TEST(Service, AppliesParamsAndGait)
{
  Fixture f;
  auto s = f.service.open_session();
  f.service.handle_message(*s, R"({"proto":1,"type":"params","seq":1,"admittance":true,"pose_source":"imu"})");
  f.service.handle_message(*s, R"({"proto":1,"type":"gait_select","seq":2,"gait":"wave"})");
  f.service.tick();
  EXPECT_TRUE(f.runner.controller().robot().admittance.enabled);
  EXPECT_EQ(f.runner.controller().walk().gait().name, "wave");
  EXPECT_TRUE(f.service.apply_errors().empty());
}

TEST(Mailbox, RejectNewestAndDropOldest)
{
  teleop::Mailbox<int> m(3);
  for (int k = 1; k <= 3; ++k) EXPECT_TRUE(m.try_push(k));
  EXPECT_FALSE(m.try_push(4));
  EXPECT_EQ(m.size(), 3u);
  EXPECT_EQ(m.push_drop_oldest(5), 1u);
  EXPECT_EQ(*m.pop(), 2);
  const auto rest = m.drain();
  EXPECT_EQ(rest, (std::deque<int>{3, 5}));
  EXPECT_FALSE(m.pop());
}

// ---------------------------------------------------------------------------
// State message

TEST(State, RoundTrip)
{
  Fixture f;
  f.runner.controller().set_velocity({0.1, 0, 0.1});
  f.runner.run(2.0);
  const teleop::StateMessage s = teleop::state_message(f.runner);
  const json j = s;
  EXPECT_EQ(j.get<teleop::StateMessage>(), s);
  EXPECT_EQ(json::parse(j.dump()).get<teleop::StateMessage>(), s);
  EXPECT_EQ(s.legs.size(), 6u);
  EXPECT_EQ(s.gait, "tripod");
}

TEST(State, FieldNames)
{
  Fixture f;
  const json j = json::parse(f.service.latest_state());
  for (const char* k : {"proto", "type", "tick", "time", "mode", "walk_state", "gait", "step_frequency", "body", "legs",
                        "metrics"})
    EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["type"], "state");
  EXPECT_TRUE(j["body"].contains("world"));
  EXPECT_TRUE(j["body"].contains("sub_poses"));
  for (const char* k : {"id", "joints", "tip", "stride", "phase", "phase_progress", "contact", "clamps"})
    EXPECT_TRUE(j["legs"][0].contains(k)) << k;
  for (const char* k : {"velocity", "position", "workspace"}) EXPECT_TRUE(j["legs"][0]["clamps"].contains(k)) << k;
  for (const char* k : {"power", "cost_of_transport", "velocity_command", "velocity_achieved", "airborne"})
    EXPECT_TRUE(j["metrics"].contains(k)) << k;
}

TEST(State, MessagesMatchSchemaDocument)
{
  const json schema = protocol_schema();
  const auto& defs = schema["$defs"];
  Fixture f;
  f.runner.controller().set_velocity({0.1, 0, 0});
  f.runner.run(1.0);
  f.service.tick();
  conforms(schema, defs["hello"], f.service.hello(), "hello");
  conforms(schema, defs["state"], json(teleop::state_message(f.runner)), "state");
  auto s = f.service.open_session();
  conforms(schema, defs["ack"], f.service.handle_message(*s, velocity(1, 0.1).dump()), "ack");
  conforms(schema, defs["error"], f.service.handle_message(*s, "{"), "error");
  conforms(schema, defs["velocity"], velocity(2, 0.1), "velocity");
  conforms(schema, defs["legipulate"], json::parse(R"({"proto":1,"type":"legipulate","seq":3,"leg":2,"tip":[0,0,0]})"),
           "legipulate");
}

TEST(State, HelloDescribesRobot)
{
  Fixture f;
  const json h = f.service.hello();
  EXPECT_EQ(h["type"], "hello");
  EXPECT_EQ(h["proto"], 1);
  EXPECT_DOUBLE_EQ(h["tick_rate"].get<double>(), 200.0);
  EXPECT_EQ(h["robot"]["legs"].size(), 6u);
  EXPECT_TRUE(h.contains("gaits"));
}

// ---------------------------------------------------------------------------
// Server

TEST(Server, WebSocketAndHttp)
{
  Fixture f;
  teleop::Server server(f.service, "127.0.0.1:0");
  teleop::TickLoop loop(f.service, 200.0);

  wsclient::Client a(server.port());
  wsclient::Client b(server.port());
  auto is = [](const char* type) { return [type](const json& m) { return m.value("type", "") == type; }; };
  ASSERT_EQ(a.wait_for(is("hello"), 5.0), 0);
  ASSERT_EQ(b.wait_for(is("hello"), 5.0), 0);
  ASSERT_GE(a.wait_for(is("state"), 5.0), 0);

  a.send(json{{"proto", 1}, {"type", "oops"}, {"seq", 1}});
  ASSERT_GE(a.wait_for(is("error"), 5.0), 0);
  a.send(velocity(2, 0.05));
  ASSERT_GE(a.wait_for(is("ack"), 5.0), 0);
  EXPECT_FALSE(a.disconnected());

  b.close();
  const std::size_t mark = a.frames().size();
  ASSERT_GE(a.wait_for(is("state"), 5.0, mark), 0);
  for (int k = 0; k < 100 && f.service.session_count() != 1; ++k) std::this_thread::sleep_for(std::chrono::milliseconds(10));
  EXPECT_EQ(f.service.session_count(), 1u);

  const auto state = wsclient::http_get(server.port(), "/state");
  EXPECT_EQ(state.status, 200);
  EXPECT_EQ(state.content_type, "application/json");
  EXPECT_EQ(json::parse(state.body)["type"], "state");
  EXPECT_EQ(wsclient::http_get(server.port(), "/hello").status, 200);
  EXPECT_EQ(wsclient::http_get(server.port(), "/nope").status, 404);

  a.close();
  loop.stop();
  server.stop();
}

TEST(Server, RejectsBadBind)
{
  Fixture f;
  EXPECT_ANY_THROW(teleop::Server(f.service, "127.0.0.1:notaport"));
  teleop::Server first(f.service, "127.0.0.1:0");
  EXPECT_ANY_THROW(teleop::Server(f.service, "127.0.0.1:" + std::to_string(first.port())));
}

// ---------------------------------------------------------------------------
// CLI

TEST(Cli, ValidateExitCodes)
{
  const fs::path dir = scratch("validate");
  EXPECT_EQ(cli("validate --robot " + config("hexapod_3dof.yaml")), 0);
  EXPECT_EQ(cli("validate --robot " + config("hexapod_3dof.yaml") + " --gaits " + config("gaits.yaml")), 0);
  EXPECT_EQ(cli("validate --robot " + (dir / "missing.yaml").string()), 2);  // unreadable file
  std::ofstream(dir / "bad.yaml") << "name: broken\nlegs: 3\n";
  EXPECT_EQ(cli("validate --robot " + (dir / "bad.yaml").string()), 1);
  EXPECT_EQ(cli("validate"), 1);
  EXPECT_EQ(cli("validate --robot " + config("hexapod_3dof.yaml") + " --bogus"), 1);
}

TEST(Cli, WorkspaceCacheIsStable)
{
  const fs::path dir = scratch("workspace");
  const std::string args = "workspace --robot " + config("planar_2r.yaml") + " --out " + dir.string();
  ASSERT_EQ(cli(args), 0);
  const std::string first = slurp(dir / "leg1_workspace.csv");
  ASSERT_FALSE(first.empty());
  fs::remove(dir / "leg1_workspace.csv");
  ASSERT_EQ(cli(args), 0);
  EXPECT_EQ(slurp(dir / "leg1_workspace.csv"), first);
}

TEST(Cli, RunScriptAndDeterminism)
{
  const fs::path a = scratch("run_a"), b = scratch("run_b");
  std::ofstream(a / "walk.txt") << "t=0 velocity 0.1 0 0\nt=2 end\n";
  const std::string base = "run --robot " + config("hexapod_3dof.yaml") + " --seed 5 --script " + (a / "walk.txt").string();
  ASSERT_EQ(cli(base + " --out " + a.string()), 0);
  ASSERT_EQ(cli(base + " --out " + b.string()), 0);
  EXPECT_EQ(slurp(a / "commands.csv"), slurp(b / "commands.csv"));
  const json summary = json::parse(slurp(a / "summary.json"));
  EXPECT_EQ(summary["limit_violations"], 0);
  EXPECT_GT(summary["distance_m"].get<double>(), 0.0);

  std::ofstream(a / "bad.txt") << "t=0 velocity 0.1\n";
  EXPECT_EQ(cli("run --robot " + config("hexapod_3dof.yaml") + " --script " + (a / "bad.txt").string() + " --out " +
                a.string()),
            1);
}

TEST(Cli, ServeBindFailureIsRuntimeError)
{
  Fixture f;
  teleop::Server taken(f.service, "127.0.0.1:0");
  const fs::path dir = scratch("serve");
  EXPECT_EQ(cli("serve --robot " + config("hexapod_3dof.yaml") + " --out " + dir.string() + " --bind 127.0.0.1:" +
                std::to_string(taken.port())),
            2);
}
