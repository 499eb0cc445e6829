#pragma once

#include <deque>
#include <vector>

#include "hexgait/robot_controller.hpp"
#include "hexgait/sim.hpp"

namespace hexgait {

struct RunnerOptions
{
  ControllerOptions controller;
  SimOptions sim;
  bool feed_imu = true;
  bool feed_torques = true;
  double energy_window = 5.0;  // s of records kept for the rolling cost of transport
};

struct Snapshot
{
  long long tick = 0;
  double time = 0.0;
  Mode mode = Mode::Stance;
  WalkState walk_state = WalkState::Stopped;
  std::string gait;
  double step_frequency = 0.0;
  PlanarVelocity velocity_command;
  PlanarVelocity velocity;  // controller body velocity after limiting and ramping
  Transform body = Transform::Identity();  // world frame
  double power = 0.0;
  double cost_of_transport = 0.0;  // rolling window, 0 when not moving
  bool airborne = false;
  std::vector<LegStatus> legs;
  std::vector<JointVector> joints;
  std::vector<bool> contacts;
};

// Controller closed around the kinematic world.
class Runner
{
public:
  Runner(const RobotSpec& robot, std::vector<GaitSpec> gaits, std::vector<WorkspacePolyhedron> workspaces,
         RunnerOptions options = {})
      : options_(options), controller_(robot, std::move(gaits), std::move(workspaces), options.controller),
        sim_(robot, options.sim, controller_.joint_positions())
  {
  }

  void tick()
  {
    SensorInputs in;
    if (options_.feed_imu) in.imu = sim_.imu();
    if (options_.feed_torques) in.torques = sim_.torques();
    in.contact_tips = sim_.contact_tips_body();
    controller_.tick(in);
    sim_.step(controller_.joint_positions(), controller_.dt());
    records_.push_back(sim_.record());
    while (records_.size() > 2 && records_.back().time - records_.front().time > options_.energy_window)
      records_.pop_front();
  }

  void run(double seconds)
  {
    const auto n = static_cast<long long>(std::llround(seconds / controller_.dt()));
    for (long long i = 0; i < n; ++i) tick();
  }

  double rolling_cost_of_transport() const
  {
    if (records_.size() < 2) return 0.0;
    const double dx = records_.back().distance - records_.front().distance;
    if (dx <= 1e-6) return 0.0;
    return cost_of_transport(std::vector<EnergyRecord>(records_.begin(), records_.end()), controller_.robot().mass,
                             sim_.options().gravity);
  }

  Snapshot snapshot() const
  {
    Snapshot s;
    s.tick = controller_.tick_count();
    s.time = controller_.time();
    s.mode = controller_.mode();
    s.walk_state = controller_.walk().state();
    s.gait = controller_.walk().gait().name;
    s.step_frequency = controller_.walk().step_frequency();
    s.velocity_command = controller_.velocity_input();
    s.velocity = controller_.walk().velocity();
    s.body = sim_.body();
    s.power = sim_.power();
    s.cost_of_transport = rolling_cost_of_transport();
    s.airborne = sim_.airborne();
    s.legs = controller_.legs();
    s.joints = controller_.joint_positions();
    s.contacts = sim_.contacts();
    return s;
  }

  Controller& controller() { return controller_; }
  const Controller& controller() const { return controller_; }
  Sim& sim() { return sim_; }
  const Sim& sim() const { return sim_; }
  const std::deque<EnergyRecord>& records() const { return records_; }

private:
  RunnerOptions options_;
  Controller controller_;
  Sim sim_;
  std::deque<EnergyRecord> records_;
};

}  // namespace hexgait
