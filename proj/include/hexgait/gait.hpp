#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "hexgait/model.hpp"
#include "hexgait/trajectory.hpp"

namespace hexgait {

struct LegPhase
{
  StepState state = StepState::Stance;
  double t = 0.0;   // progress at the start of the tick, in [0,1)
  int tick = 0;     // ticks elapsed in the current state
  int length = 1;   // ticks in the current state
};

// Leg-local phase = (tick - multiplier * offset) mod period, in units of
// `unit_ticks` controller ticks per phase unit.
inline LegPhase gait_timing(const GaitSpec& gait, long long tick, std::size_t leg_index, int unit_ticks = 1)
{
  if (leg_index >= gait.offset_multiplier.size()) throw std::out_of_range("unknown leg for gait " + gait.name);
  const long long period = static_cast<long long>(gait.period()) * unit_ticks;
  const long long shift = static_cast<long long>(gait.offset_multiplier[leg_index]) * gait.phase_offset * unit_ticks;
  long long phase = (tick - shift) % period;
  if (phase < 0) phase += period;
  const long long stance = static_cast<long long>(gait.stance_phase) * unit_ticks;
  LegPhase p;
  if (phase < stance) {
    p.state = StepState::Stance;
    p.tick = static_cast<int>(phase);
    p.length = static_cast<int>(stance);
  } else {
    p.state = StepState::Swing;
    p.tick = static_cast<int>(phase - stance);
    p.length = static_cast<int>(period - stance);
  }
  p.t = static_cast<double>(p.tick) / p.length;
  return p;
}

// Controller ticks per gait phase unit for a requested step frequency.
inline int unit_ticks_for(const GaitSpec& gait, double tick_rate, double step_frequency)
{
  if (!(tick_rate > 0 && step_frequency > 0)) throw std::invalid_argument("rates must be > 0");
  return std::max(1, static_cast<int>(std::lround(tick_rate / (step_frequency * gait.period()))));
}

// Step frequency actually realised after quantising the period to whole ticks.
inline double effective_frequency(const GaitSpec& gait, double tick_rate, int unit_ticks)
{
  return tick_rate / (static_cast<double>(unit_ticks) * gait.period());
}

inline int stance_count(const GaitSpec& gait, long long tick, std::size_t legs, int unit_ticks = 1)
{
  int n = 0;
  for (std::size_t l = 0; l < legs; ++l)
    if (gait_timing(gait, tick, l, unit_ticks).state == StepState::Stance) ++n;
  return n;
}

}  // namespace hexgait
