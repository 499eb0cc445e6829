#pragma once

#include "hexgait/config.hpp"
#include "hexgait/gait.hpp"
#include "hexgait/kinematics.hpp"
#include "hexgait/model.hpp"
#include "hexgait/pose_controller.hpp"
#include "hexgait/robot_controller.hpp"
#include "hexgait/runner.hpp"
#include "hexgait/script.hpp"
#include "hexgait/sim.hpp"
#include "hexgait/trajectory.hpp"
#include "hexgait/transform.hpp"
#include "hexgait/walk_controller.hpp"
#include "hexgait/workspace.hpp"
