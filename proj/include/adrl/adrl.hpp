#pragma once

#include "adrl/attention.hpp"
#include "adrl/baselines.hpp"
#include "adrl/combiners.hpp"
#include "adrl/coordinator.hpp"
#include "adrl/ddpg.hpp"
#include "adrl/env/multiview_env.hpp"
#include "adrl/env/track.hpp"
#include "adrl/nn.hpp"
#include "adrl/replay.hpp"
#include "adrl/schedule.hpp"
#include "adrl/shaping.hpp"
#include "adrl/worker.hpp"
