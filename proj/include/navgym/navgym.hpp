#pragma once

#include "navgym/acnet.hpp"
#include "navgym/checkpoint.hpp"
#include "navgym/config.hpp"
#include "navgym/fusion.hpp"
#include "navgym/ga3c.hpp"
#include "navgym/geometry.hpp"
#include "navgym/metrics.hpp"
#include "navgym/queue.hpp"
#include "navgym/sim_env.hpp"
#include "navgym/svg.hpp"
#include "navgym/worldmap.hpp"
