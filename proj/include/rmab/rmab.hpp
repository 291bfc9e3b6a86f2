#pragma once

#include "rmab/bounds.hpp"
#include "rmab/core.hpp"
#include "rmab/examples.hpp"
#include "rmab/io.hpp"
#include "rmab/log.hpp"
#include "rmab/lp.hpp"
#include "rmab/meanfield.hpp"
#include "rmab/policy.hpp"
#include "rmab/rng.hpp"
#include "rmab/runner.hpp"
#include "rmab/sim.hpp"
#include "rmab/whittle.hpp"
