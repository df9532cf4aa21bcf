#pragma once

#include "daalder/alloc_meter.hpp"
#include "daalder/bench.hpp"
#include "daalder/core.hpp"
#include "daalder/datagen.hpp"
#include "daalder/edsm.hpp"
#include "daalder/errors.hpp"
#include "daalder/learner.hpp"
#include "daalder/machine_io.hpp"
#include "daalder/observation_tree.hpp"
#include "daalder/oracles.hpp"
#include "daalder/trace_io.hpp"
#include "daalder/trace_store.hpp"
