#pragma once

// Umbrella header for the whole library.

#include "mdkin/config.hpp"
#include "mdkin/dsmc.hpp"
#include "mdkin/energy_distance.hpp"
#include "mdkin/envelope.hpp"
#include "mdkin/experiments.hpp"
#include "mdkin/fokker_planck.hpp"
#include "mdkin/grid.hpp"
#include "mdkin/interactions.hpp"
#include "mdkin/inverse_gamma.hpp"
#include "mdkin/moment_odes.hpp"
#include "mdkin/output.hpp"
#include "mdkin/params.hpp"
#include "mdkin/population.hpp"
#include "mdkin/rng.hpp"
