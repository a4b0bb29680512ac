#pragma once

// Umbrella header: the full solver library plus the experiment harness.

#include "hybridep/core.hpp"
#include "hybridep/equilibrium.hpp"
#include "hybridep/geometry.hpp"
#include "hybridep/harness.hpp"
#include "hybridep/mappings.hpp"
#include "hybridep/sequences.hpp"
#include "hybridep/sets.hpp"
#include "hybridep/solver.hpp"
