#pragma once

#include "brute_force.hpp"
#include "csv.hpp"
#include "error.hpp"
#include "estimators.hpp"
#include "graph.hpp"
#include "interference.hpp"
#include "invariants.hpp"
#include "monte_carlo.hpp"
#include "patterns.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "simulation.hpp"
