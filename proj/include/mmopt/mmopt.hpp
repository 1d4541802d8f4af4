#pragma once

// Umbrella header: the whole library in dependency order.

#include <mmopt/model.hpp>
#include <mmopt/regimen.hpp>
#include <mmopt/integrator.hpp>
#include <mmopt/objective.hpp>
#include <mmopt/scenario.hpp>
#include <mmopt/optimize.hpp>
#include <mmopt/config_io.hpp>
#include <mmopt/results_io.hpp>
