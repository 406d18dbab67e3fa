#pragma once

// Umbrella header.

#include "sfwm/analysis/fitting.hpp"
#include "sfwm/analysis/metrics.hpp"
#include "sfwm/analysis/sweep.hpp"
#include "sfwm/biphoton.hpp"
#include "sfwm/errors.hpp"
#include "sfwm/expsim.hpp"
#include "sfwm/io/config.hpp"
#include "sfwm/io/csv.hpp"
#include "sfwm/physics.hpp"
#include "sfwm/units.hpp"
#include "sfwm/version.hpp"
