#pragma once

// Umbrella header for the projected Langevin Monte Carlo library.

#include "plmc/errors.hpp"
#include "plmc/experiments.hpp"
#include "plmc/metrics.hpp"
#include "plmc/model.hpp"
#include "plmc/projection.hpp"
#include "plmc/report.hpp"
#include "plmc/rng.hpp"
#include "plmc/samplers.hpp"
#include "plmc/vec.hpp"
