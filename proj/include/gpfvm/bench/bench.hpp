#pragma once

#include "gpfvm/bench/config.hpp"
#include "gpfvm/bench/experiment.hpp"
#include "gpfvm/bench/metrics.hpp"
#include "gpfvm/bench/problems.hpp"
#include "gpfvm/bench/shallow_water.hpp"
