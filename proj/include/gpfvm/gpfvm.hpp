#pragma once

#include "gpfvm/errors.hpp"
#include "gpfvm/exp_poly.hpp"
#include "gpfvm/functional.hpp"
#include "gpfvm/gram.hpp"
#include "gpfvm/kernel.hpp"
#include "gpfvm/operators.hpp"
#include "gpfvm/posterior.hpp"
#include "gpfvm/quadrature.hpp"
#include "gpfvm/solver.hpp"
