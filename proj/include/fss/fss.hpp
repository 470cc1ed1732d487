#pragma once

#include "fss/error.hpp"
#include "fss/parallel.hpp"
#include "fss/grid.hpp"
#include "fss/kernel.hpp"
#include "fss/nonlocal_ops.hpp"
#include "fss/random_fields.hpp"
#include "fss/convex_solver.hpp"
#include "fss/singular_chain.hpp"
#include "fss/best_constants.hpp"
#include "fss/property_suite.hpp"
#include "fss/io.hpp"
#include "fss/cli.hpp"
