#pragma once

#include "hamflow/geometry.hpp"
#include "hamflow/sampling.hpp"
#include "hamflow/quadrature.hpp"
#include "hamflow/parallel.hpp"
#include "hamflow/csv.hpp"
#include "hamflow/fields.hpp"
#include "hamflow/chart2d.hpp"
#include "hamflow/energy1d.hpp"
#include "hamflow/transport.hpp"
#include "hamflow/counterexample.hpp"
#include "hamflow/weakcheck.hpp"
#include "hamflow/scenarios.hpp"
