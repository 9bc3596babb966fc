#pragma once
// Umbrella header for the numerical library (the scenario runner lives in
// c1split/scenario.hpp and additionally needs nlohmann::json and toml++).

#include "c1split/core.hpp"
#include "c1split/parallel.hpp"
#include "c1split/chart.hpp"
#include "c1split/catalog.hpp"
#include "c1split/grid_metric.hpp"
#include "c1split/scalar_field.hpp"
#include "c1split/quadrature.hpp"
#include "c1split/connection.hpp"
#include "c1split/geodesic.hpp"
#include "c1split/timesep.hpp"
#include "c1split/mollify.hpp"
#include "c1split/busemann.hpp"
#include "c1split/dalembert.hpp"
#include "c1split/splitting.hpp"
