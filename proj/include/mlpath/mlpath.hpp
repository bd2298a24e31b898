#pragma once

// Umbrella header.

#include "mlpath/drift.hpp"
#include "mlpath/functional_value.hpp"
#include "mlpath/grid.hpp"
#include "mlpath/harness.hpp"
#include "mlpath/mc.hpp"
#include "mlpath/measure.hpp"
#include "mlpath/models.hpp"
#include "mlpath/numeric.hpp"
#include "mlpath/optimize.hpp"
#include "mlpath/rng.hpp"
#include "mlpath/tilt.hpp"
#include "mlpath/variational.hpp"
#include "mlpath/version.hpp"
