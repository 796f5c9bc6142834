#pragma once

#include "nmoc/types.hpp"
#include "nmoc/quadrature.hpp"
#include "nmoc/spectral.hpp"
#include "nmoc/volterra.hpp"
#include "nmoc/params.hpp"
#include "nmoc/bound_state.hpp"
#include "nmoc/classical.hpp"
#include "nmoc/fluctuations.hpp"
#include "nmoc/entanglement.hpp"
#include "nmoc/discrete_bath.hpp"
#include "nmoc/scenario.hpp"
#include "nmoc/csv.hpp"
#include "nmoc/threshold_map.hpp"
#include "nmoc/validation.hpp"
#include "nmoc/runs.hpp"
