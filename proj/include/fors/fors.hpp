#pragma once

#include "fors/core.hpp"
#include "fors/diffusion.hpp"
#include "fors/errors.hpp"
#include "fors/gaussian_tilt.hpp"
#include "fors/metrics.hpp"
#include "fors/parallel.hpp"
#include "fors/proximal.hpp"
#include "fors/quadrature.hpp"
#include "fors/rng.hpp"
#include "fors/scores.hpp"
#include "fors/types.hpp"
