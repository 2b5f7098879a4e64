#pragma once

#include "midsel/collision.hpp"
#include "midsel/convolution.hpp"
#include "midsel/ensemble.hpp"
#include "midsel/error.hpp"
#include "midsel/hierarchy.hpp"
#include "midsel/metrics.hpp"
#include "midsel/moment_track.hpp"
#include "midsel/profiles.hpp"
#include "midsel/selection.hpp"
#include "midsel/solver_fourier.hpp"
#include "midsel/solver_grid.hpp"
#include "midsel/solver_particle.hpp"
#include "midsel/scenario.hpp"
#include "midsel/runner.hpp"
#include "midsel/acceptance.hpp"
