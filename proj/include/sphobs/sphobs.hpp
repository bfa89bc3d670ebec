#pragma once

// Umbrella header for the library modules.

#include "sphobs/cap_integral.hpp"
#include "sphobs/config.hpp"
#include "sphobs/errors.hpp"
#include "sphobs/evolution.hpp"
#include "sphobs/geodesic_space.hpp"
#include "sphobs/harmonics.hpp"
#include "sphobs/io.hpp"
#include "sphobs/quadrature.hpp"
#include "sphobs/radon.hpp"
#include "sphobs/rotation.hpp"
#include "sphobs/sphere.hpp"
#include "sphobs/spectra.hpp"
