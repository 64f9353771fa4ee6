#pragma once

#include "gpshape/error.hpp"
#include "gpshape/core_model.hpp"
#include "gpshape/band_energy.hpp"
#include "gpshape/solvers.hpp"
#include "gpshape/pulse_designer.hpp"
#include "gpshape/transmitter.hpp"
#include "gpshape/spectrum_analysis.hpp"
#include "gpshape/scenario.hpp"
#include "gpshape/serialization.hpp"
