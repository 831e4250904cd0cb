#pragma once

#include "diffract/core.hpp"
#include "diffract/fft.hpp"
#include "diffract/montecarlo.hpp"
#include "diffract/sequences.hpp"
#include "diffract/spectra.hpp"
