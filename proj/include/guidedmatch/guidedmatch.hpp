#pragma once

#include "guidedmatch/errors.hpp"
#include "guidedmatch/geometry.hpp"
#include "guidedmatch/imu_state.hpp"
#include "guidedmatch/features.hpp"
#include "guidedmatch/predictor.hpp"
#include "guidedmatch/matcher.hpp"
#include "guidedmatch/synth.hpp"
#include "guidedmatch/dataset.hpp"
#include "guidedmatch/bench.hpp"
