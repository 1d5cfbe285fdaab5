#pragma once

#include "mixbil/bundle_io.hpp"
#include "mixbil/config.hpp"
#include "mixbil/data.hpp"
#include "mixbil/experiment.hpp"
#include "mixbil/linalg.hpp"
#include "mixbil/lowerlevel.hpp"
#include "mixbil/outer.hpp"
#include "mixbil/penalty.hpp"
#include "mixbil/rng.hpp"
#include "mixbil/upper.hpp"
#include "mixbil/verify.hpp"
