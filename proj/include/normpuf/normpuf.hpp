#pragma once

// Umbrella header.

#include "normpuf/analysis.hpp"
#include "normpuf/authstore.hpp"
#include "normpuf/capture_io.hpp"
#include "normpuf/core.hpp"
#include "normpuf/digattack.hpp"
#include "normpuf/estimator.hpp"
#include "normpuf/latent.hpp"
#include "normpuf/optics.hpp"
#include "normpuf/optim.hpp"
#include "normpuf/physattack.hpp"
#include "normpuf/pipeline.hpp"
#include "normpuf/surfacegen.hpp"
