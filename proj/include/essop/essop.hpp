#pragma once

// Umbrella header.

#include "essop/encoder.hpp"
#include "essop/engine.hpp"
#include "essop/errors.hpp"
#include "essop/io.hpp"
#include "essop/numeric.hpp"
#include "essop/oracle.hpp"
#include "essop/rng.hpp"
#include "essop/sc_core.hpp"
#include "essop/train.hpp"
