#pragma once

/** @brief Umbrella header for the rhomix library. */

#include "core.hpp"
#include "linalg.hpp"
#include "discrete.hpp"
#include "gaussian.hpp"
#include "tensor.hpp"
#include "events.hpp"
#include "glauber.hpp"
#include "conv.hpp"
#include "lattice.hpp"
#include "ou_chain.hpp"
#include "random.hpp"
