#pragma once

#include "umaxent/core.hpp"
#include "umaxent/random.hpp"
#include "umaxent/solver.hpp"
#include "umaxent/uncertain.hpp"
#include "umaxent/latent.hpp"
#include "umaxent/blackbox.hpp"
#include "umaxent/generators.hpp"
#include "umaxent/harness.hpp"
#include "umaxent/serialize.hpp"
#include "umaxent/problem.hpp"
