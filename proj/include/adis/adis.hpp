#pragma once

#define ADIS_VERSION "0.1.0"

#include "adis/error.hpp"
#include "adis/random.hpp"
#include "adis/io.hpp"

#include "adis/nlp/problem.hpp"
#include "adis/nlp/quasi_newton.hpp"
#include "adis/nlp/trust_region.hpp"
#include "adis/nlp/trace.hpp"
#include "adis/nlp/solver.hpp"

#include "adis/whiten.hpp"
#include "adis/latdim.hpp"
#include "adis/contrast.hpp"
#include "adis/pursuit.hpp"

#include "adis/bench/problems.hpp"
#include "adis/bench/signals.hpp"
#include "adis/bench/sir.hpp"
#include "adis/bench/mixing.hpp"
#include "adis/bench/montecarlo.hpp"
