#pragma once

#include "attack.hpp"
#include "bench.hpp"
#include "cnf.hpp"
#include "constraints.hpp"
#include "formats.hpp"
#include "equivalence.hpp"
#include "key.hpp"
#include "locking.hpp"
#include "netlist.hpp"
#include "paths.hpp"
#include "rng.hpp"
#include "sat.hpp"
#include "sim.hpp"
#include "timing.hpp"
#include "unroll.hpp"
