#pragma once

#include "rng.hpp"
#include "stats.hpp"
#include "drift.hpp"
#include "initial.hpp"
#include "spde.hpp"
#include "label.hpp"
#include "local_time.hpp"
#include "particles.hpp"
#include "duality.hpp"
#include "diagnostics.hpp"
