#pragma once

#include "midcs/dimension.hpp"
#include "midcs/energy.hpp"
#include "midcs/error.hpp"
#include "midcs/experiments.hpp"
#include "midcs/parallel.hpp"
#include "midcs/process.hpp"
#include "midcs/random.hpp"
#include "midcs/sensing.hpp"
#include "midcs/stats.hpp"
