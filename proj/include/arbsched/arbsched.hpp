#pragma once

#include "arbsched/cost.hpp"
#include "arbsched/errors.hpp"
#include "arbsched/interval.hpp"
#include "arbsched/oracle.hpp"
#include "arbsched/prices.hpp"
#include "arbsched/problem.hpp"
#include "arbsched/schedule_io.hpp"
#include "arbsched/solver.hpp"
