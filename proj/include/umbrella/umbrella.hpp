#pragma once

#include "umbrella/common.hpp"
#include "umbrella/formula.hpp"
#include "umbrella/poset.hpp"
#include "umbrella/motion.hpp"
#include "umbrella/prediction.hpp"
#include "umbrella/simulation.hpp"
#include "umbrella/planner.hpp"
#include "umbrella/scenario.hpp"
#include "umbrella/executor.hpp"
#include "umbrella/experiment.hpp"
