#pragma once

#include "irl/baselines.hpp"
#include "irl/envgen.hpp"
#include "irl/harness.hpp"
#include "irl/linalg.hpp"
#include "irl/mdp.hpp"
#include "irl/random.hpp"
#include "irl/samplers.hpp"
#include "irl/serialize.hpp"
#include "irl/simplex.hpp"
#include "irl/types.hpp"
