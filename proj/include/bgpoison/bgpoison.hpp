#pragma once

#include "bgpoison/attacks.hpp"
#include "bgpoison/beam.hpp"
#include "bgpoison/core.hpp"
#include "bgpoison/countermeasures.hpp"
#include "bgpoison/dfoh.hpp"
#include "bgpoison/forest.hpp"
#include "bgpoison/harness.hpp"
#include "bgpoison/random.hpp"
#include "bgpoison/routing.hpp"
#include "bgpoison/topology.hpp"
