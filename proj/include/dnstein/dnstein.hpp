#pragma once

#include "dnstein/bench.hpp"
#include "dnstein/constants.hpp"
#include "dnstein/dnormal.hpp"
#include "dnstein/lattice.hpp"
#include "dnstein/matrixcore.hpp"
#include "dnstein/models.hpp"
#include "dnstein/pairs.hpp"
#include "dnstein/stein.hpp"
