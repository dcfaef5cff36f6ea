#pragma once

#include "sparsecov/error.hpp"
#include "sparsecov/random.hpp"
#include "sparsecov/matrix.hpp"
#include "sparsecov/gaussian.hpp"
#include "sparsecov/estimators.hpp"
#include "sparsecov/oracle.hpp"
#include "sparsecov/packing.hpp"
#include "sparsecov/experiments.hpp"
