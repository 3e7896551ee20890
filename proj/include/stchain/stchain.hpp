#pragma once

#include "common.hpp"
#include "spinspace.hpp"
#include "hamiltonians.hpp"
#include "eigensolver.hpp"
#include "stmeasure.hpp"
#include "analysis.hpp"
#include "noisekit.hpp"
#include "cli.hpp"
