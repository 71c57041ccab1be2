#pragma once

#include "pgc/error.hpp"
#include "pgc/core/linalg.hpp"
#include "pgc/core/normal.hpp"
#include "pgc/core/orthant.hpp"
#include "pgc/core/parallel.hpp"
#include "pgc/core/random.hpp"
#include "pgc/marginals.hpp"
#include "pgc/model.hpp"
#include "pgc/qp_tail.hpp"
#include "pgc/estimation.hpp"
#include "pgc/diagnostics.hpp"
#include "pgc/io.hpp"
