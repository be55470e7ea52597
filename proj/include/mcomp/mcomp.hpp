#pragma once

#include "mcomp/core/errors.hpp"
#include "mcomp/core/ops.hpp"
#include "mcomp/core/svd.hpp"
#include "mcomp/core/types.hpp"
#include "mcomp/rng.hpp"
#include "mcomp/datagen.hpp"
#include "mcomp/spectral.hpp"
#include "mcomp/solve_result.hpp"
#include "mcomp/optspace.hpp"
#include "mcomp/admira.hpp"
#include "mcomp/fpca.hpp"
#include "mcomp/metrics.hpp"
#include "mcomp/harness/csv.hpp"
#include "mcomp/harness/config.hpp"
#include "mcomp/harness/sweep.hpp"
#include "mcomp/harness/datasets.hpp"
#include "mcomp/harness/real_eval.hpp"
