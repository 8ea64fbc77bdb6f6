#pragma once

#include "bayes.hpp"
#include "coding.hpp"
#include "core.hpp"
#include "diagnostics.hpp"
#include "eval.hpp"
#include "half_cauchy.hpp"
#include "harness.hpp"
#include "lasso.hpp"
#include "linalg.hpp"
#include "logistic.hpp"
#include "ols.hpp"
#include "optimize.hpp"
#include "polya_gamma.hpp"
#include "ridge.hpp"
#include "rng.hpp"
#include "serialize.hpp"
#include "simgen.hpp"
#include "stats.hpp"
