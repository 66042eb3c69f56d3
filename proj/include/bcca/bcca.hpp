#pragma once

// Bayesian correlated component analysis: hierarchical multi-view latent
// source model with variational inference, eigenvalue baselines (CCA and
// CorrCA), a synthetic data generator, evaluation metrics, and a benchmark
// harness.

#include "bcca/assignment.hpp"
#include "bcca/baselines.hpp"
#include "bcca/benchmark.hpp"
#include "bcca/fit.hpp"
#include "bcca/io.hpp"
#include "bcca/lower_bound.hpp"
#include "bcca/metrics.hpp"
#include "bcca/moments.hpp"
#include "bcca/rng.hpp"
#include "bcca/simulate.hpp"
#include "bcca/types.hpp"
#include "bcca/updates.hpp"
