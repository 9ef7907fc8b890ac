#pragma once

// Umbrella header for the CGC library: counterfactual hard-negative
// generation and dictionary look-up graph contrastive learning.

#include "cgc/config.hpp"
#include "cgc/contrastive.hpp"
#include "cgc/dataset.hpp"
#include "cgc/encoder.hpp"
#include "cgc/errors.hpp"
#include "cgc/evaluation.hpp"
#include "cgc/experiment.hpp"
#include "cgc/generator.hpp"
#include "cgc/matrix.hpp"
#include "cgc/norms.hpp"
#include "cgc/rng.hpp"
#include "cgc/tensor.hpp"
#include "cgc/version.hpp"
