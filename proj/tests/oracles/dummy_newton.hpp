#pragma once

#include <vector>

#include "geppml/ppml.hpp"

namespace oracle {

struct DummyFit {
    std::vector<double> beta;
    std::vector<double> mu;    // per input observation, 0 where dropped
    std::vector<bool> kept;
    int iterations = 0;
};

/// Poisson MLE by plain Newton steps on the explicit design
/// [covariates | 1 | one dummy per FE level], solved with a complete
/// orthogonal decomposition so the rank-deficient dummy block needs no
/// normalization. Observations in all-zero FE levels are removed first.
DummyFit dummy_newton(const geppml::PpmlProblem& problem);

}  // namespace oracle
