#pragma once

#include "gilt/experiments.hpp"

#include <vector>

namespace gilt::scenarios {

using Rows = std::vector<ResultRow>;

Rows bound_21(const ExperimentConfig&);
Rows continuity(const ExperimentConfig&);
Rows gram_fuzz(const ExperimentConfig&);
Rows identity_b1(const ExperimentConfig&);
Rows integrator_def(const ExperimentConfig&);
Rows kernel_structure(const ExperimentConfig&);
Rows localtime_moments(const ExperimentConfig&);
Rows moments(const ExperimentConfig&);
Rows quadrature_stability(const ExperimentConfig&);
Rows u_moments(const ExperimentConfig&);

}  // namespace gilt::scenarios
