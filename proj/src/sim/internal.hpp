#pragma once

#include <vector>

#include "vcloc/sim.hpp"

namespace vcloc {

/// Times in (t0, t1) where the pivot acceleration jumps.
std::vector<double> path_breakpoints(const SurveyPath& path, double t0, double t1);

/// PCA straightness of a chunk of boundary samples with a 2 px edge band.
double chunk_straightness(const std::vector<Vec2>& pts);

}  // namespace vcloc
