#pragma once

// Regression values recorded at build time from the current implementation.
// Recompute them (and record why) whenever the phantom, the renderer's
// geometry or the planner changes.

#include <cstdint>

namespace frozen {

/// Mean final coverage ratio of the default lawnmower plan on the default
/// torso phantom, miss probability 0.2, episodes 0..99 of seed 0.
constexpr double kHeuristicCoverage = 0.9955795574288725;  // echosim rollout --task recon --policy heuristic --episodes 100 --seed 0
constexpr double kHeuristicCoverageTolerance = 0.02;

}  // namespace frozen
