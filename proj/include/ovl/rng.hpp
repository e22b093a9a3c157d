#pragma once

#include <array>
#include <cstdint>

#include "ovl/vec3.hpp"

namespace ovl {

// Philox4x32-10 counter-based generator. A block is a pure function of
// (key, counter), so any (trajectory, step) pair can be generated in any
// order on any thread with identical results.
std::array<uint32_t, 4> philox4x32(const std::array<uint32_t, 2>& key,
                                   std::array<uint32_t, 4> ctr);

struct RngLineage {
  uint64_t master_seed = 0;
  uint64_t trajectory_index = 0;
};

// Three independent N(0, dt) draws, a deterministic function of
// (master_seed, trajectory_index, step_index).
Vec3 wiener_increment(const RngLineage& lineage, uint64_t step_index, double dt);

// Standard-normal triple behind wiener_increment (variance 1), exposed for
// reuse outside the dt scaling.
Vec3 normal_triple(const RngLineage& lineage, uint64_t step_index);

}
