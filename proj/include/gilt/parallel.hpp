#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace gilt::parallel {

/// Global worker cap (CLI --threads). Affects speed, never results: work is
/// split into fixed blocks whose outputs do not depend on which thread ran them.
void set_max_threads(int n);
int max_threads();

/// Runs fn(block_index) for block_index in [0, n_blocks). Blocks may execute
/// on any worker in any order; fn must write only block-local state.
void for_blocks(std::int64_t n_blocks, const std::function<void(std::int64_t)>& fn);

}  // namespace gilt::parallel
