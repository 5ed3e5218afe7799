#pragma once

#include <cstddef>
#include <functional>

namespace stwind {

// Process-wide worker count used by parallel_for. Values < 1 mean 1.
void set_thread_count(int n) noexcept;
int thread_count() noexcept;

// Runs body(i) for i in [0, n). Each index is visited exactly once and the
// body must only write to index-owned state, so results do not depend on the
// schedule. Nested calls run serially on the calling worker.
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& body);

} // namespace stwind
