#include "hamprune/kernels.hpp"

#include <atomic>
#include <cstdlib>

namespace hamprune::kernels {

namespace {

bool initial_state() {
    // HAMPRUNE_SERIAL=1 forces the serial backend (useful for benchmarking
    // and for isolating kernel bugs).
    const char* env = std::getenv("HAMPRUNE_SERIAL");
    return !(env && env[0] == '1');
}

std::atomic<bool> g_parallel{initial_state()};

}  // namespace

bool parallel_enabled() { return g_parallel.load(std::memory_order_relaxed); }

void set_parallel(bool on) { g_parallel.store(on, std::memory_order_relaxed); }

}  // namespace hamprune::kernels
