#pragma once

#include <chrono>
#include <functional>

namespace dmpc {

// Thread cap: min(requested, DMPC_THREADS env, hardware). 1 = serial.
int effective_threads();
void set_thread_cap(int n);  // 0 restores the default

// Deterministic mode (--serial): single thread and all wall-time fields
// reported as zero so outputs are byte-stable across runs.
bool deterministic_mode();
void set_deterministic(bool on);

// Runs fn(0..n-1); each index must write only to its own slots.
void parallel_for(int n, const std::function<void(int)>& fn);

class Timer {
public:
    Timer() : start_(clock::now()) {}
    double seconds() const {
        if (deterministic_mode()) return 0.0;
        return std::chrono::duration<double>(clock::now() - start_).count();
    }

private:
    using clock = std::chrono::steady_clock;
    clock::time_point start_;
};

}  // namespace dmpc
