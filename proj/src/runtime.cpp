#include "dmpc/runtime.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace dmpc {

namespace {

std::atomic<int> g_cap{0};
std::atomic<bool> g_deterministic{false};

int env_threads() {
    static int cached = [] {
        if (const char* s = std::getenv("DMPC_THREADS")) {
            int v = std::atoi(s);
            if (v > 0) return v;
        }
        return 0;
    }();
    return cached;
}

}  // namespace

int effective_threads() {
    if (deterministic_mode()) return 1;
    int hw = static_cast<int>(std::thread::hardware_concurrency());
    if (hw <= 0) hw = 1;
    int n = hw;
    if (int e = env_threads(); e > 0 && e < n) n = e;
    if (int c = g_cap.load(); c > 0 && c < n) n = c;
    return n;
}

void set_thread_cap(int n) { g_cap.store(n); }

bool deterministic_mode() { return g_deterministic.load(); }
void set_deterministic(bool on) { g_deterministic.store(on); }

void parallel_for(int n, const std::function<void(int)>& fn) {
    const int workers = std::min(effective_threads(), n);
    if (workers <= 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (;;) {
                int i = next.fetch_add(1);
                if (i >= n) return;
                fn(i);
            }
        });
    }
    for (auto& t : pool) t.join();
}

}  // namespace dmpc
