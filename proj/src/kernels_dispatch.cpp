#include "minima_drift/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace mdrift::kern {

bool avx2_available() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
    if (avx2_table() == nullptr) return false;
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

namespace {

const Table* pick_default() {
    const char* env = std::getenv("MINIMA_DRIFT_SIMD");
    if (env != nullptr && std::string(env) == "scalar") return &scalar_table();
    if (avx2_available()) return avx2_table();
    return &scalar_table();
}

std::atomic<const Table*>& slot() {
    static std::atomic<const Table*> s{pick_default()};
    return s;
}

}  // namespace

const Table& active() { return *slot().load(std::memory_order_relaxed); }

bool select(std::string_view name) {
    if (name == "scalar") {
        slot().store(&scalar_table());
        return true;
    }
    if (name == "avx2" && avx2_available()) {
        slot().store(avx2_table());
        return true;
    }
    return false;
}

}  // namespace mdrift::kern
