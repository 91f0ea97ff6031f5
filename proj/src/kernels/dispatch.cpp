#include "cagewarp/kernels.hpp"
#include "cagewarp/errors.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace cagewarp::kernels {
namespace {

bool cpu_supports(Backend backend) {
    switch (backend) {
        case Backend::scalar:
            return true;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
            return false;
#endif
        case Backend::neon:
#if defined(__aarch64__)
            return true;
#else
            return false;
#endif
    }
    return false;
}

const KernelTable* pick_default() {
    if (const char* env = std::getenv("CAGEWARP_SIMD")) {
        if (auto b = parse_backend(env); b && cpu_supports(*b)) return &table(*b);
    }
    const auto backends = available_backends();
    return &table(backends.back());
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{pick_default()};
    return slot;
}

}  // namespace

std::string_view to_string(Backend backend) {
    switch (backend) {
        case Backend::scalar: return "scalar";
        case Backend::avx2: return "avx2";
        case Backend::neon: return "neon";
    }
    return "unknown";
}

std::optional<Backend> parse_backend(std::string_view name) {
    if (name == "scalar") return Backend::scalar;
    if (name == "avx2") return Backend::avx2;
    if (name == "neon") return Backend::neon;
    return std::nullopt;
}

std::vector<Backend> available_backends() {
    std::vector<Backend> out{Backend::scalar};
    for (Backend b : {Backend::avx2, Backend::neon}) {
        if (cpu_supports(b)) out.push_back(b);
    }
    return out;
}

const KernelTable& table(Backend backend) {
    if (!cpu_supports(backend))
        throw Error("kernel backend not available: " + std::string(to_string(backend)));
    switch (backend) {
#if defined(__x86_64__) || defined(_M_X64)
        case Backend::avx2: return detail::avx2_table;
#endif
#if defined(__aarch64__)
        case Backend::neon: return detail::neon_table;
#endif
        default: return detail::scalar_table;
    }
}

const KernelTable& active() { return *active_slot().load(std::memory_order_acquire); }

void set_active_backend(Backend backend) {
    active_slot().store(&table(backend), std::memory_order_release);
}

}  // namespace cagewarp::kernels
