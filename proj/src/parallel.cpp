#include "cagewarp/parallel.hpp"

#include <atomic>

namespace cagewarp {
namespace {
std::atomic<unsigned>& slot() {
    static std::atomic<unsigned> count{std::max(1u, std::thread::hardware_concurrency())};
    return count;
}
}  // namespace

void set_thread_count(unsigned count) { slot().store(std::max(1u, count)); }
unsigned thread_count() { return slot().load(); }

}  // namespace cagewarp
