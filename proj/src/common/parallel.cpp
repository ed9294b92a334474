#include "kicl/common/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "kicl/error.hpp"

namespace kicl {

std::size_t thread_count() {
    const char* env = std::getenv("KERNELICL_THREADS");
    if (env == nullptr || *env == '\0') return std::max(1u, std::thread::hardware_concurrency());
    char* end = nullptr;
    const long v = std::strtol(env, &end, 10);
    KICL_REQUIRE(end != env && *end == '\0' && v >= 0,
                 std::string("KERNELICL_THREADS must be a nonnegative integer, got '") + env + "'");
    return std::max<std::size_t>(1, static_cast<std::size_t>(v));
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn, std::size_t threads) {
    threads = std::min(std::max<std::size_t>(threads, 1), count);
    if (threads <= 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(count);
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    for (std::size_t t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    parallel_for(count, fn, thread_count());
}

}  // namespace kicl
