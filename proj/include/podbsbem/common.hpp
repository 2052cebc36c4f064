#pragma once

#include <atomic>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace podbsbem {

inline constexpr const char* kVersion = "0.1.0";
inline constexpr int kSurrogateFormatVersion = 1;
inline constexpr int kSnapshotFormatVersion = 1;
inline constexpr const char* kRngId = "mt19937_64";

/// Raised when a file is missing, malformed, or inconsistent with its metadata.
struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Raised when input data is numerically unusable (zero-norm reference,
/// degenerate sample sets, rank-deficient designs that cannot be recovered).
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit hash, used to stamp configurations into output files.
inline std::uint64_t fnv1a(const void* data, std::size_t size,
                           std::uint64_t state = 14695981039346656037ull) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < size; ++i) {
        state ^= p[i];
        state *= 1099511628211ull;
    }
    return state;
}

inline std::uint64_t fnv1a(const std::string& text) {
    return fnv1a(text.data(), text.size());
}

inline int default_thread_count() {
    const unsigned n = std::thread::hardware_concurrency();
    return n == 0 ? 1 : static_cast<int>(n);
}

/// Runs fn(block, begin, end) over a fixed partition of [0, count) into blocks
/// of block_size items. The partition does not depend on the thread count, so
/// callers that combine per-block results in block order get bitwise identical
/// output for any number of threads. fn must only write to state owned by its
/// block index.
template <class Fn>
void for_blocks(std::int64_t count, std::int64_t block_size, int threads, Fn&& fn) {
    if (count <= 0) return;
    if (block_size <= 0) block_size = 1;
    const std::int64_t blocks = (count + block_size - 1) / block_size;
    auto run_one = [&](std::int64_t b) {
        const std::int64_t begin = b * block_size;
        const std::int64_t end = std::min(count, begin + block_size);
        fn(b, begin, end);
    };
    if (threads <= 1 || blocks <= 1) {
        for (std::int64_t b = 0; b < blocks; ++b) run_one(b);
        return;
    }
    std::atomic<std::int64_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (;;) {
            const std::int64_t b = next.fetch_add(1, std::memory_order_relaxed);
            if (b >= blocks) return;
            try {
                run_one(b);
            } catch (...) {
                std::lock_guard<std::mutex> lock(failure_mutex);
                if (!failure) failure = std::current_exception();
                next.store(blocks, std::memory_order_relaxed);
                return;
            }
        }
    };
    const int pool_size = static_cast<int>(std::min<std::int64_t>(threads, blocks));
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(pool_size));
    for (int t = 0; t < pool_size; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (failure) std::rethrow_exception(failure);
}

inline constexpr std::int64_t kReductionBlock = 1024;

}  // namespace podbsbem
