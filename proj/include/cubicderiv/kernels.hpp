#pragma once

#include <cstddef>
#include <exception>
#include <mutex>

namespace cubicderiv {

/// How per-probe loops run. Serial is the reference path; Parallel splits the
/// index range across OpenMP threads. Every kernel writes results by index
/// and reduces with max/min only, so both paths give bitwise-equal output.
enum class Exec { Serial, Parallel };

/// Calls body(i) for i in [0, n). Exceptions raised inside the parallel
/// region are captured and the first one is rethrown on the calling thread.
template <class Body>
void for_each_index(std::size_t n, Exec exec, Body&& body) {
    if (exec == Exec::Serial) {
        for (std::size_t i = 0; i < n; ++i) body(i);
        return;
    }
    std::exception_ptr failure;
    std::mutex guard;
    const long count = static_cast<long>(n);
#pragma omp parallel for schedule(dynamic, 4)
    for (long i = 0; i < count; ++i) {
        try {
            body(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard lock(guard);
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
}

/// Number of OpenMP threads a parallel kernel would use.
int max_threads();

}  // namespace cubicderiv
