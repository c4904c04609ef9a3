#pragma once

#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace microforge {

inline void set_thread_count(int n) {
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#else
    (void)n;
#endif
}

inline int thread_count() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

/// Runs body(i) for i in [begin, end) on the OpenMP team. The first
/// exception thrown by any iteration is rethrown on the calling thread.
/// Callers must keep iterations write-disjoint so results do not depend on
/// the schedule.
template <class Body>
void parallel_for(std::int64_t begin, std::int64_t end, Body&& body) {
    std::exception_ptr error;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1)
    for (std::int64_t i = begin; i < end; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error) error = std::current_exception();
        }
    }
    if (error) std::rethrow_exception(error);
}

}  // namespace microforge
