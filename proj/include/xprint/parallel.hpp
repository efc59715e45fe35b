#pragma once

#include <cstddef>
#include <utility>

namespace xprint::par {

/// Global switch for the OpenMP fast path.  Tests flip this off to run the
/// serial reference and compare outputs; both paths must agree bit for bit.
bool& enabled();

int max_threads();

/// Serial reference loop.  Kept as a separate entry point so benchmarks and
/// equivalence tests can call it explicitly.
template <class F>
void for_index_serial(std::size_t n, F&& f) {
    for (std::size_t i = 0; i < n; ++i) f(i);
}

/// OpenMP loop.  Bodies must be independent per index and write only to
/// their own output slot; determinism then holds for any thread count.
template <class F>
void for_index_omp(std::size_t n, F&& f) {
#ifdef _OPENMP
    #pragma omp parallel for schedule(dynamic)
    for (long long i = 0; i < static_cast<long long>(n); ++i) {
        f(static_cast<std::size_t>(i));
    }
#else
    for_index_serial(n, std::forward<F>(f));
#endif
}

template <class F>
void for_index(std::size_t n, F&& f) {
    if (enabled()) {
        for_index_omp(n, std::forward<F>(f));
    } else {
        for_index_serial(n, std::forward<F>(f));
    }
}

}  // namespace xprint::par
