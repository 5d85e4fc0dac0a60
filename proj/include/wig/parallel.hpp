#ifndef WIG_PARALLEL_HPP
#define WIG_PARALLEL_HPP

#include <cstddef>
#include <exception>

// OpenMP loop wrapper. Bodies write only their own slot, so results do not
// depend on the thread count; the first exception is rethrown after the
// region instead of escaping it.
namespace wig::detail {

template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::exception_ptr first_error = nullptr;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
#pragma omp critical(wig_parallel_first_error)
            {
                if (!first_error) first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

}  // namespace wig::detail

#endif
