#include "countercast/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

#include "countercast/errors.hpp"

namespace ccast {

ParallelMode parallel_mode_from_string(std::string_view s) {
    if (s == "serial") return ParallelMode::serial;
    if (s == "openmp" || s == "parallel") return ParallelMode::openmp;
    throw ConfigError("unknown parallel mode: " + std::string(s));
}

void parallel_for(int n, ParallelMode mode, int workers, const std::function<void(int)>& body) {
    if (mode == ParallelMode::serial) {
        for (int i = 0; i < n; ++i) body(i);
        return;
    }
#ifdef _OPENMP
    if (workers > 0) {
#pragma omp parallel for schedule(dynamic) num_threads(workers)
        for (int i = 0; i < n; ++i) body(i);
    } else {
#pragma omp parallel for schedule(dynamic)
        for (int i = 0; i < n; ++i) body(i);
    }
#else
    (void)workers;
    for (int i = 0; i < n; ++i) body(i);
#endif
}

}  // namespace ccast
