#include "xprint/parallel.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace xprint::par {

bool& enabled() {
    static bool flag = true;
    return flag;
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace xprint::par
