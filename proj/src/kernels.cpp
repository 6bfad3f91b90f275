#include "cubicderiv/kernels.hpp"

#include <omp.h>

namespace cubicderiv {

int max_threads() { return omp_get_max_threads(); }

}  // namespace cubicderiv
