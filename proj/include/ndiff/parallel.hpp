#pragma once

// Include this instead of <omp.h> so the kernels still build without OpenMP.
#if defined(_OPENMP)
#include <omp.h>
namespace ndiff {
inline constexpr bool kUseOpenMP = true;
}
#else
namespace ndiff {
inline constexpr bool kUseOpenMP = false;
}
inline int omp_get_thread_num() { return 0; }
inline int omp_get_max_threads() { return 1; }
inline void omp_set_num_threads(int) {}
#endif
