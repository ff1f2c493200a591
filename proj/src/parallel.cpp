#include "mfclust/parallel.hpp"

#include <cstdlib>
#include <string>

namespace mfclust {

int default_thread_count() {
  if (const char* env = std::getenv("MFCLUST_THREADS")) {
    try {
      const int v = std::stoi(env);
      if (v >= 1) return v;
    } catch (const std::exception&) {
    }
  }
  return omp_get_num_procs();
}

}  // namespace mfclust
