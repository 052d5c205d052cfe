#include <string>
#include <vector>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "refbert/cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
  // Activation matrices are allocated and freed every step; keep them off mmap.
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
#endif
  return refbert::cli::run(std::vector<std::string>(argv + 1, argv + argc));
}
