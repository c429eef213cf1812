#include <string>
#include <vector>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "lesiondiff/commands.hpp"

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Tape activations are large and short-lived; keep them on the heap instead of
  // mmap/munmap per allocation, which otherwise costs a third of training time.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  return lesiondiff::cli::run(std::vector<std::string>(argv, argv + argc));
}
