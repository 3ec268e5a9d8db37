#include "mvfilter/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>

namespace mvfilter {

namespace {

std::atomic<int> configured{0};

int default_threads() {
  if (const char* env = std::getenv("MVFILTER_THREADS")) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace

void set_thread_count(int n) { configured = n > 0 ? n : 0; }

int thread_count() {
  const int n = configured.load();
  return n > 0 ? n : default_threads();
}

}  // namespace mvfilter
