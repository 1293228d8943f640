#include "lowformer/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>

namespace lowformer {
namespace {

int initial_threads() {
  if (const char* env = std::getenv("LOWFORMER_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

std::atomic<int>& thread_setting() {
  static std::atomic<int> value{initial_threads()};
  return value;
}

}  // namespace

int num_threads() { return thread_setting().load(); }

void set_num_threads(int n) { thread_setting().store(n < 1 ? 1 : n); }

ThreadScope::ThreadScope(int n) : saved_(num_threads()) { set_num_threads(n); }
ThreadScope::~ThreadScope() { set_num_threads(saved_); }

}  // namespace lowformer
