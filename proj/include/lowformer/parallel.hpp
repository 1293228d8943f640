#pragma once

namespace lowformer {

// Worker threads used by kernels. Defaults to LOWFORMER_THREADS when set,
// otherwise to the hardware concurrency. Work is split by output rows /
// channels only, so results do not depend on this value.
int num_threads();
void set_num_threads(int n);

// RAII pin for the duration of a scope.
class ThreadScope {
 public:
  explicit ThreadScope(int n);
  ~ThreadScope();
  ThreadScope(const ThreadScope&) = delete;
  ThreadScope& operator=(const ThreadScope&) = delete;

 private:
  int saved_;
};

}  // namespace lowformer
