#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace rfl {

/// Worker count used by every data-parallel loop. Defaults to RFL_THREADS
/// when set, otherwise the hardware concurrency.
int thread_count();
void set_thread_count(int n);

/// Running sum with Neumaier compensation.
class CompensatedSum {
 public:
  void add(double v) {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {
inline constexpr std::size_t kChunk = 1024;
}

/// Runs body(chunk_index) for every chunk in [0, chunks) on the worker pool.
/// If chunks throw, the exception from the lowest chunk index is rethrown
/// after all workers have joined.
template <class Body>
void parallel_chunks(std::size_t chunks, Body&& body) {
  const int workers =
      static_cast<int>(std::min<std::size_t>(thread_count(), chunks));
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) body(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex failure_mutex;
  std::exception_ptr failure;
  std::size_t failed_chunk = chunks;
  auto loop = [&] {
    for (std::size_t c = next++; c < chunks; c = next++) {
      try {
        body(c);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (c < failed_chunk) {
          failed_chunk = c;
          failure = std::current_exception();
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (int w = 1; w < workers; ++w) pool.emplace_back(loop);
  loop();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Sum of f(i) for i in [0, count). Chunk boundaries and the final
/// reduction order are fixed, so the result does not depend on the number of
/// threads.
template <class F>
double deterministic_sum(std::size_t count, F&& f) {
  const std::size_t chunks = (count + detail::kChunk - 1) / detail::kChunk;
  std::vector<double> partial(chunks, 0.0);
  parallel_chunks(chunks, [&](std::size_t c) {
    CompensatedSum s;
    const std::size_t end = std::min(count, (c + 1) * detail::kChunk);
    for (std::size_t i = c * detail::kChunk; i < end; ++i) s.add(f(i));
    partial[c] = s.value();
  });
  CompensatedSum total;
  for (double p : partial) total.add(p);
  return total.value();
}

/// Evaluates f(i) for every i into an output vector, in parallel.
template <class T, class F>
std::vector<T> parallel_map(std::size_t count, F&& f) {
  std::vector<T> out(count);
  const std::size_t chunks = (count + detail::kChunk - 1) / detail::kChunk;
  parallel_chunks(chunks, [&](std::size_t c) {
    const std::size_t end = std::min(count, (c + 1) * detail::kChunk);
    for (std::size_t i = c * detail::kChunk; i < end; ++i) out[i] = f(i);
  });
  return out;
}

}  // namespace rfl
