/*
 * Copyright 2026 The benchrel Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace benchrel {

/// Runs fn(i) for i in [begin, end) on `threads` workers. Each index must be
/// independent and write only to its own slot; aggregation stays with the
/// caller so results do not depend on the thread count or completion order.
/// threads == 0 picks the hardware concurrency.
template <typename Fn>
void parallel_for(std::size_t begin, std::size_t end, unsigned threads,
                  Fn&& fn) {
  const std::size_t count = end > begin ? end - begin : 0;
  if (threads == 0) threads = std::thread::hardware_concurrency();
  if (threads == 0) threads = 1;
  if (threads == 1 || count <= 1) {
    for (std::size_t i = begin; i < end; ++i) fn(i);
    return;
  }
  if (threads > count) threads = static_cast<unsigned>(count);

  std::vector<std::thread> workers;
  workers.reserve(threads);
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t lo = begin + static_cast<std::size_t>(t) * chunk;
    const std::size_t hi = lo + chunk < end ? lo + chunk : end;
    if (lo >= hi) break;
    workers.emplace_back([&, lo, hi] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace benchrel
