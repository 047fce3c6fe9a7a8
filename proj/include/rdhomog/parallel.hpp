#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rdh {

/// Calls body(i) for i in [0, count) on up to `workers` threads. Indices are
/// handed out dynamically, so body must write only to slot i of its output;
/// results are then independent of the worker count. If any call throws, the
/// failure with the lowest index is rethrown as std::runtime_error carrying
/// the index.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::size_t err_index = count;
  std::string err_message;

  auto run = [&] {
    for (std::size_t i = next.fetch_add(1); i < count; i = next.fetch_add(1)) {
      try {
        body(i);
      } catch (const std::exception& e) {
        std::lock_guard lock(err_mutex);
        if (i < err_index) {
          err_index = i;
          err_message = e.what();
        }
      }
    }
  };

  if (workers == 1) {
    run();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(run);
    for (auto& t : pool) t.join();
  }
  if (err_index < count)
    throw std::runtime_error("sample " + std::to_string(err_index) + ": " + err_message);
}

}  // namespace rdh
