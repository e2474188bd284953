#pragma once

// Capture protocols (how a patch is imaged at enrollment and at verification)
// and a deterministic parallel map for independent trials.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <thread>
#include <vector>

#include "normpuf/core.hpp"
#include "normpuf/estimator.hpp"
#include "normpuf/optics.hpp"
#include "normpuf/surfacegen.hpp"

namespace normpuf {

struct Protocol {
  LightConfig lights = LightConfig::scanner();
  RenderOptions render{};

  static Protocol scanner(double noise_sigma) {
    Protocol p;
    p.lights = LightConfig::scanner();
    p.render.noise_sigma = noise_sigma;
    return p;
  }

  static Protocol mobile(int k, double noise_sigma, int max_shift = 4) {
    Protocol p;
    p.lights = LightConfig::mobile(k);
    p.render.noise_sigma = noise_sigma;
    p.render.max_shift = max_shift;
    return p;
  }
};

/// Render, align, estimate.
inline NormMap acquire(const SurfacePatch& patch, const Protocol& protocol, std::uint64_t seed) {
  return extract_feature(render(patch, protocol.lights, protocol.render, seed));
}

/// Runs fn(0..n-1) on up to `threads` workers; results are stored by index so
/// the output never depends on scheduling. The first exception is rethrown.
template <class T>
std::vector<T> parallel_map(std::size_t n, const std::function<T(std::size_t)>& fn, unsigned threads = 0) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::optional<T>> slots(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex err_mu;
  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        std::lock_guard lk(err_mu);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
  std::vector<T> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace normpuf
