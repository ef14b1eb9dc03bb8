// Thin FFTW wrapper: cached in-place plans, safe to execute from several threads.
#pragma once

#include <fftw3.h>

#include <map>
#include <mutex>
#include <span>
#include <utility>

#include "lpcsim/signal_core.hpp"

namespace lpcsim::fft {

namespace detail {

class PlanCache {
 public:
  static PlanCache& instance() {
    static PlanCache cache;
    return cache;
  }

  fftw_plan get(std::size_t n, int sign) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(n, sign);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    auto* buf = fftw_alloc_complex(n);
    fftw_plan plan = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (plan == nullptr) throw Error("fftw: plan creation failed");
    plans_.emplace(key, plan);
    return plan;
  }

  PlanCache(const PlanCache&) = delete;
  PlanCache& operator=(const PlanCache&) = delete;

 private:
  PlanCache() = default;
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  std::mutex mutex_;
  std::map<std::pair<std::size_t, int>, fftw_plan> plans_;
};

inline void execute(std::span<Complex> data, int sign) {
  if (data.empty()) return;
  fftw_plan plan = PlanCache::instance().get(data.size(), sign);
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(plan, ptr, ptr);
}

}  // namespace detail

/// In-place unnormalized forward transform, X[k] = sum x[n] exp(-2 pi i k n / N).
inline void forward(std::span<Complex> data) { detail::execute(data, FFTW_FORWARD); }

/// In-place unnormalized inverse transform, x[n] = sum X[k] exp(+2 pi i k n / N).
inline void inverse(std::span<Complex> data) { detail::execute(data, FFTW_BACKWARD); }

/// Angular frequency (rad/s) of every bin in transform order.
inline std::vector<double> angular_frequencies(std::size_t n, double sample_rate) {
  std::vector<double> w(n);
  const double dw = 2.0 * kPi * sample_rate / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto signed_k = k < (n + 1) / 2 ? static_cast<double>(k) : static_cast<double>(k) - static_cast<double>(n);
    w[k] = signed_k * dw;
  }
  return w;
}

}  // namespace lpcsim::fft
