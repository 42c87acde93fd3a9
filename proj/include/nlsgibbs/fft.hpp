#pragma once

#include <fftw3.h>

#include <complex>
#include <map>
#include <mutex>
#include <span>

namespace nlsgibbs {

using Complex = std::complex<double>;

namespace detail {

// fftw planning is not thread safe; execution with the new-array API is.
inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

struct PlanPair {
  fftw_plan forward = nullptr;
  fftw_plan backward = nullptr;
};

inline PlanPair plans_for(int size) {
  static std::map<int, PlanPair> cache;
  std::lock_guard lock(fftw_planner_mutex());
  auto it = cache.find(size);
  if (it != cache.end()) return it->second;
  fftw_complex* a = fftw_alloc_complex(size);
  fftw_complex* b = fftw_alloc_complex(size);
  PlanPair p;
  p.forward = fftw_plan_dft_1d(size, a, b, FFTW_FORWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  p.backward = fftw_plan_dft_1d(size, a, b, FFTW_BACKWARD, FFTW_ESTIMATE | FFTW_UNALIGNED);
  fftw_free(a);
  fftw_free(b);
  cache.emplace(size, p);
  return p;
}

}  // namespace detail

/// Unnormalized complex DFT of a fixed size. out[m] = sum_k in[k] e^{-+2 pi i k m / M}.
class Fft {
 public:
  explicit Fft(int size) : size_(size), plans_(detail::plans_for(size)) {}

  int size() const { return size_; }

  void forward(std::span<const Complex> in, std::span<Complex> out) const {
    fftw_execute_dft(plans_.forward, cast(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
  }
  void backward(std::span<const Complex> in, std::span<Complex> out) const {
    fftw_execute_dft(plans_.backward, cast(in.data()), reinterpret_cast<fftw_complex*>(out.data()));
  }

 private:
  static fftw_complex* cast(const Complex* p) {
    return reinterpret_cast<fftw_complex*>(const_cast<Complex*>(p));
  }
  int size_;
  detail::PlanPair plans_;
};

}  // namespace nlsgibbs
