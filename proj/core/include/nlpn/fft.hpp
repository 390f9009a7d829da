#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "nlpn/common.hpp"

namespace nlpn {

/// Allocator returning SIMD-aligned storage from fftw_malloc, so every
/// buffer shares the alignment assumed by cached plans.
template <class T>
struct FftwAllocator {
  using value_type = T;
  FftwAllocator() = default;
  template <class U>
  FftwAllocator(const FftwAllocator<U>&) noexcept {}
  T* allocate(std::size_t n);
  void deallocate(T* p, std::size_t) noexcept;
  template <class U>
  bool operator==(const FftwAllocator<U>&) const noexcept { return true; }
};

void* fftw_aligned_alloc(std::size_t bytes);
void fftw_aligned_free(void* p) noexcept;

template <class T>
T* FftwAllocator<T>::allocate(std::size_t n) {
  return static_cast<T*>(fftw_aligned_alloc(n * sizeof(T)));
}
template <class T>
void FftwAllocator<T>::deallocate(T* p, std::size_t) noexcept {
  fftw_aligned_free(p);
}

using CVec = std::vector<cd, FftwAllocator<cd>>;

enum class FftDirection { kForward, kBackward };

/// In-place complex DFT of fixed length. Forward uses e^{-i2πkn/N};
/// backward is unnormalized. Plans are shared through a process-wide cache.
class Fft {
 public:
  Fft(std::size_t n, FftDirection dir);
  ~Fft();
  Fft(const Fft&) = delete;
  Fft& operator=(const Fft&) = delete;

  std::size_t size() const { return n_; }
  /// `data` must come from FftwAllocator (aligned) and have size() elements.
  void execute(std::span<cd> data) const;

 private:
  std::size_t n_;
  void* plan_;
};

std::shared_ptr<const Fft> fft_plan(std::size_t n, FftDirection dir);

void fft_inplace(CVec& x);
/// Backward transform scaled by 1/N, so ifft(fft(x)) == x.
void ifft_inplace(CVec& x);
CVec fft(std::span<const cd> x);
CVec ifft(std::span<const cd> x);

/// Frequency of DFT bin k for an N-point transform at sample rate fs, in
/// (-fs/2, fs/2].
inline double bin_frequency(std::size_t k, std::size_t n, double fs) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  const long long signed_k = (kk <= nn / 2) ? kk : kk - nn;
  return static_cast<double>(signed_k) * fs / static_cast<double>(n);
}

/// Signed bin index in [-(N-1)/2, N/2].
inline long long signed_bin(std::size_t k, std::size_t n) {
  const auto kk = static_cast<long long>(k);
  const auto nn = static_cast<long long>(n);
  return (kk <= nn / 2) ? kk : kk - nn;
}

}  // namespace nlpn
