#include "nlpn/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <new>

namespace nlpn {
namespace {

// The FFTW planner is not re-entrant.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

void* fftw_aligned_alloc(std::size_t bytes) {
  void* p = fftw_malloc(bytes == 0 ? 1 : bytes);
  if (p == nullptr) throw std::bad_alloc();
  return p;
}

void fftw_aligned_free(void* p) noexcept { fftw_free(p); }

Fft::Fft(std::size_t n, FftDirection dir) : n_(n), plan_(nullptr) {
  if (n == 0) throw InvalidArgument("fft: zero length");
  std::lock_guard lock(planner_mutex());
  auto* buf = fftw_alloc_complex(n);
  const int sign = dir == FftDirection::kForward ? FFTW_FORWARD : FFTW_BACKWARD;
  plan_ = fftw_plan_dft_1d(static_cast<int>(n), buf, buf, sign, FFTW_ESTIMATE);
  fftw_free(buf);
  if (plan_ == nullptr) throw NumericFailure("fft: planner failed");
}

Fft::~Fft() {
  std::lock_guard lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
}

void Fft::execute(std::span<cd> data) const {
  if (data.size() != n_) throw InvalidArgument("fft: length mismatch");
  auto* p = reinterpret_cast<fftw_complex*>(data.data());
  fftw_execute_dft(static_cast<fftw_plan>(plan_), p, p);
}

std::shared_ptr<const Fft> fft_plan(std::size_t n, FftDirection dir) {
  static std::mutex cache_mutex;
  static std::map<std::pair<std::size_t, int>, std::shared_ptr<const Fft>> cache;
  const auto key = std::make_pair(n, static_cast<int>(dir));
  std::lock_guard lock(cache_mutex);
  auto it = cache.find(key);
  if (it != cache.end()) return it->second;
  auto plan = std::make_shared<const Fft>(n, dir);
  cache.emplace(key, plan);
  return plan;
}

void fft_inplace(CVec& x) { fft_plan(x.size(), FftDirection::kForward)->execute(x); }

void ifft_inplace(CVec& x) {
  fft_plan(x.size(), FftDirection::kBackward)->execute(x);
  const double scale = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v *= scale;
}

CVec fft(std::span<const cd> x) {
  CVec y(x.begin(), x.end());
  fft_inplace(y);
  return y;
}

CVec ifft(std::span<const cd> x) {
  CVec y(x.begin(), x.end());
  ifft_inplace(y);
  return y;
}

}  // namespace nlpn
