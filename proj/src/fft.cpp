#include "wavefront_lab/fft.hpp"

#include "wavefront_lab/common.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

namespace wfl {

namespace {

class PlanCache {
 public:
  ~PlanCache() {
    for (auto& [key, plan] : plans_) fftw_destroy_plan(plan);
  }

  fftw_plan get(int n, bool inverse) {
    std::lock_guard<std::mutex> lock(mu_);
    const auto key = std::make_pair(n, inverse);
    if (auto it = plans_.find(key); it != plans_.end()) return it->second;
    fftw_complex* buf = fftw_alloc_complex(static_cast<std::size_t>(n));
    fftw_plan plan = fftw_plan_dft_1d(n, buf, buf, inverse ? FFTW_BACKWARD : FFTW_FORWARD,
                                      FFTW_ESTIMATE | FFTW_UNALIGNED);
    fftw_free(buf);
    if (!plan) throw Error(ErrorKind::Unsupported, "FFTW could not create a plan");
    plans_.emplace(key, plan);
    return plan;
  }

 private:
  std::mutex mu_;
  std::map<std::pair<int, bool>, fftw_plan> plans_;
};

PlanCache& cache() {
  static PlanCache c;
  return c;
}

int next_pow2(int v) {
  int m = 1;
  while (m < v) m <<= 1;
  return m;
}

}  // namespace

void fft(cplx* data, int n, bool inverse) {
  fftw_plan plan = cache().get(n, inverse);
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_execute_dft(plan, p, p);
}

void fft_nd(CVec& values, int d, int n, bool inverse) {
  for (int axis = 0; axis < d; ++axis) {
    for_each_line(values, d, n, axis, [&](cplx* line) { fft(line, n, inverse); });
  }
  if (inverse) {
    const double s = 1.0 / static_cast<double>(values.size());
    for (auto& v : values) v *= s;
  }
}

ChirpZ::ChirpZ(int n_in, int n_out, double beta)
    : n_in_(n_in), n_out_(n_out), m_(next_pow2(n_in + n_out - 1)) {
  pre_.resize(static_cast<std::size_t>(n_in));
  post_.resize(static_cast<std::size_t>(n_out));
  // Reduce j^2 modulo the period of the phase where possible to keep
  // arguments small; long double keeps the products exact enough.
  auto chirp = [beta](long m, double sign) {
    const long double arg = 0.5L * static_cast<long double>(beta) * static_cast<long double>(m) *
                            static_cast<long double>(m);
    const long double two_pi = 2.0L * 3.141592653589793238462643383279502884L;
    const long double r = std::fmod(arg, two_pi);
    return std::polar(1.0, sign * static_cast<double>(r));
  };
  for (int j = 0; j < n_in; ++j) pre_[static_cast<std::size_t>(j)] = chirp(j, -1.0);
  for (int k = 0; k < n_out; ++k) post_[static_cast<std::size_t>(k)] = chirp(k, -1.0);
  kernel_.assign(static_cast<std::size_t>(m_), cplx(0.0, 0.0));
  for (int k = 0; k < n_out; ++k) kernel_[static_cast<std::size_t>(k)] = chirp(k, 1.0);
  for (int j = 1; j < n_in; ++j) kernel_[static_cast<std::size_t>(m_ - j)] = chirp(j, 1.0);
  fft(kernel_, false);
}

void ChirpZ::apply(const cplx* in, cplx* out) const {
  CVec buf(static_cast<std::size_t>(m_), cplx(0.0, 0.0));
  for (int j = 0; j < n_in_; ++j) buf[static_cast<std::size_t>(j)] = in[j] * pre_[static_cast<std::size_t>(j)];
  fft(buf, false);
  for (int i = 0; i < m_; ++i) buf[static_cast<std::size_t>(i)] *= kernel_[static_cast<std::size_t>(i)];
  fft(buf, true);
  const double scale = 1.0 / m_;
  for (int k = 0; k < n_out_; ++k) {
    out[k] = buf[static_cast<std::size_t>(k)] * post_[static_cast<std::size_t>(k)] * scale;
  }
}

}  // namespace wfl
