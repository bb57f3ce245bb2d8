#pragma once

#include <complex>
#include <memory>
#include <vector>

namespace wfl {

using cplx = std::complex<double>;
using CVec = std::vector<cplx>;

// Unnormalised 1-D DFT through FFTW; forward uses e^{-2 pi i jk/n}.
// Plans are cached per (n, direction); planning is serialised.
void fft(cplx* data, int n, bool inverse);
inline void fft(CVec& data, bool inverse) { fft(data.data(), static_cast<int>(data.size()), inverse); }

// Transform along every axis of an n^d array; the inverse is normalised.
void fft_nd(CVec& values, int d, int n, bool inverse);

// S_k = sum_{j < n_in} a_j e^{-i beta k j} for k < n_out (Bluestein).
class ChirpZ {
 public:
  ChirpZ(int n_in, int n_out, double beta);
  void apply(const cplx* in, cplx* out) const;
  int n_in() const { return n_in_; }
  int n_out() const { return n_out_; }

 private:
  int n_in_;
  int n_out_;
  int m_;
  CVec pre_;     // e^{-i beta j^2 / 2}
  CVec post_;    // e^{-i beta k^2 / 2}
  CVec kernel_;  // FFT of e^{i beta m^2 / 2} laid out for circular convolution
};

// Applies a 1-D linear map to every line of an n^d array along `axis`
// (axis 0 is the slowest index).
template <class F>
void for_each_line(CVec& values, int d, int n, int axis, F&& f) {
  if (d == 1) {
    f(values.data());
    return;
  }
  CVec line(static_cast<std::size_t>(n));
  const std::size_t nn = static_cast<std::size_t>(n);
  for (std::size_t other = 0; other < nn; ++other) {
    for (std::size_t j = 0; j < nn; ++j) {
      line[j] = axis == 0 ? values[j * nn + other] : values[other * nn + j];
    }
    f(line.data());
    for (std::size_t j = 0; j < nn; ++j) {
      (axis == 0 ? values[j * nn + other] : values[other * nn + j]) = line[j];
    }
  }
}

}  // namespace wfl
