#ifndef RPARETO_FFT_HPP
#define RPARETO_FFT_HPP

#include <complex>
#include <vector>

namespace rpareto {

// In-place iterative radix-2 FFT. Size must be a power of two.
// Forward transform uses the e^{-2*pi*i*jk/n} kernel; the inverse is
// unscaled (divide by n yourself if needed).
inline void fft_inplace(std::complex<double>* a, int n, bool inverse) {
  if (n <= 1) return;
  for (int i = 1, j = 0; i < n; ++i) {
    int bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (int len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * M_PI / len;
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (int i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (int j = 0; j < len / 2; ++j) {
        const std::complex<double> u = a[i + j];
        const std::complex<double> v = a[i + j + len / 2] * w;
        a[i + j] = u + v;
        a[i + j + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// N-dimensional FFT over a row-major array (last axis fastest). Each
// dimension must be a power of two.
inline void fft_nd(std::vector<std::complex<double>>& a,
                   const std::vector<int>& dims, bool inverse) {
  const int total = int(a.size());
  std::vector<std::complex<double>> line;
  int stride = 1;
  for (int axis = int(dims.size()) - 1; axis >= 0; --axis) {
    const int n = dims[axis];
    if (n > 1) {
      line.resize(n);
      const int block = stride * n;
      for (int base = 0; base < total; base += block) {
        for (int off = 0; off < stride; ++off) {
          for (int k = 0; k < n; ++k) line[k] = a[base + off + k * stride];
          fft_inplace(line.data(), n, inverse);
          for (int k = 0; k < n; ++k) a[base + off + k * stride] = line[k];
        }
      }
    }
    stride *= n;
  }
}

inline int next_pow2(int n) {
  int p = 1;
  while (p < n) p <<= 1;
  return p;
}

}  // namespace rpareto

#endif
