#pragma once

#include <complex>
#include <vector>

namespace ovl {

// 3D transform pair on centered grids: x_j = (j - N/2) dx per axis and
// lambda_k = (k - N/2) dlambda, with dlambda * dx = 2*pi/N.
//
//   forward:  F(k) = sum_j f(j) exp(+i lambda_k . x_j)
//   inverse:  f(j) = (1/N^3) sum_k F(k) exp(-i lambda_k . x_j)
//
// Centered phases are folded into (-1)^(j1+j2+j3) pre/post factors around the
// unshifted FFT; this requires N divisible by 4, which power-of-two grids
// with N >= 8 satisfy. Layout is row-major [j1][j2][j3].
class Fft3 {
 public:
  explicit Fft3(int n);
  ~Fft3();
  Fft3(const Fft3&) = delete;
  Fft3& operator=(const Fft3&) = delete;

  int n() const { return n_; }
  void forward(std::vector<std::complex<double>>& field) const;
  void inverse(std::vector<std::complex<double>>& field) const;

 private:
  void run(std::vector<std::complex<double>>& field, bool forward_dir) const;

  int n_;
  void* buf_;            // fftw_complex workspace
  void* plan_forward_;   // fftw plan for exp(+i...) core
  void* plan_inverse_;
};

}
