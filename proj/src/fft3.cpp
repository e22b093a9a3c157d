#include "ovl/fft3.hpp"

#include <fftw3.h>

#include <cstring>

#include "ovl/errors.hpp"

namespace ovl {

Fft3::Fft3(int n) : n_(n) {
  if (n < 8 || (n & (n - 1)) != 0)
    throw ConfigError("Fft3: grid size must be a power of two >= 8");
  const size_t total = static_cast<size_t>(n) * n * n;
  buf_ = fftw_malloc(sizeof(fftw_complex) * total);
  if (!buf_) throw IoError("Fft3: allocation failed");
  auto* b = static_cast<fftw_complex*>(buf_);
  // FFTW_BACKWARD carries exp(+i 2 pi j k / N), matching the forward
  // convention here; plans are created once and reused (FFTW_ESTIMATE keeps
  // planning deterministic and cheap).
  plan_forward_ = fftw_plan_dft_3d(n, n, n, b, b, FFTW_BACKWARD, FFTW_ESTIMATE);
  plan_inverse_ = fftw_plan_dft_3d(n, n, n, b, b, FFTW_FORWARD, FFTW_ESTIMATE);
  if (!plan_forward_ || !plan_inverse_) throw IoError("Fft3: planning failed");
}

Fft3::~Fft3() {
  fftw_destroy_plan(static_cast<fftw_plan>(plan_forward_));
  fftw_destroy_plan(static_cast<fftw_plan>(plan_inverse_));
  fftw_free(buf_);
}

void Fft3::run(std::vector<std::complex<double>>& field, bool forward_dir) const {
  const size_t total = static_cast<size_t>(n_) * n_ * n_;
  if (field.size() != total) throw ConfigError("Fft3: field size mismatch");
  auto* b = static_cast<fftw_complex*>(buf_);
  // (-1)^(j1+j2+j3) pre-phase while copying in.
  for (int j1 = 0; j1 < n_; ++j1)
    for (int j2 = 0; j2 < n_; ++j2) {
      size_t base = (static_cast<size_t>(j1) * n_ + j2) * n_;
      int parity = (j1 + j2) & 1;
      for (int j3 = 0; j3 < n_; ++j3) {
        const double s = ((parity + j3) & 1) ? -1.0 : 1.0;
        b[base + j3][0] = s * field[base + j3].real();
        b[base + j3][1] = s * field[base + j3].imag();
      }
    }
  fftw_execute(static_cast<fftw_plan>(forward_dir ? plan_forward_ : plan_inverse_));
  const double scale = forward_dir ? 1.0 : 1.0 / static_cast<double>(total);
  for (int k1 = 0; k1 < n_; ++k1)
    for (int k2 = 0; k2 < n_; ++k2) {
      size_t base = (static_cast<size_t>(k1) * n_ + k2) * n_;
      int parity = (k1 + k2) & 1;
      for (int k3 = 0; k3 < n_; ++k3) {
        const double s = (((parity + k3) & 1) ? -1.0 : 1.0) * scale;
        field[base + k3] = {s * b[base + k3][0], s * b[base + k3][1]};
      }
    }
}

void Fft3::forward(std::vector<std::complex<double>>& field) const { run(field, true); }
void Fft3::inverse(std::vector<std::complex<double>>& field) const { run(field, false); }

}
