#include "stokeshom/fft.hpp"

#include <fftw3.h>

#include <cstring>
#include <mutex>

#include "stokeshom/errors.hpp"

namespace stokeshom {

namespace {
// FFTW planning is not thread safe; execution is.
std::mutex& planner_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace

PeriodicFFT::PeriodicFFT(int dim, int n) : dim_(dim), n_(n) {
  if (dim < 1 || dim > 3 || n < 2) throw Error(ErrorKind::InvalidParameter, "unsupported FFT shape");
  real_size_ = 1;
  for (int k = 0; k < dim; ++k) real_size_ *= static_cast<std::size_t>(n);
  complex_size_ = real_size_ / n * static_cast<std::size_t>(n / 2 + 1);
  rbuf_ = fftw_alloc_real(real_size_);
  auto* c = fftw_alloc_complex(complex_size_);
  cbuf_ = c;
  // FFTW is row major with the last index fastest; our axis 0 is fastest.
  int dims[3] = {n, n, n};
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_dft_r2c(dim, dims, rbuf_, c, FFTW_ESTIMATE);
  inv_ = fftw_plan_dft_c2r(dim, dims, c, rbuf_, FFTW_ESTIMATE);
}

PeriodicFFT::~PeriodicFFT() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(rbuf_);
  fftw_free(cbuf_);
}

void PeriodicFFT::forward(const Eigen::ArrayXd& in, Eigen::ArrayXcd& out) {
  std::memcpy(rbuf_, in.data(), real_size_ * sizeof(double));
  fftw_execute(static_cast<fftw_plan>(fwd_));
  out.resize(static_cast<Eigen::Index>(complex_size_));
  std::memcpy(static_cast<void*>(out.data()), cbuf_, complex_size_ * sizeof(fftw_complex));
}

void PeriodicFFT::inverse(const Eigen::ArrayXcd& in, Eigen::ArrayXd& out) {
  std::memcpy(cbuf_, in.data(), complex_size_ * sizeof(fftw_complex));
  fftw_execute(static_cast<fftw_plan>(inv_));
  out.resize(static_cast<Eigen::Index>(real_size_));
  std::memcpy(out.data(), rbuf_, real_size_ * sizeof(double));
}

void PeriodicFFT::frequency(std::size_t q, int* xi) const {
  const int h = n_ / 2 + 1;
  xi[0] = static_cast<int>(q % h);
  q /= h;
  for (int k = 1; k < dim_; ++k) {
    int v = static_cast<int>(q % n_);
    q /= n_;
    xi[k] = v <= n_ / 2 ? v : v - n_;
  }
}

SineTransform::SineTransform(int m) : m_(m) {
  buf_ = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  std::lock_guard<std::mutex> lock(planner_mutex());
  plan_ = fftw_plan_r2r_2d(m, m, buf_, buf_, FFTW_RODFT00, FFTW_RODFT00, FFTW_ESTIMATE);
}

SineTransform::~SineTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(plan_));
  fftw_free(buf_);
}

void SineTransform::apply2d(Eigen::ArrayXd& data) {
  std::memcpy(buf_, data.data(), sizeof(double) * m_ * m_);
  fftw_execute(static_cast<fftw_plan>(plan_));
  std::memcpy(data.data(), buf_, sizeof(double) * m_ * m_);
}

CosineTransform::CosineTransform(int m) : m_(m) {
  buf_ = fftw_alloc_real(static_cast<std::size_t>(m) * m);
  std::lock_guard<std::mutex> lock(planner_mutex());
  fwd_ = fftw_plan_r2r_2d(m, m, buf_, buf_, FFTW_REDFT10, FFTW_REDFT10, FFTW_ESTIMATE);
  inv_ = fftw_plan_r2r_2d(m, m, buf_, buf_, FFTW_REDFT01, FFTW_REDFT01, FFTW_ESTIMATE);
}

CosineTransform::~CosineTransform() {
  std::lock_guard<std::mutex> lock(planner_mutex());
  fftw_destroy_plan(static_cast<fftw_plan>(fwd_));
  fftw_destroy_plan(static_cast<fftw_plan>(inv_));
  fftw_free(buf_);
}

void CosineTransform::forward2d(Eigen::ArrayXd& data) {
  std::memcpy(buf_, data.data(), sizeof(double) * m_ * m_);
  fftw_execute(static_cast<fftw_plan>(fwd_));
  std::memcpy(data.data(), buf_, sizeof(double) * m_ * m_);
}

void CosineTransform::inverse2d(Eigen::ArrayXd& data) {
  std::memcpy(buf_, data.data(), sizeof(double) * m_ * m_);
  fftw_execute(static_cast<fftw_plan>(inv_));
  std::memcpy(data.data(), buf_, sizeof(double) * m_ * m_);
}

}  // namespace stokeshom
