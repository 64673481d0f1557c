#ifndef STOKESHOM_FFT_HPP
#define STOKESHOM_FFT_HPP

#include <Eigen/Dense>
#include <complex>
#include <vector>

namespace stokeshom {

// Real-to-complex transform on an n^dim periodic grid. Axis 0 is the fastest
// index of the real array and the halved axis of the spectrum.
class PeriodicFFT {
 public:
  PeriodicFFT(int dim, int n);
  ~PeriodicFFT();
  PeriodicFFT(const PeriodicFFT&) = delete;
  PeriodicFFT& operator=(const PeriodicFFT&) = delete;

  int dim() const { return dim_; }
  int n() const { return n_; }
  std::size_t real_size() const { return real_size_; }
  std::size_t complex_size() const { return complex_size_; }
  int half() const { return n_ / 2 + 1; }

  void forward(const Eigen::ArrayXd& in, Eigen::ArrayXcd& out);
  // Unnormalized inverse; callers divide by real_size().
  void inverse(const Eigen::ArrayXcd& in, Eigen::ArrayXd& out);

  // Frequency index per axis for spectral position q (axis 0 in [0, n/2]).
  void frequency(std::size_t q, int* xi) const;

 private:
  int dim_, n_;
  std::size_t real_size_, complex_size_;
  double* rbuf_;
  void* cbuf_;
  void* fwd_;
  void* inv_;
};

// Type-I sine transform of length m (FFTW RODFT00), unnormalized.
class SineTransform {
 public:
  explicit SineTransform(int m);
  ~SineTransform();
  SineTransform(const SineTransform&) = delete;
  SineTransform& operator=(const SineTransform&) = delete;
  // Two-dimensional transform of an m x m block stored with axis 0 fastest.
  void apply2d(Eigen::ArrayXd& data);
  int size() const { return m_; }

 private:
  int m_;
  double* buf_;
  void* plan_;
};

// Two-dimensional cosine transforms (REDFT10 forward, REDFT01 inverse).
class CosineTransform {
 public:
  explicit CosineTransform(int m);
  ~CosineTransform();
  CosineTransform(const CosineTransform&) = delete;
  CosineTransform& operator=(const CosineTransform&) = delete;
  void forward2d(Eigen::ArrayXd& data);
  void inverse2d(Eigen::ArrayXd& data);
  int size() const { return m_; }

 private:
  int m_;
  double* buf_;
  void* fwd_;
  void* inv_;
};

}  // namespace stokeshom

#endif
