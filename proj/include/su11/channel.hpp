#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "bergman.hpp"
#include "parallel.hpp"
#include "specfun.hpp"

namespace su11 {

inline std::size_t default_output_degree(Weight nu, std::size_t k) {
  auto v = static_cast<std::size_t>(std::ceil(nu.value()));
  return std::max<std::size_t>(4 * (v + k), 512);
}

struct ChannelParams {
  Weight mu;
  Weight nu;
  std::size_t k = 0;
  std::size_t output_degree = 512;

  Weight target_weight() const { return Weight(mu.value() + nu.value() + 2.0 * static_cast<double>(k)); }
  // Tr T(A) = trace_factor * Tr A
  double trace_factor() const {
    return (mu.value() + nu.value() + 2.0 * static_cast<double>(k) - 1.0) / (mu.value() - 1.0);
  }
};

namespace detail {

// log ||z^j||^2_w for j = 0..n by cumulative log1p sums.
inline std::vector<double> log_norm_table(double w, std::size_t n) {
  std::vector<double> t(n + 1);
  CompensatedSum s;
  t[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    s.add(-std::log1p((w - 1.0) / static_cast<double>(j)));
    t[j] = s.value();
  }
  return t;
}

inline std::vector<double> log_factorial_table(std::size_t n) {
  std::vector<double> t(n + 1);
  CompensatedSum s;
  t[0] = 0.0;
  for (std::size_t j = 1; j <= n; ++j) {
    s.add(std::log(static_cast<double>(j)));
    t[j] = s.value();
  }
  return t;
}

}  // namespace detail

// Entries of P_k^* in orthonormal bases: beta(p, m) = <P_k^* e_p, e_m (x) e_n>, n = p + k - m.
class IsometryTable {
 public:
  IsometryTable(const ChannelParams& params, std::size_t max_p, std::size_t max_m)
      : k_(params.k), max_p_(max_p), max_m_(max_m) {
    const double mu = params.mu.value(), nu = params.nu.value();
    const double sigma = params.target_weight().value();
    lz_ = detail::log_norm_table(mu, max_m);
    lw_ = detail::log_norm_table(nu, max_p + k_);
    ls_ = detail::log_norm_table(sigma, max_p);
    lf_ = detail::log_factorial_table(max_p + k_);
    half_log_c_ = 0.5 * std::log(channel_constant_sq(params.mu, params.nu, k_));
    for (std::size_t j = 0; j <= k_; ++j) {
      lpm_.push_back(log_pochhammer(mu, j));
      lpn_.push_back(log_pochhammer(nu, j));
      binom_.push_back(binomial(k_, j));
    }
  }

  std::size_t k() const { return k_; }

  double beta(std::size_t p, std::size_t m) const {
    if (p > max_p_ || m > max_m_) throw std::out_of_range("IsometryTable: index beyond table");
    if (m > p + k_) return 0.0;
    const std::size_t n = p + k_ - m;
    const double base = half_log_c_ + 0.5 * (ls_[p] - lz_[m] - lw_[n]) + lf_[m] + lf_[n];
    CompensatedSum s;
    const std::size_t j_lo = k_ > n ? k_ - n : 0;
    const std::size_t j_hi = std::min(k_, m);
    for (std::size_t j = j_lo; j <= j_hi; ++j) {
      double lt = base - lf_[m - j] - lf_[n - k_ + j] - lpm_[j] - lpn_[k_ - j];
      double t = binom_[j] * std::exp(lt);
      s.add(j % 2 == 0 ? t : -t);
    }
    return s.value();
  }

 private:
  std::size_t k_, max_p_, max_m_;
  std::vector<double> lz_, lw_, ls_, lf_, lpm_, lpn_, binom_;
  double half_log_c_;
};

// c_{m,n} with P_k(z^m (x) w^n) = c_{m,n} zeta^{m+n-k}.
class ProjectionCoefficients {
 public:
  ProjectionCoefficients(const ChannelParams& params, std::size_t max_grade)
      : k_(params.k), max_total_(max_grade + params.k) {
    if (max_grade < params.k) throw std::invalid_argument("projection_coefficients: max_grade must be >= k");
    const double mu = params.mu.value(), nu = params.nu.value();
    const double c = std::sqrt(channel_constant_sq(params.mu, params.nu, k_));
    auto lf = detail::log_factorial_table(max_total_);
    table_.resize(max_total_ + 1);
    for (std::size_t m = 0; m <= max_total_; ++m) {
      table_[m].assign(max_total_ - m + 1, 0.0);
      for (std::size_t n = 0; m + n <= max_total_; ++n) {
        if (m + n < k_) continue;
        CompensatedSum s;
        std::size_t j_lo = k_ > n ? k_ - n : 0;
        std::size_t j_hi = std::min(k_, m);
        for (std::size_t j = j_lo; j <= j_hi; ++j) {
          double lt = lf[m] - lf[m - j] + lf[n] - lf[n - k_ + j] - log_pochhammer(mu, j) - log_pochhammer(nu, k_ - j);
          double t = binomial(k_, j) * std::exp(lt);
          s.add(j % 2 == 0 ? t : -t);
        }
        table_[m][n] = c * s.value();
      }
    }
  }

  std::size_t k() const { return k_; }
  std::size_t max_total() const { return max_total_; }

  double operator()(std::size_t m, std::size_t n) const {
    if (m + n > max_total_) throw std::out_of_range("projection coefficient beyond computed grade");
    return table_[m][n];
  }

 private:
  std::size_t k_, max_total_;
  std::vector<std::vector<double>> table_;
};

inline ProjectionCoefficients projection_coefficients(const ChannelParams& params, std::size_t max_grade) {
  return ProjectionCoefficients(params, max_grade);
}

struct PkStarTerm {
  std::size_t m;
  std::size_t n;
  double coefficient;  // of z^m (x) w^n
};

// P_k^* zeta^p in the monomial basis; complete (m + n = p + k).
inline std::vector<PkStarTerm> pk_star_vector(const ChannelParams& params, std::size_t p) {
  ProjectionCoefficients c(params, std::max(p, params.k));
  const double ls = log_monomial_norm_sq(params.target_weight(), p);
  std::vector<PkStarTerm> out;
  for (std::size_t m = 0; m <= p + params.k; ++m) {
    std::size_t n = p + params.k - m;
    double scale = std::exp(ls - log_monomial_norm_sq(params.mu, m) - log_monomial_norm_sq(params.nu, n));
    out.push_back({m, n, c(m, n) * scale});
  }
  return out;
}

// T(A) = P_k (A (x) I_nu) P_k^*, exact on output degrees <= L = params.output_degree.
inline TruncatedOperator apply_channel(const TruncatedOperator& a, const ChannelParams& params, unsigned threads = 1) {
  if (!(a.weight() == params.mu)) throw std::invalid_argument("apply_channel: input weight differs from mu");
  const std::size_t L = params.output_degree;
  const std::size_t N = a.support_degree();
  const std::size_t k = params.k;
  IsometryTable iso(params, L, N);
  const auto& am = a.matrix();
  const auto dim = static_cast<Eigen::Index>(L + 1);

  // beta rows: b[p][m] for m <= min(N, p + k)
  std::vector<std::vector<double>> b(L + 1);
  parallel_for(L + 1, threads, [&](std::size_t p) {
    std::size_t mm = std::min(N, p + k);
    b[p].resize(mm + 1);
    for (std::size_t m = 0; m <= mm; ++m) b[p][m] = iso.beta(p, m);
  });

  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  const bool herm = a.hermitian();
  parallel_for(L + 1, threads, [&](std::size_t p) {
    std::size_t q_lo = herm ? p : (p > N ? p - N : 0);
    std::size_t q_hi = std::min(L, p + N);
    for (std::size_t q = q_lo; q <= q_hi; ++q) {
      // m' = m + q - p
      cplx s = 0.0;
      for (std::size_t m = 0; m < b[p].size(); ++m) {
        if (m + q < p) continue;
        std::size_t mp = m + q - p;
        if (mp >= b[q].size()) break;
        s += b[p][m] * b[q][mp] * am(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m));
      }
      out(static_cast<Eigen::Index>(q), static_cast<Eigen::Index>(p)) = s;
    }
  });
  if (herm) {
    for (Eigen::Index p = 0; p < dim; ++p) {
      out(p, p) = out(p, p).real();
      for (Eigen::Index q = p + 1; q < dim; ++q) out(p, q) = std::conj(out(q, p));
    }
  }
  return TruncatedOperator(TruncatedSpace{params.target_weight(), L}, std::move(out), herm);
}

// Diagonal of T(A) for p = 0..L from the diagonal of A; exact output when A is diagonal.
inline std::vector<double> apply_channel_diagonal(std::span<const double> a_diag, const ChannelParams& params,
                                                  std::size_t L) {
  if (a_diag.empty()) throw std::invalid_argument("apply_channel_diagonal: empty input");
  const std::size_t N = a_diag.size() - 1;
  IsometryTable iso(params, L, N);
  std::vector<double> out(L + 1, 0.0);
  for (std::size_t p = 0; p <= L; ++p) {
    CompensatedSum s;
    for (std::size_t m = 0; m <= std::min(N, p + params.k); ++m) {
      if (a_diag[m] == 0.0) continue;
      double bt = iso.beta(p, m);
      s.add(a_diag[m] * bt * bt);
    }
    out[p] = s.value();
  }
  return out;
}

inline std::vector<double> real_diagonal(const TruncatedOperator& a) {
  std::vector<double> d(a.space().dim());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = a.matrix()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)).real();
  return d;
}

// Estimate of sum_{p > L} <T(A) e_p, e_p>: explicit sum over (L, 64 L] plus twice the
// power-law remainder t(P) P / (mu - 1) for the p^{-mu} decay.
inline double channel_trace_tail(std::span<const double> a_diag, const ChannelParams& params, std::size_t L) {
  const std::size_t P = 64 * std::max<std::size_t>(L, 1);
  auto d = apply_channel_diagonal(a_diag, params, P);
  CompensatedSum s;
  for (std::size_t p = L + 1; p <= P; ++p) s.add(d[p]);
  double remainder = 2.0 * d[P] * static_cast<double>(P) / (params.mu.value() - 1.0);
  return s.value() + remainder;
}

// Polynomial psi(x) = sum_j coeffs[j] x^j with coeffs[0] == 0.
class Polynomial {
 public:
  explicit Polynomial(std::vector<double> coeffs) : c_(std::move(coeffs)) {
    if (c_.empty()) c_.push_back(0.0);
    if (c_[0] != 0.0) throw std::invalid_argument("psi must vanish at 0 (constant coefficient nonzero)");
  }
  static Polynomial monomial(std::size_t j) {
    std::vector<double> c(j + 1, 0.0);
    c[j] = 1.0;
    return Polynomial(std::move(c));
  }
  const std::vector<double>& coeffs() const { return c_; }
  std::size_t degree() const { return c_.size() - 1; }
  double operator()(double x) const {
    double r = 0.0;
    for (std::size_t j = c_.size(); j-- > 0;) r = r * x + c_[j];
    return r;
  }
  double abs_coeff_sum() const {
    double s = 0.0;
    for (double c : c_) s += std::abs(c);
    return s;
  }

 private:
  std::vector<double> c_;
};

inline constexpr double spectrum_window = 1e-9;

inline double functional_trace(std::span<const double> eigenvalues, const Polynomial& psi) {
  CompensatedSum s;
  for (double l : eigenvalues) {
    if (l < -spectrum_window || l > 1.0 + spectrum_window)
      throw std::domain_error("functional_trace: eigenvalue " + std::to_string(l) + " outside [0, 1]");
    s.add(psi(std::clamp(l, 0.0, 1.0)));
  }
  return s.value();
}

inline std::vector<double> hermitian_eigenvalues(const TruncatedOperator& b) {
  if (!b.hermitian()) throw std::invalid_argument("operator is not flagged Hermitian");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(b.matrix(), Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw std::runtime_error("Hermitian eigensolver failed");
  const auto& ev = es.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

inline double functional_trace(const TruncatedOperator& b, const Polynomial& psi) {
  auto ev = hermitian_eigenvalues(b);
  return functional_trace(std::span<const double>(ev), psi);
}

// Square matrix with entries (i, j) stored for |i - j| <= width.
class BandedMatrix {
 public:
  BandedMatrix(std::size_t n, std::size_t width) : n_(n), w_(width), v_(n * (2 * width + 1), cplx(0.0)) {}
  std::size_t size() const { return n_; }
  std::size_t width() const { return w_; }
  cplx operator()(std::size_t i, std::size_t j) const {
    if (i >= n_ || j >= n_ || (i > j ? i - j : j - i) > w_) return 0.0;
    return v_[i * (2 * w_ + 1) + (j + w_ - i)];
  }
  cplx& at(std::size_t i, std::size_t j) { return v_[i * (2 * w_ + 1) + (j + w_ - i)]; }
  double trace() const {
    CompensatedSum s;
    for (std::size_t i = 0; i < n_; ++i) s.add((*this)(i, i).real());
    return s.value();
  }

 private:
  std::size_t n_, w_;
  std::vector<cplx> v_;
};

inline BandedMatrix operator*(const BandedMatrix& a, const BandedMatrix& b) {
  const std::size_t n = a.size(), w = std::min(a.width() + b.width(), n ? n - 1 : 0);
  BandedMatrix c(n, w);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t l_lo = i > a.width() ? i - a.width() : 0, l_hi = std::min(n - 1, i + a.width());
    for (std::size_t l = l_lo; l <= l_hi; ++l) {
      cplx x = a(i, l);
      if (x == 0.0) continue;
      std::size_t j_lo = l > b.width() ? l - b.width() : 0, j_hi = std::min(n - 1, l + b.width());
      for (std::size_t j = j_lo; j <= j_hi; ++j) c.at(i, j) += x * b(l, j);
    }
  }
  return c;
}

// T(A) on output degrees <= L as a band of half-width support_degree(A); same entries as apply_channel.
inline BandedMatrix apply_channel_banded(const TruncatedOperator& a, const ChannelParams& params, std::size_t L,
                                         unsigned threads = 1) {
  if (!(a.weight() == params.mu)) throw std::invalid_argument("apply_channel_banded: input weight differs from mu");
  const std::size_t N = a.support_degree();
  const std::size_t k = params.k;
  IsometryTable iso(params, L, N);
  const auto& am = a.matrix();
  std::vector<std::vector<double>> b(L + 1);
  parallel_for(L + 1, threads, [&](std::size_t p) {
    std::size_t mm = std::min(N, p + k);
    b[p].resize(mm + 1);
    for (std::size_t m = 0; m <= mm; ++m) b[p][m] = iso.beta(p, m);
  });
  BandedMatrix out(L + 1, std::min(N, L));
  parallel_for(L + 1, threads, [&](std::size_t p) {
    std::size_t q_lo = p > N ? p - N : 0, q_hi = std::min(L, p + N);
    for (std::size_t q = q_lo; q <= q_hi; ++q) {
      cplx s = 0.0;
      for (std::size_t m = 0; m < b[p].size(); ++m) {
        if (m + q < p) continue;
        std::size_t mp = m + q - p;
        if (mp >= b[q].size()) break;
        s += b[p][m] * b[q][mp] * am(static_cast<Eigen::Index>(mp), static_cast<Eigen::Index>(m));
      }
      out.at(q, p) = s;
    }
  });
  return out;
}

// sum_j psi_j Tr(T^j)
inline double functional_trace(const BandedMatrix& t, const Polynomial& psi) {
  CompensatedSum s;
  std::optional<BandedMatrix> pw;
  for (std::size_t j = 1; j < psi.coeffs().size(); ++j) {
    pw = pw ? *pw * t : t;
    if (psi.coeffs()[j] != 0.0) s.add(psi.coeffs()[j] * pw->trace());
  }
  return s.value();
}

// Coefficient of (1 - (1 - x^2)^i) in the series for x: (1/2)_{i-1} / (2 i!).
inline double sqrt_series_coefficient(std::size_t i) {
  if (i == 0) throw std::invalid_argument("sqrt_series_coefficient: index starts at 1");
  if (i <= 2000) {
    double c = 0.5;
    for (std::size_t j = 1; j < i; ++j) c *= (static_cast<double>(j) - 0.5) / (static_cast<double>(j) + 1.0);
    return c;
  }
  return 0.5 * std::exp(log_pochhammer(0.5, i - 1) - log_factorial(i));
}

inline std::vector<double> sqrt_series_coefficients(std::size_t count) {
  std::vector<double> c(count);
  double v = 0.5;
  for (std::size_t i = 1; i <= count; ++i) {
    c[i - 1] = v;
    v *= (static_cast<double>(i) - 0.5) / (static_cast<double>(i) + 1.0);
  }
  return c;
}

// diag(e^{i (nu + 2j) theta}), the action of rotation(theta)
inline TruncatedOperator rotation_operator(TruncatedSpace space, double theta) {
  auto d = static_cast<Eigen::Index>(space.dim());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (Eigen::Index j = 0; j < d; ++j)
    m(j, j) = std::polar(1.0, (space.weight.value() + 2.0 * static_cast<double>(j)) * theta);
  return {space, std::move(m)};
}

}  // namespace su11
