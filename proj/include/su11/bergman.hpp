#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "disk.hpp"
#include "random.hpp"
#include "specfun.hpp"

namespace su11 {

inline constexpr std::size_t default_degree = 256;

struct TruncatedSpace {
  Weight weight;
  std::size_t degree;
  std::size_t dim() const { return degree + 1; }
  friend bool operator==(const TruncatedSpace&, const TruncatedSpace&) = default;
};

// Operator in the orthonormal basis e_j = sqrt((nu)_j / j!) z^j; entry (m, n) is <A e_n, e_m>.
class TruncatedOperator {
 public:
  TruncatedOperator(TruncatedSpace space, Eigen::MatrixXcd matrix, bool hermitian = false)
      : space_(space), matrix_(std::move(matrix)), hermitian_(hermitian) {
    auto d = static_cast<Eigen::Index>(space_.dim());
    if (matrix_.rows() != d || matrix_.cols() != d)
      throw std::invalid_argument("operator matrix size does not match truncation degree");
    if (hermitian_) {
      double dev = (matrix_ - matrix_.adjoint()).cwiseAbs().maxCoeff();
      double scale = std::max(1.0, matrix_.cwiseAbs().maxCoeff());
      if (dev > 1e-12 * scale) throw std::invalid_argument("operator flagged Hermitian is not");
    }
  }

  static TruncatedOperator zero(TruncatedSpace space) {
    auto d = static_cast<Eigen::Index>(space.dim());
    return {space, Eigen::MatrixXcd::Zero(d, d), true};
  }
  static TruncatedOperator identity(TruncatedSpace space) {
    auto d = static_cast<Eigen::Index>(space.dim());
    return {space, Eigen::MatrixXcd::Identity(d, d), true};
  }
  // e_j (x) e_j^*
  static TruncatedOperator basis_projector(TruncatedSpace space, std::size_t j) {
    if (j > space.degree) throw std::out_of_range("basis index beyond truncation degree");
    auto op = zero(space);
    op.matrix_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(j)) = 1.0;
    return op;
  }

  const TruncatedSpace& space() const { return space_; }
  Weight weight() const { return space_.weight; }
  std::size_t degree() const { return space_.degree; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }
  bool hermitian() const { return hermitian_; }

  cplx trace() const { return matrix_.trace(); }
  double hs_norm() const { return matrix_.norm(); }

  bool is_diagonal() const {
    for (Eigen::Index c = 0; c < matrix_.cols(); ++c)
      for (Eigen::Index r = 0; r < matrix_.rows(); ++r)
        if (r != c && matrix_(r, c) != cplx(0.0)) return false;
    return true;
  }

  // highest degree carrying a nonzero entry
  std::size_t support_degree() const {
    std::size_t s = 0;
    for (Eigen::Index c = 0; c < matrix_.cols(); ++c)
      for (Eigen::Index r = 0; r < matrix_.rows(); ++r)
        if (matrix_(r, c) != cplx(0.0)) s = std::max<std::size_t>(s, static_cast<std::size_t>(std::max(r, c)));
    return s;
  }

  TruncatedOperator scaled(double s) const { return {space_, matrix_ * s, hermitian_}; }

  // same operator viewed in a larger or smaller truncation (dropped entries must be zero to be exact)
  TruncatedOperator resized(std::size_t degree) const {
    auto d = static_cast<Eigen::Index>(degree + 1);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
    auto k = std::min(d, matrix_.rows());
    m.topLeftCorner(k, k) = matrix_.topLeftCorner(k, k);
    return {TruncatedSpace{space_.weight, degree}, std::move(m), hermitian_};
  }

 private:
  TruncatedSpace space_;
  Eigen::MatrixXcd matrix_;
  bool hermitian_;
};

// log ||z^j||^2_nu = log(j! / (nu)_j)
inline double log_monomial_norm_sq(Weight nu, std::size_t j) {
  if (j > detail::product_route_limit) return log_factorial(j) - log_pochhammer(nu.value(), j);
  CompensatedSum s;
  const double v1 = nu.value() - 1.0;
  for (std::size_t i = 1; i <= j; ++i) s += -std::log1p(v1 / static_cast<double>(i));
  return s.value();
}

inline double monomial_norm_sq(Weight nu, std::size_t j) { return std::exp(log_monomial_norm_sq(nu, j)); }

// e_j(z)
inline cplx basis_eval(Weight nu, std::size_t j, cplx z) {
  if (j == 0) return 1.0;
  if (z == cplx(0.0)) return 0.0;
  double la = -0.5 * log_monomial_norm_sq(nu, j) + static_cast<double>(j) * std::log(std::abs(z));
  return std::polar(std::exp(la), static_cast<double>(j) * std::arg(z));
}

// (1 - x conj(y))^{-nu}
inline cplx kernel_eval(Weight nu, cplx x, cplx y) {
  cplx base = 1.0 - x * std::conj(y);
  if (nu.is_integer() && nu.value() < 1e6) {
    auto n = static_cast<unsigned long long>(nu.value());
    cplx inv = 1.0 / base, r = 1.0;
    while (n) {
      if (n & 1ULL) r *= inv;
      inv *= inv;
      n >>= 1;
    }
    return r;
  }
  return std::exp(-nu.value() * std::log(base));
}

struct CoherentVector {
  Eigen::VectorXcd coeffs;
  double tail;  // bound on the norm-squared beyond the truncation degree
};

// Coefficients of K_w / ||K_w|| in the orthonormal basis: (1-|w|^2)^{nu/2} sqrt((nu)_m/m!) conj(w)^m.
inline CoherentVector coherent_vector(Weight nu, cplx w, std::size_t N) {
  double r2 = std::norm(w);
  if (!(r2 < 1.0)) throw std::domain_error("coherent_vector: point outside the disk");
  const double v = nu.value();
  Eigen::VectorXcd c(static_cast<Eigen::Index>(N + 1));
  double lr = r2 > 0.0 ? std::log(std::sqrt(r2)) : 0.0;
  double arg = -std::arg(w);
  double base = 0.5 * v * std::log1p(-r2);
  double la = base;
  for (std::size_t m = 0; m <= N; ++m) {
    if (m > 0 && r2 == 0.0) {
      c(static_cast<Eigen::Index>(m)) = 0.0;
      continue;
    }
    if (m > 0) la += 0.5 * std::log1p((v - 1.0) / static_cast<double>(m)) + lr;
    c(static_cast<Eigen::Index>(m)) = std::polar(std::exp(la), static_cast<double>(m) * arg);
  }
  // terms t_m = (1-r2)^nu (nu)_m/m! r2^m; ratio (nu+m)/(m+1) r2 decreases in m
  double tail = 0.0;
  if (r2 > 0.0) {
    double t_next = std::exp(2.0 * base - log_monomial_norm_sq(nu, N + 1) + static_cast<double>(N + 1) * std::log(r2));
    double rho = (v + static_cast<double>(N) + 1.0) / (static_cast<double>(N) + 2.0) * r2;
    tail = rho < 1.0 ? t_next / (1.0 - rho) : 1.0;
  }
  return {std::move(c), std::min(tail, 1.0)};
}

namespace detail {

// In orthonormal H_nu coordinates: out = (a z - conj b) f / (conj a - b z), exact through degree N.
inline void multiply_mobius(Weight nu, cplx a, cplx b, const Eigen::VectorXcd& f, Eigen::VectorXcd& out) {
  const auto n = f.size();
  out.resize(n);
  const double v = nu.value();
  cplx prev = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double r = i == 0 ? 0.0 : std::sqrt(static_cast<double>(i) / (v + static_cast<double>(i) - 1.0));
    cplx d = -std::conj(b) * f(i);
    if (i > 0) d += a * f(i - 1) * r;
    cplx h = (d + b * r * prev) / std::conj(a);
    out(i) = h;
    prev = h;
  }
}

inline cplx pow_neg(cplx base, double v) {
  // base^{-v}: integer v is single valued; otherwise principal branch
  return std::polar(std::pow(std::abs(base), -v), -v * std::arg(base));
}

inline Eigen::VectorXcd lowest_column(Weight nu, cplx a, cplx b, std::size_t N) {
  const double v = nu.value();
  Eigen::VectorXcd c(static_cast<Eigen::Index>(N + 1));
  cplx ab = std::conj(a);
  cplx q = b / ab;
  c(0) = pow_neg(ab, v);
  for (std::size_t n = 1; n <= N; ++n)
    c(static_cast<Eigen::Index>(n)) =
        c(static_cast<Eigen::Index>(n - 1)) * q * std::sqrt((v + static_cast<double>(n) - 1.0) / static_cast<double>(n));
  return c;
}

}  // namespace detail

// Coefficients of g.e_j through degree N, (g.f)(z) = (-b z + conj a)^{-nu} f(g.z).
inline Eigen::VectorXcd group_action_column(const GroupElement& g, Weight nu, std::size_t j, std::size_t N) {
  bool real_a = g.a().imag() == 0.0 && g.a().real() > 0.0;
  if (!nu.is_integer() && !real_a)
    throw std::domain_error("group action for non-integer weight is only single valued for real positive a");
  Eigen::VectorXcd col = detail::lowest_column(nu, g.a(), g.b(), N), next;
  const double v = nu.value();
  for (std::size_t i = 0; i < j; ++i) {
    detail::multiply_mobius(nu, g.a(), g.b(), col, next);
    col = next * std::sqrt((v + static_cast<double>(i)) / (static_cast<double>(i) + 1.0));
  }
  return col;
}

struct GroupActionMatrix {
  TruncatedOperator op;
  double tail;  // max missing norm-squared over the leading half of the columns
};

inline GroupActionMatrix group_action_matrix(const GroupElement& g, Weight nu, std::size_t N,
                                             double tolerance = std::numeric_limits<double>::infinity()) {
  if (!nu.is_integer()) throw std::domain_error("group_action_matrix requires an integer weight");
  if (!(std::abs(mobius(g, cplx(0.0))) <= 0.99)) throw std::domain_error("group_action_matrix: |g.0| exceeds 0.99");
  const auto d = static_cast<Eigen::Index>(N + 1);
  Eigen::MatrixXcd m(d, d);
  Eigen::VectorXcd col = detail::lowest_column(nu, g.a(), g.b(), N), next;
  const double v = nu.value();
  double tail = 0.0;
  for (std::size_t j = 0; j <= N; ++j) {
    m.col(static_cast<Eigen::Index>(j)) = col;
    if (2 * j <= N) tail = std::max(tail, std::max(0.0, 1.0 - col.squaredNorm()));
    if (j == N) break;
    detail::multiply_mobius(nu, g.a(), g.b(), col, next);
    col = next * std::sqrt((v + static_cast<double>(j)) / (static_cast<double>(j) + 1.0));
  }
  if (tail > tolerance)
    throw std::runtime_error("group_action_matrix: truncation tail " + std::to_string(tail) + " exceeds tolerance");
  return {TruncatedOperator(TruncatedSpace{nu, N}, std::move(m)), tail};
}

// Random positive semidefinite operator of given rank supported on degrees <= support, unit trace.
inline TruncatedOperator random_density_operator(TruncatedSpace space, std::size_t rank, std::size_t support,
                                                 std::uint64_t seed) {
  support = std::min(support, space.degree);
  Rng rng(seed);
  auto d = static_cast<Eigen::Index>(space.dim());
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(d, d);
  for (std::size_t r = 0; r < rank; ++r) {
    Eigen::VectorXcd v = Eigen::VectorXcd::Zero(d);
    for (std::size_t i = 0; i <= support; ++i) {
      double x = rng.normal(), y = rng.normal();
      v(static_cast<Eigen::Index>(i)) = cplx(x, y);
    }
    m += v * v.adjoint();
  }
  m /= m.trace().real();
  m = 0.5 * (m + m.adjoint()).eval();
  return {space, std::move(m), true};
}

}  // namespace su11
