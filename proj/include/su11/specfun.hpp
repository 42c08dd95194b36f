#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <string>

namespace su11 {

using cplx = std::complex<double>;

inline constexpr double pi = std::numbers::pi;

// Weight of a holomorphic discrete series space (mu, nu, mu+nu+2k, ...).
class Weight {
 public:
  explicit Weight(double v) : v_(v) {
    if (!(v > 1.0) || !std::isfinite(v))
      throw std::invalid_argument("weight must be a finite real > 1, got " + std::to_string(v));
  }
  double value() const { return v_; }
  bool is_integer() const { return v_ == std::floor(v_); }
  friend bool operator==(Weight, Weight) = default;

 private:
  double v_;
};

// Neumaier compensated sum.
class CompensatedSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  CompensatedSum& operator+=(double x) {
    add(x);
    return *this;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

namespace detail {

inline double stirling_tail(double x) {
  // Bernoulli terms B_{2k}/(2k(2k-1)x^{2k-1}), k = 1..7
  double r = 1.0 / x;
  double r2 = r * r;
  return r * (1.0 / 12 +
              r2 * (-1.0 / 360 +
                    r2 * (1.0 / 1260 +
                          r2 * (-1.0 / 1680 +
                                r2 * (1.0 / 1188 + r2 * (-691.0 / 360360 + r2 * (1.0 / 156)))))));
}

inline std::complex<double> stirling_tail(std::complex<double> z) {
  auto r = 1.0 / z;
  auto r2 = r * r;
  return r * (1.0 / 12 +
              r2 * (-1.0 / 360 +
                    r2 * (1.0 / 1260 +
                          r2 * (-1.0 / 1680 +
                                r2 * (1.0 / 1188 + r2 * (-691.0 / 360360 + r2 * (1.0 / 156)))))));
}

inline constexpr double half_log_two_pi = 0.91893853320467274178032973640562;

}  // namespace detail

// log Gamma(x) for x > 0.
inline double log_gamma(double x) {
  if (!(x > 0.0)) throw std::domain_error("log_gamma: argument must be positive");
  if (!std::isfinite(x)) return x;
  double prod = 1.0;
  while (x < 15.0) {
    prod *= x;
    x += 1.0;
  }
  return (x - 0.5) * std::log(x) - x + detail::half_log_two_pi + detail::stirling_tail(x) -
         std::log(prod);
}

// log Gamma(z) on the principal branch for Re z > 0.
inline std::complex<double> log_gamma(std::complex<double> z) {
  if (!(z.real() > 0.0)) throw std::domain_error("log_gamma: complex argument needs Re z > 0");
  std::complex<double> shift = 0.0;
  while (z.real() < 15.0) {
    shift += std::log(z);
    z += 1.0;
  }
  return (z - 0.5) * std::log(z) - z + detail::half_log_two_pi + detail::stirling_tail(z) - shift;
}

inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

// log|value| with sign; sign == 0 encodes an exact zero.
struct SignedLog {
  double log_abs = 0.0;
  int sign = 1;
  double value() const { return sign == 0 ? 0.0 : sign * std::exp(log_abs); }
};

namespace detail {

// Product of a, a+1, ..., a+n-1 (all positive) as mantissa * 2^exponent.
inline double scaled_product(double a, std::size_t n, long& exponent) {
  double m = 1.0;
  exponent = 0;
  for (std::size_t i = 0; i < n; ++i) {
    m *= a + static_cast<double>(i);
    if (m > 0x1.0p500 || m < 0x1.0p-500) {
      int e;
      m = std::frexp(m, &e);
      exponent += e;
    }
  }
  return m;
}

inline constexpr std::size_t product_route_limit = 4096;

// log (a)_n for a > 0.
inline double log_pochhammer_positive(double a, std::size_t n) {
  if (n == 0) return 0.0;
  if (n <= product_route_limit) {
    long e;
    double m = scaled_product(a, n, e);
    return std::log(m) + static_cast<double>(e) * std::numbers::ln2;
  }
  return log_gamma(a + static_cast<double>(n)) - log_gamma(a);
}

}  // namespace detail

inline SignedLog log_pochhammer_signed(double a, std::size_t n) {
  if (n == 0) return {0.0, 1};
  if (a > 0.0) return {detail::log_pochhammer_positive(a, n), 1};
  double neg = -a;
  if (neg == std::floor(neg)) {
    // a = -m: a factor vanishes once n > m
    if (static_cast<double>(n) > neg) return {-std::numeric_limits<double>::infinity(), 0};
    // (−m)(−m+1)...(−m+n−1) = (−1)^n m(m−1)...(m−n+1)
    double lo = neg - static_cast<double>(n) + 1.0;
    int sign = (n % 2 == 0) ? 1 : -1;
    return {detail::log_pochhammer_positive(lo, n), sign};
  }
  std::size_t count = static_cast<std::size_t>(std::ceil(neg));
  if (count > n) count = n;
  // negative factors a..a+count-1 have absolute values neg, neg-1, ..., neg-count+1
  double log_neg = detail::log_pochhammer_positive(neg - static_cast<double>(count) + 1.0, count);
  double log_pos = count < n ? detail::log_pochhammer_positive(a + static_cast<double>(count), n - count) : 0.0;
  int sign = (count % 2 == 0) ? 1 : -1;
  return {log_neg + log_pos, sign};
}

inline double log_pochhammer(double a, std::size_t n) {
  auto r = log_pochhammer_signed(a, n);
  if (r.sign <= 0) throw std::domain_error("log_pochhammer: product is not positive");
  return r.log_abs;
}

// (a)_n = a(a+1)...(a+n-1); sequential product below the log-route limit, so the
// recurrence (a)_{n+1} = (a)_n (a+n) holds to rounding.
inline double pochhammer(double a, std::size_t n) {
  if (n <= detail::product_route_limit) {
    if (a > 0.0) {
      long e;
      double m = detail::scaled_product(a, n, e);
      return std::ldexp(m, static_cast<int>(std::clamp<long>(e, -4000, 4000)));
    }
    double p = 1.0;
    for (std::size_t i = 0; i < n; ++i) p *= a + static_cast<double>(i);
    return p;
  }
  return log_pochhammer_signed(a, n).value();
}

// 2F1(-n, b; c; 1) = (c-b)_n / (c)_n
inline double gauss_2f1_unit(std::size_t n, double b, double c) {
  if (c <= 0.0 && c == std::floor(c) && -c < static_cast<double>(n))
    throw std::domain_error("gauss_2f1_unit: pole, (c)_j vanishes for c = " + std::to_string(c));
  auto num = log_pochhammer_signed(c - b, n);
  if (num.sign == 0) return 0.0;
  auto den = log_pochhammer_signed(c, n);
  return num.sign * den.sign * std::exp(num.log_abs - den.log_abs);
}

inline double log_factorial(std::size_t n) { return detail::log_pochhammer_positive(1.0, n); }

inline double binomial(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  if (n <= 50) {
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
  }
  return std::exp(log_factorial(n) - log_factorial(k) - log_factorial(n - k));
}

// C^2_{mu,nu,k} = (mu)_k (nu)_k / (k! (mu+nu+k-1)_k)
inline double channel_constant_sq(Weight mu, Weight nu, std::size_t k) {
  double m = mu.value(), n = nu.value();
  return std::exp(log_pochhammer(m, k) + log_pochhammer(n, k) - log_factorial(k) -
                  log_pochhammer(m + n + static_cast<double>(k) - 1.0, k));
}

namespace detail {

inline double log_cosh(double x) {
  x = std::abs(x);
  return x + std::log1p(std::exp(-2.0 * x)) - std::numbers::ln2;
}

}  // namespace detail

// log b_nu(lambda) with |Gamma(i lambda + nu - 1/2)|^2 by the finite product
// (pi / cosh(pi lambda)) prod_{k=1}^{nu-1} ((k-1/2)^2 + lambda^2).
inline double log_berezin_eigenvalue_product(std::size_t nu, double lambda) {
  if (nu < 2) throw std::domain_error("berezin_eigenvalue: integer weight must be >= 2");
  double l2 = lambda * lambda;
  double q = 0.25 + l2;
  double s = std::log(pi * q) - detail::log_cosh(pi * lambda);
  for (std::size_t k = 2; k < nu; ++k) {
    double kk = static_cast<double>(k);
    s += std::log1p(q / (kk * (kk - 1.0)));
  }
  return s;
}

inline double log_berezin_eigenvalue_gamma(double nu, double lambda) {
  if (!(nu > 1.0)) throw std::domain_error("berezin_eigenvalue: weight must exceed 1");
  auto lg = log_gamma(std::complex<double>(nu - 0.5, lambda));
  return 2.0 * lg.real() - log_gamma(nu) - log_gamma(nu - 1.0);
}

// b_nu(lambda) = |Gamma(i lambda + nu - 1/2)|^2 / (Gamma(nu) Gamma(nu-1)).
inline double berezin_eigenvalue(Weight nu, double lambda) {
  if (nu.is_integer()) return std::exp(log_berezin_eigenvalue_product(static_cast<std::size_t>(nu.value()), lambda));
  return std::exp(log_berezin_eigenvalue_gamma(nu.value(), lambda));
}

inline double berezin_eigenvalue_gamma_route(Weight nu, double lambda) {
  return std::exp(log_berezin_eigenvalue_gamma(nu.value(), lambda));
}

// Eigenvalue of (nu-1)B_nu on e_{lambda,b} = P^{(1-i lambda)/2}.
inline double berezin_multiplier(Weight nu, double lambda) { return berezin_eigenvalue(nu, 0.5 * lambda); }

// |c(lambda)|^{-2}
inline double plancherel_density(double lambda) {
  double x = 0.5 * pi * lambda;
  return x * std::tanh(x);
}

}  // namespace su11
