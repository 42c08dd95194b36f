#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "disk.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "specfun.hpp"
#include "transforms.hpp"

namespace su11 {

class BoundaryPoint {
 public:
  BoundaryPoint(cplx b) : b_(b) {  // NOLINT: implicit by design
    if (!(std::abs(std::abs(b) - 1.0) <= 1e-14)) throw std::invalid_argument("boundary point must satisfy |b| = 1");
  }
  static BoundaryPoint at_angle(double theta) { return BoundaryPoint(std::polar(1.0, theta)); }
  cplx b() const { return b_; }

 private:
  cplx b_;
};

inline cplx eigenfunction(cplx lambda, BoundaryPoint b, DiskPoint z) { return eigenfunction_value(lambda, b.b(), z.z()); }

// phi_{n,lambda}(z) = (1/2pi) int e_{lambda,b}(z) b^n d theta, trapezoid doubled until stable to 1e-10
inline cplx spherical_function(long n, cplx lambda, DiskPoint z) {
  if (!(std::abs(z.z()) <= 0.99)) throw std::domain_error("spherical_function: |z| exceeds 0.99");
  auto sum_at = [&](std::size_t m, std::size_t offset, std::size_t stride) {
    detail::Accumulator<cplx> acc;
    for (std::size_t j = offset; j < m; j += stride) {
      double th = 2.0 * pi * static_cast<double>(j) / static_cast<double>(m);
      acc.add(eigenfunction_value(lambda, std::polar(1.0, th), z.z()) * std::polar(1.0, static_cast<double>(n) * th));
    }
    return acc.value();
  };
  std::size_t m = 64;
  cplx total = sum_at(m, 0, 1);
  cplx prev = total / static_cast<double>(m);
  for (int it = 0; it < 20; ++it) {
    // new nodes are the odd ones of the doubled grid
    total += sum_at(2 * m, 1, 2);
    m *= 2;
    cplx cur = total / static_cast<double>(m);
    if (std::abs(cur - prev) < 1e-10) return cur;
    prev = cur;
  }
  throw std::runtime_error("spherical_function: trapezoid rule did not converge");
}

// max over samples of |(nu - 1) B_nu(e_{lambda,b})(z) / e_{lambda,b}(z) - berezin_multiplier(nu, lambda)|
inline double eigen_relation_residual(Weight nu, double lambda, std::span<const cplx> samples, const DiskQuadrature& q,
                                      BoundaryPoint b = BoundaryPoint(1.0), unsigned threads = 1) {
  auto f = DiskFunction::eigen(lambda, b.b());
  const double target = berezin_multiplier(nu, lambda);
  std::vector<double> res(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    cplx z = samples[i];
    cplx ratio = (nu.value() - 1.0) * berezin_transform(f, nu, z, q) / f(z);
    res[i] = std::abs(ratio - target);
  });
  return res.empty() ? 0.0 : *std::max_element(res.begin(), res.end());
}

inline double eigen_relation_residual(Weight nu, double lambda, std::span<const cplx> samples) {
  return eigen_relation_residual(nu, lambda, samples, default_berezin_quadrature());
}

namespace detail {

inline double log_berezin_eigenvalue(Weight nu, double lambda) {
  if (nu.is_integer()) return log_berezin_eigenvalue_product(static_cast<std::size_t>(nu.value()), lambda);
  return log_berezin_eigenvalue_gamma(nu.value(), lambda);
}

}  // namespace detail

// b_nu(lambda)^{-1} b_{nu0}(lambda), the multiplier of ((nu-1) B_nu)^{-1} (nu0-1) B_{nu0} on the
// eigenline labelled lambda in the stated parametrization of b_nu.
inline double inverse_multiplier(Weight nu, Weight nu0, double lambda) {
  if (!(nu.value() >= nu0.value()) || nu0.value() < 2.0) throw std::domain_error("inverse_multiplier requires nu >= nu0 >= 2");
  return std::exp(detail::log_berezin_eigenvalue(nu0, lambda) - detail::log_berezin_eigenvalue(nu, lambda));
}

// sup over real lambda of inverse_multiplier, attained at lambda = 0:
// prod_{k<nu0} (k-1/2)^2 / (Gamma(nu0) Gamma(nu0-1)) * pi Gamma(nu) Gamma(nu-1) / Gamma(nu-1/2)^2
inline double inverse_multiplier_bound(std::size_t nu, std::size_t nu0) {
  if (nu < nu0 || nu0 < 2) throw std::domain_error("inverse_multiplier_bound requires nu >= nu0 >= 2");
  double l = 0.0;
  for (std::size_t k = 1; k < nu0; ++k) l += 2.0 * std::log(static_cast<double>(k) - 0.5);
  double x = static_cast<double>(nu), x0 = static_cast<double>(nu0);
  l -= log_gamma(x0) + log_gamma(x0 - 1.0);
  l += std::log(pi) + log_gamma(x) + log_gamma(x - 1.0) - 2.0 * log_gamma(x - 0.5);
  return std::exp(l);
}

struct ChainEstimate {
  double estimate;
  double half_width;  // 95% confidence
  std::size_t samples;
};

inline constexpr std::size_t chain_streams = 64;

// I_n(nu) = (nu-1)^n int prod_i (1-|z_i|^2)^nu / prod_{i<n} |1 - z_i conj z_{i+1}|^nu d iota^n
inline ChainEstimate chained_kernel_integral(std::size_t n, Weight nu, std::uint64_t seed, std::size_t sample_count,
                                             unsigned threads = 1) {
  if (n == 0) throw std::invalid_argument("chained_kernel_integral: n must be >= 1");
  if (n == 1) return {1.0, 0.0, 0};
  if (sample_count < 2) throw std::invalid_argument("chained_kernel_integral: need at least two samples");
  const double v = nu.value();
  const double inv = 1.0 / (v - 1.0);
  std::vector<double> sums(chain_streams, 0.0), sq(chain_streams, 0.0), bad(chain_streams, 0.0);
  std::vector<std::size_t> counts(chain_streams);
  for (std::size_t s = 0; s < chain_streams; ++s)
    counts[s] = sample_count / chain_streams + (s < sample_count % chain_streams ? 1 : 0);
  parallel_for(chain_streams, threads, [&](std::size_t s) {
    Rng rng = Rng::stream(seed, s);
    CompensatedSum acc, acc2;
    std::vector<cplx> z(n);
    for (std::size_t t = 0; t < counts[s]; ++t) {
      for (std::size_t i = 0; i < n; ++i) {
        // u = |z|^2 with density (nu-1)(1-u)^{nu-2}
        double u = -std::expm1(std::log(rng.uniform_open0()) * inv);
        z[i] = std::polar(std::sqrt(u), 2.0 * pi * rng.uniform());
      }
      double l = 0.0;
      for (std::size_t i = 0; i + 1 < n; ++i) l -= v * std::log(std::abs(1.0 - z[i] * std::conj(z[i + 1])));
      double x = std::exp(l);
      if (!std::isfinite(x)) bad[s] = 1.0;
      acc.add(x);
      acc2.add(x * x);
    }
    sums[s] = acc.value();
    sq[s] = acc2.value();
  });
  for (double b : bad)
    if (b != 0.0) throw std::runtime_error("chained_kernel_integral: non-finite integrand");
  CompensatedSum total, total2;
  for (std::size_t s = 0; s < chain_streams; ++s) {
    total.add(sums[s]);
    total2.add(sq[s]);
  }
  const double N = static_cast<double>(sample_count);
  double mean = total.value() / N;
  double var = std::max(0.0, (total2.value() - N * mean * mean) / (N - 1.0));
  return {mean, 1.96 * std::sqrt(var / N), sample_count};
}

// I_2(nu) by tensor quadrature: inner integral over z_2 for each z_1 node
inline double chained_kernel_quadrature(Weight nu, std::size_t radial, std::size_t angular) {
  const double v = nu.value();
  auto q = build_quadrature(radial, angular, v, RadialRule::jacobi);
  return (v - 1.0) * (v - 1.0) * q.integrate_weighted(v, [&](cplx z1) {
    return q.integrate_weighted(v, [&](cplx z2) { return std::exp(-v * std::log(std::abs(1.0 - z1 * std::conj(z2)))); });
  });
}

}  // namespace su11
