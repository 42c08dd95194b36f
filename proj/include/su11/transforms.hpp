#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "bergman.hpp"
#include "disk.hpp"
#include "specfun.hpp"

namespace su11 {

// e_{lambda,b}(z) = ((1-|z|^2)/|z-b|^2)^{(1 - i lambda)/2}, principal branch of a positive base.
inline cplx eigenfunction_value(cplx lambda, cplx b, cplx z) {
  double lp = std::log1p(-std::norm(z)) - std::log(std::norm(z - b));
  cplx e = (1.0 - cplx(0.0, 1.0) * lambda) * 0.5;
  return std::exp(e * lp);
}

struct RadialTerm {
  double exponent;  // s in (1 - |z|^2)^s
  double coeff;
};

// sum_t coeff_t (1 - |z|^2)^{s_t}
struct RadialPoly {
  std::vector<RadialTerm> terms;
};

struct Eigenfunction {
  double lambda;
  cplx b;
};

struct Sampled {
  std::function<cplx(cplx)> fn;
  double min_decay;
  std::optional<double> sup_bound;
  bool real_valued = false;
};

class DiskFunction {
 public:
  static DiskFunction radial(std::vector<RadialTerm> terms) {
    if (terms.empty()) throw std::invalid_argument("radial function needs at least one term");
    for (auto& t : terms)
      if (!std::isfinite(t.exponent) || !std::isfinite(t.coeff)) throw std::invalid_argument("radial term not finite");
    return DiskFunction(RadialPoly{std::move(terms)});
  }
  // (1 - |z|^2)^s
  static DiskFunction power(double s, double coeff = 1.0) { return radial({{s, coeff}}); }
  static DiskFunction eigen(double lambda, cplx b) {
    if (std::abs(std::abs(b) - 1.0) > 1e-14) throw std::invalid_argument("boundary point must have |b| = 1");
    return DiskFunction(Eigenfunction{lambda, b});
  }
  static DiskFunction sampled(std::function<cplx(cplx)> fn, double min_decay, std::optional<double> sup_bound = {},
                              bool real_valued = false) {
    return DiskFunction(Sampled{std::move(fn), min_decay, sup_bound, real_valued});
  }

  const auto& form() const { return form_; }
  const RadialPoly* as_radial() const { return std::get_if<RadialPoly>(&form_); }
  const Eigenfunction* as_eigen() const { return std::get_if<Eigenfunction>(&form_); }

  double min_decay() const {
    if (auto r = as_radial()) {
      double s = r->terms.front().exponent;
      for (auto& t : r->terms) s = std::min(s, t.exponent);
      return s;
    }
    if (as_eigen()) return 0.5;
    return std::get<Sampled>(form_).min_decay;
  }

  std::optional<double> sup_bound() const {
    if (auto r = as_radial()) {
      if (min_decay() < 0.0) return std::nullopt;
      double s = 0.0;
      for (auto& t : r->terms) s += std::abs(t.coeff);
      return s;
    }
    if (as_eigen()) return std::nullopt;
    return std::get<Sampled>(form_).sup_bound;
  }

  bool real_valued() const {
    if (as_radial()) return true;
    if (as_eigen()) return false;
    return std::get<Sampled>(form_).real_valued;
  }

  cplx operator()(cplx z) const {
    if (auto r = as_radial()) {
      double l = std::log1p(-std::norm(z));
      double s = 0.0;
      for (auto& t : r->terms) s += t.coeff * std::exp(t.exponent * l);
      return s;
    }
    if (auto e = as_eigen()) return eigenfunction_value(e->lambda, e->b, z);
    return std::get<Sampled>(form_).fn(z);
  }

 private:
  template <class F>
  explicit DiskFunction(F f) : form_(std::move(f)) {}
  std::variant<RadialPoly, Eigenfunction, Sampled> form_;
};

namespace detail {

inline void require_decay(const DiskFunction& f, Weight nu, const char* what) {
  if (!(f.min_decay() + nu.value() >= 2.0))
    throw std::domain_error(std::string(what) + ": insufficient decay, min_decay + nu = " +
                            std::to_string(f.min_decay() + nu.value()) + " < 2");
}

}  // namespace detail

// R_nu(A)(z) = (1 - |z|^2)^nu A(z, z)
inline cplx covariant_symbol(const TruncatedOperator& a, DiskPoint z) {
  auto cv = coherent_vector(a.weight(), z.z(), a.degree());
  return cv.coeffs.dot(a.matrix() * cv.coeffs);
}

// Diagonal of T_f for radial f: d_m = (nu-1) sum_t c_t (nu)_m / (nu + s_t - 1)_{m+1}.
inline std::vector<double> toeplitz_diagonal(const DiskFunction& f, Weight nu, std::size_t N) {
  auto r = f.as_radial();
  if (!r) throw std::invalid_argument("toeplitz_diagonal needs a radial function");
  detail::require_decay(f, nu, "toeplitz_diagonal");
  const double v = nu.value();
  std::vector<double> d(N + 1);
  for (const auto& t : r->terms) {
    // ratio d_{m+1}/d_m = (nu + m) / (nu + s + m); seed from the log form
    double a = v + t.exponent - 1.0;
    double lv = std::log(v - 1.0) - std::log(a);
    CompensatedSum acc;
    acc.add(lv);
    for (std::size_t m = 0; m <= N; ++m) {
      if (m > 0) acc.add(std::log1p(-(t.exponent) / (a + static_cast<double>(m))));
      d[m] += t.coeff * std::exp(acc.value());
    }
  }
  return d;
}

struct ToeplitzOptions {
  std::size_t radial = 200;
  std::size_t angular = 0;  // 0: 2N + 2
};

// T_f = (nu - 1) R_nu^*(f) truncated to degrees <= N.
inline TruncatedOperator toeplitz_operator(const DiskFunction& f, Weight nu, std::size_t N,
                                           ToeplitzOptions opt = {}) {
  detail::require_decay(f, nu, "toeplitz_operator");
  const auto dim = static_cast<Eigen::Index>(N + 1);
  if (f.as_radial()) {
    auto d = toeplitz_diagonal(f, nu, N);
    Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(dim, dim);
    for (Eigen::Index i = 0; i < dim; ++i) m(i, i) = d[static_cast<std::size_t>(i)];
    return {TruncatedSpace{nu, N}, std::move(m), true};
  }
  // grid route: ring-wise angular Fourier coefficients F_i(k) = avg_j f(r_i e^{i theta_j}) e^{-i k theta_j}
  const std::size_t M = opt.angular ? opt.angular : 2 * N + 2;
  DiskQuadrature q(opt.radial, M, nu.value(), RadialRule::jacobi);
  const double v = nu.value();
  std::vector<double> lnorm(N + 1);
  for (std::size_t j = 0; j <= N; ++j) lnorm[j] = -0.5 * log_monomial_norm_sq(nu, j);
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(dim, dim);
  std::vector<cplx> samples(M), fk(2 * N + 1);
  for (std::size_t i = 0; i < q.radial_count(); ++i) {
    double r = q.ring_radius(i);
    double lw = q.ring_log_weight(i, v);
    for (std::size_t j = 0; j < M; ++j) samples[j] = f(r * q.unit_node(j));
    for (std::size_t kk = 0; kk <= 2 * N; ++kk) {
      long k = static_cast<long>(kk) - static_cast<long>(N);
      detail::Accumulator<cplx> acc;
      for (std::size_t j = 0; j < M; ++j) acc.add(samples[j] * std::polar(1.0, -static_cast<double>(k) * q.angle(j)));
      fk[kk] = acc.value() / static_cast<double>(M);
    }
    double lr = std::log(r);
    for (std::size_t n = 0; n <= N; ++n) {
      for (std::size_t m = 0; m <= N; ++m) {
        double la = lw + lnorm[m] + lnorm[n] + static_cast<double>(m + n) * lr;
        out(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n)) += std::exp(la) * fk[m + N - n];
      }
    }
  }
  out *= v - 1.0;
  bool herm = f.real_valued();
  if (herm) out = (0.5 * (out + out.adjoint())).eval();
  return {TruncatedSpace{nu, N}, std::move(out), herm};
}

// int (1 - |y|^2)^nu f(g.y) d iota(y) with g.0 = z
template <class F>
cplx transported_integral(F&& f, Weight nu, cplx z, const DiskQuadrature& q, std::optional<cplx> peak = {}) {
  auto g = transporter(z);
  auto moved = [&](cplx y) { return cplx(f(mobius(g, y))); };
  if (peak) {
    double phi = std::arg(mobius(g.inverse(), *peak));
    return q.integrate_weighted_focused(nu.value(), phi, moved);
  }
  return q.integrate_weighted(nu.value(), moved);
}

// B_nu((1-|x|^2)^s)(z) = (1-|z|^2)^s / (nu + s - 1) sum_n ((s)_n)^2 / (n! (nu + s)_n) |z|^{2n}
inline double berezin_radial_power(double s, Weight nu, double r2) {
  const double v = nu.value();
  CompensatedSum sum;
  double t = 1.0;
  for (std::size_t n = 0; n < 10000000; ++n) {
    sum.add(t);
    double dn = static_cast<double>(n);
    t *= (s + dn) * (s + dn) / ((dn + 1.0) * (v + s + dn)) * r2;
    if (t == 0.0 || (t < 1e-18 * std::abs(sum.value()) && (s + dn) * (s + dn) <= (dn + 1.0) * (v + s + dn))) break;
  }
  return std::exp(s * std::log1p(-r2)) / (v + s - 1.0) * sum.value();
}

inline DiskQuadrature default_berezin_quadrature() { return build_quadrature(400, 512, 2.0); }

// B_nu(f)(z) = int ((1-|z|^2)(1-|x|^2)/|1 - z conj x|^2)^nu f(x) d iota(x)
inline cplx berezin_transform(const DiskFunction& f, Weight nu, DiskPoint z, const DiskQuadrature& q) {
  detail::require_decay(f, nu, "berezin_transform");
  if (auto r = f.as_radial()) {
    double s = 0.0, r2 = std::norm(z.z());
    for (auto& t : r->terms) s += t.coeff * berezin_radial_power(t.exponent, nu, r2);
    return s;
  }
  if (auto e = f.as_eigen()) return transported_integral(f, nu, z.z(), q, e->b);
  return transported_integral(f, nu, z.z(), q);
}

inline cplx berezin_transform(const DiskFunction& f, Weight nu, DiskPoint z) {
  if (f.as_radial()) return berezin_transform(f, nu, z, build_quadrature(1, 1, 2.0));
  return berezin_transform(f, nu, z, default_berezin_quadrature());
}

// Coefficients of g^{-1}.z^i scaled to unit norm, through degree N; requires g.0 = w.
inline Eigen::VectorXcd husimi_vector(Weight nu, std::size_t i, const GroupElement& g, std::size_t N) {
  return group_action_column(g.inverse(), nu, i, N);
}

namespace detail {

inline double husimi_value(const TruncatedOperator& a, std::size_t i, const GroupElement& g) {
  auto v = husimi_vector(a.weight(), i, g, a.support_degree());
  auto d = v.size();
  return v.dot(a.matrix().topLeftCorner(d, d) * v).real();
}

}  // namespace detail

// H_nu^i(A)(g.0) = ((nu)_i / i!) <A g^{-1} z^i, g^{-1} z^i>
inline double husimi_with(const TruncatedOperator& a, std::size_t i, const GroupElement& g) {
  if (!(std::abs(mobius(g, cplx(0.0))) <= 0.99)) throw std::domain_error("husimi: |w| exceeds 0.99");
  return detail::husimi_value(a, i, g);
}

inline double husimi(const TruncatedOperator& a, std::size_t i, DiskPoint w) {
  if (!(std::abs(w.z()) <= 0.99)) throw std::domain_error("husimi: |w| exceeds 0.99");
  return husimi_with(a, i, transporter(w));
}

// int H_nu^i(A) d iota; exact for the finite support of A up to the radial rule
inline double husimi_integral(const TruncatedOperator& a, std::size_t i, std::size_t radial = 0,
                              std::size_t angular = 0) {
  std::size_t n = a.support_degree() + i;
  if (radial == 0) radial = n + 8;
  if (angular == 0) angular = 2 * n + 4;
  auto q = build_quadrature(radial, angular, a.weight().value(), RadialRule::jacobi);
  return q.integrate([&](cplx w) { return detail::husimi_value(a, i, transporter(w)); });
}

// int psi(H_nu^i(A)) d iota for psi with psi(0) = 0
template <class Psi>
double husimi_functional_integral(const TruncatedOperator& a, std::size_t i, Psi&& psi, std::size_t radial,
                                  std::size_t angular) {
  auto q = build_quadrature(radial, angular, a.weight().value(), RadialRule::jacobi);
  return q.integrate([&](cplx w) { return psi(detail::husimi_value(a, i, transporter(w))); });
}

// E_{mu,k}(f) = ((mu)_k/k!) sum_j (-1)^j binom(k,j) B_{mu+j}(f); with nu, the finite version
// E^nu_{mu,k}(f) = C^2 sum_j (-1)^j binom(k,j) ((nu+k-j)_k/(nu)_k) B_{mu+j}(f).
inline double e_mu_k(const DiskFunction& f, Weight mu, std::size_t k, DiskPoint z, std::optional<Weight> nu,
                     const DiskQuadrature& q) {
  CompensatedSum s;
  const double m = mu.value();
  for (std::size_t j = 0; j <= k; ++j) {
    double c = binomial(k, j);
    if (nu) c *= std::exp(log_pochhammer(nu->value() + static_cast<double>(k - j), k) - log_pochhammer(nu->value(), k));
    double b = berezin_transform(f, Weight(m + static_cast<double>(j)), z, q).real();
    s.add(j % 2 == 0 ? c * b : -c * b);
  }
  double pre = nu ? channel_constant_sq(mu, *nu, k) : std::exp(log_pochhammer(m, k) - log_factorial(k));
  return pre * s.value();
}

inline double e_mu_k(const DiskFunction& f, Weight mu, std::size_t k, DiskPoint z, std::optional<Weight> nu = {}) {
  if (f.as_radial()) return e_mu_k(f, mu, k, z, nu, build_quadrature(1, 1, 2.0));
  return e_mu_k(f, mu, k, z, nu, default_berezin_quadrature());
}

}  // namespace su11
