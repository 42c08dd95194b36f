#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "specfun.hpp"

namespace su11 {


class DiskPoint {
 public:
  DiskPoint(cplx z) : z_(z) {  // NOLINT: implicit from complex by design
    if (!(std::abs(z) < 1.0)) throw std::domain_error("point outside the open unit disk");
  }
  DiskPoint(double x) : DiskPoint(cplx(x, 0.0)) {}  // NOLINT
  cplx z() const { return z_; }
  operator cplx() const { return z_; }  // NOLINT

 private:
  cplx z_;
};

// SU(1,1) element [[a, b], [conj b, conj a]].
class GroupElement {
 public:
  GroupElement() = default;
  GroupElement(cplx a, cplx b) : a_(a), b_(b) {
    double d = determinant();
    double scale = std::norm(a);
    if (!(std::abs(d - 1.0) <= 1e-10 * std::max(1.0, scale)))
      throw std::invalid_argument("group element violates |a|^2 - |b|^2 = 1 (got " + std::to_string(d) + ")");
  }

  cplx a() const { return a_; }
  cplx b() const { return b_; }
  double determinant() const { return std::norm(a_) - std::norm(b_); }

  GroupElement inverse() const { return GroupElement(std::conj(a_), -b_, Unchecked{}); }

  friend GroupElement operator*(const GroupElement& g, const GroupElement& h) {
    return GroupElement(g.a_ * h.a_ + g.b_ * std::conj(h.b_), g.a_ * h.b_ + g.b_ * std::conj(h.a_), Unchecked{});
  }

 private:
  struct Unchecked {};
  GroupElement(cplx a, cplx b, Unchecked) : a_(a), b_(b) {}
  cplx a_{1.0, 0.0};
  cplx b_{0.0, 0.0};
};

inline GroupElement rotation(double theta) { return GroupElement(std::polar(1.0, theta), 0.0); }

// g.z = (a z - conj b) / (-b z + conj a). Composition: mobius(g, mobius(h, z)) = mobius(h * g, z).
inline cplx mobius(const GroupElement& g, cplx z) {
  return (g.a() * z - std::conj(g.b())) / (-g.b() * z + std::conj(g.a()));
}

inline DiskPoint mobius(const GroupElement& g, DiskPoint z) { return DiskPoint(mobius(g, z.z())); }

// Element with mobius(g, 0) = w, a real positive.
inline GroupElement transporter(DiskPoint w) {
  double a = 1.0 / std::sqrt(1.0 - std::norm(w.z()));
  return GroupElement(a, -std::conj(w.z()) * a);
}

enum class RadialRule { legendre, jacobi };

// Gauss rule for int_0^1 phi(u) (1-u)^alpha du. Nodes ascending.
struct RadialGauss {
  std::vector<double> nodes;
  std::vector<double> one_minus;  // 1 - u_i, computed without cancellation
  std::vector<double> log_weights;
  double alpha = 0.0;
};

inline RadialGauss gauss_jacobi_unit(std::size_t n, double alpha) {
  if (n == 0) throw std::invalid_argument("radial rule needs at least one node");
  if (!(alpha > -1.0)) throw std::invalid_argument("Jacobi exponent must exceed -1");
  const double beta = 0.0;
  const double ab = alpha + beta;
  auto a_coef = [&](std::size_t j) {
    double jj = static_cast<double>(j);
    if (j == 0) return ab == 0.0 ? 0.0 : (beta - alpha) / (ab + 2.0);
    return (beta * beta - alpha * alpha) / ((2 * jj + ab) * (2 * jj + ab + 2.0));
  };
  auto b_coef = [&](std::size_t j) {
    double jj = static_cast<double>(j);
    double t = 2 * jj + ab;
    return std::sqrt(4.0 * jj * (jj + alpha) * (jj + beta) * (jj + ab) / (t * t * (t + 1.0) * (t - 1.0)));
  };

  Eigen::VectorXd diag(n), sub(n > 1 ? n - 1 : 1);
  for (std::size_t j = 0; j < n; ++j) diag(j) = a_coef(j);
  for (std::size_t j = 1; j < n; ++j) sub(j - 1) = b_coef(j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
  es.computeFromTridiagonal(diag, sub.head(n - 1), Eigen::EigenvaluesOnly);
  Eigen::VectorXd x = es.eigenvalues();

  // orthonormal recurrence, Newton polish and Christoffel weights
  auto eval = [&](double t, double& pn, double& dpn, double& sumsq) {
    double p_prev = 0.0, p = 1.0, d_prev = 0.0, d = 0.0;
    sumsq = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      double bj = j == 0 ? 0.0 : b_coef(j);
      double bn = b_coef(j + 1);
      double p_next = ((t - a_coef(j)) * p - bj * p_prev) / bn;
      double d_next = ((t - a_coef(j)) * d + p - bj * d_prev) / bn;
      p_prev = p;
      p = p_next;
      d_prev = d;
      d = d_next;
      if (j + 1 < n) sumsq += p * p;
    }
    pn = p;
    dpn = d;
  };

  double log_mu0 = (ab + 1.0) * std::numbers::ln2 + log_gamma(alpha + 1.0) + log_gamma(beta + 1.0) -
                   log_gamma(ab + 2.0);
  RadialGauss r;
  r.alpha = alpha;
  r.nodes.resize(n);
  r.one_minus.resize(n);
  r.log_weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    double t = x(static_cast<Eigen::Index>(i));
    double pn, dpn, sumsq;
    for (int it = 0; it < 2; ++it) {
      eval(t, pn, dpn, sumsq);
      if (dpn != 0.0 && std::isfinite(pn / dpn)) {
        double step = pn / dpn;
        if (std::abs(step) < 1e-6) t -= step;
      }
    }
    eval(t, pn, dpn, sumsq);
    if (!std::isfinite(sumsq)) throw std::runtime_error("Jacobi rule: weight evaluation overflowed");
    // u = (1 + x)/2, (1 - u)^alpha = 2^{-alpha} (1 - x)^alpha, du = dx/2
    r.nodes[i] = 0.5 * (1.0 + t);
    r.one_minus[i] = 0.5 * (1.0 - t);
    r.log_weights[i] = log_mu0 - std::log(sumsq) - (alpha + 1.0) * std::numbers::ln2;
  }
  return r;
}

namespace detail {

template <class T>
struct Accumulator {
  CompensatedSum re;
  void add(T x) { re.add(x); }
  T value() const { return re.value(); }
};

template <>
struct Accumulator<cplx> {
  CompensatedSum re, im;
  void add(cplx x) {
    re.add(x.real());
    im.add(x.imag());
  }
  cplx value() const { return {re.value(), im.value()}; }
};

}  // namespace detail

// Tensor rule for integrals against d iota = dA / (pi (1 - |z|^2)^2).
// With u = |z|^2: int h d iota = int_0^1 (1/(2 pi)) int h d theta du / (1 - u)^2.
class DiskQuadrature {
 public:
  DiskQuadrature(std::size_t radial_count, std::size_t angular_count, double min_decay,
                 RadialRule rule = RadialRule::legendre)
      : radial_count_(radial_count), angular_count_(angular_count), min_decay_(min_decay), rule_(rule) {
    if (!(min_decay >= 2.0))
      throw std::invalid_argument("quadrature min_decay must be >= 2 (got " + std::to_string(min_decay) + ")");
    if (radial_count == 0 || angular_count == 0) throw std::invalid_argument("quadrature needs nodes");
    radial_ = gauss_jacobi_unit(radial_count, rule == RadialRule::jacobi ? min_decay - 2.0 : 0.0);
    cos_.resize(angular_count);
    sin_.resize(angular_count);
    for (std::size_t j = 0; j < angular_count; ++j) {
      double th = 2.0 * pi * static_cast<double>(j) / static_cast<double>(angular_count);
      cos_[j] = std::cos(th);
      sin_[j] = std::sin(th);
    }
  }

  std::size_t radial_count() const { return radial_count_; }
  std::size_t angular_count() const { return angular_count_; }
  double min_decay() const { return min_decay_; }
  RadialRule rule() const { return rule_; }
  const RadialGauss& radial() const { return radial_; }

  // Degree in u integrated exactly for h = (1-u)^{s} poly(u) with s - min_decay a natural number
  // (Legendre: any s >= 2 integer).
  std::size_t exactness_degree() const { return 2 * radial_count_ - 1; }

  std::size_t size() const { return radial_count_ * angular_count_; }

  double ring_radius(std::size_t i) const { return std::sqrt(radial_.nodes[i]); }
  // log of the ring weight for integrands (1 - |z|^2)^s g, angular average excluded
  double ring_log_weight(std::size_t i, double s) const {
    return radial_.log_weights[i] + (s - radial_.alpha - 2.0) * std::log(radial_.one_minus[i]);
  }
  double angle(std::size_t j) const { return 2.0 * pi * static_cast<double>(j) / static_cast<double>(angular_count_); }
  cplx unit_node(std::size_t j) const { return {cos_[j], sin_[j]}; }

  std::vector<cplx> nodes() const {
    std::vector<cplx> out;
    out.reserve(size());
    for (std::size_t i = 0; i < radial_count_; ++i) {
      double r = std::sqrt(radial_.nodes[i]);
      for (std::size_t j = 0; j < angular_count_; ++j) out.emplace_back(r * cos_[j], r * sin_[j]);
    }
    return out;
  }

  // Weights for plain integrands h; may overflow for large Jacobi exponents, use integrate_weighted then.
  std::vector<double> weights() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t i = 0; i < radial_count_; ++i) {
      double w = std::exp(radial_.log_weights[i] - (radial_.alpha + 2.0) * std::log(radial_.one_minus[i])) /
                 static_cast<double>(angular_count_);
      for (std::size_t j = 0; j < angular_count_; ++j) out.push_back(w);
    }
    return out;
  }

  // int (1 - |z|^2)^s g(z) d iota(z)
  template <class G>
  auto integrate_weighted(double s, G&& g) const {
    using T = std::decay_t<decltype(g(cplx{}))>;
    detail::Accumulator<T> total;
    for (std::size_t i = 0; i < radial_count_; ++i) {
      double lw = radial_.log_weights[i] + (s - radial_.alpha - 2.0) * std::log(radial_.one_minus[i]);
      double w = std::exp(lw);
      if (w == 0.0) continue;
      double r = std::sqrt(radial_.nodes[i]);
      detail::Accumulator<T> ring;
      for (std::size_t j = 0; j < angular_count_; ++j) ring.add(g(cplx(r * cos_[j], r * sin_[j])));
      total.add(ring.value() * (w / static_cast<double>(angular_count_)));
    }
    return total.value();
  }

  template <class H>
  auto integrate(H&& h) const {
    return integrate_weighted(0.0, std::forward<H>(h));
  }

  // As integrate_weighted, but each ring uses angles clustered at phi with width ((1-r)/(1+r))^{1/2};
  // for integrands with a boundary peak in direction phi.
  template <class G>
  auto integrate_weighted_focused(double s, double phi, G&& g) const {
    using T = std::decay_t<decltype(g(cplx{}))>;
    detail::Accumulator<T> total;
    const double m = static_cast<double>(angular_count_);
    for (std::size_t i = 0; i < radial_count_; ++i) {
      double lw = radial_.log_weights[i] + (s - radial_.alpha - 2.0) * std::log(radial_.one_minus[i]);
      double w = std::exp(lw);
      if (w == 0.0) continue;
      double r = std::sqrt(radial_.nodes[i]);
      double eps = std::sqrt((1.0 - r) / (1.0 + r));
      detail::Accumulator<T> ring;
      for (std::size_t j = 0; j < angular_count_; ++j) {
        double sj = 2.0 * pi * (static_cast<double>(j) + 0.5) / m - pi;
        double c = std::cos(0.5 * sj), sn = std::sin(0.5 * sj);
        double th = phi + 2.0 * std::atan2(eps * sn, c);
        double jac = eps / (c * c + eps * eps * sn * sn);
        ring.add(g(std::polar(r, th)) * jac);
      }
      total.add(ring.value() * (w / m));
    }
    return total.value();
  }

 private:
  std::size_t radial_count_;
  std::size_t angular_count_;
  double min_decay_;
  RadialRule rule_;
  RadialGauss radial_;
  std::vector<double> cos_, sin_;
};

inline DiskQuadrature build_quadrature(std::size_t radial_count, std::size_t angular_count, double min_decay,
                                       RadialRule rule = RadialRule::legendre) {
  return DiskQuadrature(radial_count, angular_count, min_decay, rule);
}

// |int h(g.z) d iota - int h d iota|
template <class H>
double invariant_measure_check(const GroupElement& g, H&& h, const DiskQuadrature& q) {
  auto moved = q.integrate([&](cplx z) { return h(mobius(g, z)); });
  auto plain = q.integrate(h);
  return std::abs(moved - plain);
}

}  // namespace su11
