#include <catch_amalgamated.hpp>

#include <boost/math/constants/constants.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

#include <cmath>
#include <vector>

#include "su11/specfun.hpp"

using namespace su11;
using Catch::Approx;
using big = boost::multiprecision::cpp_bin_float_50;

namespace {

// b_nu(lambda) in 50 digits: (pi / cosh(pi l)) prod_{k<nu} ((k-1/2)^2 + l^2) / ((nu-1)! (nu-2)!)
double b_oracle(int nu, double lambda) {
  big l = lambda;
  big pi_b = boost::math::constants::pi<big>();
  big v = pi_b / cosh(pi_b * l);
  for (int k = 1; k <= nu - 1; ++k) v *= (big(k) - big(0.5)) * (big(k) - big(0.5)) + l * l;
  for (int k = 1; k <= nu - 1; ++k) v /= k;
  for (int k = 1; k <= nu - 2; ++k) v /= k;
  return static_cast<double>(v);
}

double brute_2f1(int n, double b, double c) {
  big s = 0;
  for (int j = 0; j <= n; ++j) {
    big t = 1;
    for (int i = 0; i < j; ++i) t *= big(-n + i) * (big(b) + i) / ((big(c) + i) * (i + 1));
    s += t;
  }
  return static_cast<double>(s);
}

double brute_constant_norm(double mu, double nu, int k) {
  // ||(z - w)^k||^2 = sum_j binom(k,j)^2 ||z^j||^2_mu ||w^{k-j}||^2_nu
  double s = 0.0;
  for (int j = 0; j <= k; ++j) {
    double b = std::tgamma(k + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(k - j + 1.0));
    double nz = std::tgamma(j + 1.0), nw = std::tgamma(k - j + 1.0);
    for (int i = 0; i < j; ++i) nz /= mu + i;
    for (int i = 0; i < k - j; ++i) nw /= nu + i;
    s += b * b * nz * nw;
  }
  return s;
}

}  // namespace

TEST_CASE("pochhammer small values") {
  CHECK(pochhammer(2, 3) == 24.0);
  CHECK(pochhammer(7.5, 0) == 1.0);
  CHECK(pochhammer(3, 2) == 12.0);
  CHECK(2.0 / pochhammer(3, 2) == Approx(1.0 / 6));
  CHECK(pochhammer(-3, 5) == 0.0);
  CHECK(pochhammer(-2.5, 3) == Approx(-2.5 * -1.5 * -0.5));
}

TEST_CASE("pochhammer recurrence") {
  for (double a : {0.5, 1.0, 2.0, 3.7, 11.0, 150.25}) {
    for (std::size_t n = 0; n < 120; ++n) {
      double lhs = pochhammer(a, n + 1);
      double rhs = pochhammer(a, n) * (a + static_cast<double>(n));
      if (std::isfinite(lhs) && std::isfinite(rhs)) CHECK(lhs == Approx(rhs).epsilon(1e-14));
    }
  }
  // exact integers
  double p = 1.0;
  for (std::size_t n = 0; n < 15; ++n) {
    CHECK(pochhammer(1.0, n) == p);
    p *= static_cast<double>(n + 1);
  }
}

TEST_CASE("log pochhammer agrees with direct product and never overflows") {
  for (double a : {-7.5, -2.25, -0.5, 0.3, 2.0, 40.0}) {
    for (std::size_t n = 0; n < 30; ++n) {
      double direct = 1.0;
      for (std::size_t i = 0; i < n; ++i) direct *= a + static_cast<double>(i);
      auto sl = log_pochhammer_signed(a, n);
      CHECK(sl.value() == Approx(direct).epsilon(1e-13));
    }
  }
  auto big_one = log_pochhammer_signed(1e6, 1000000);
  CHECK(std::isfinite(big_one.log_abs));
  CHECK(big_one.sign == 1);
  // log (1e6)_{1e6} = log Gamma(2e6) - log Gamma(1e6)
  CHECK(big_one.log_abs == Approx(std::lgamma(2e6) - std::lgamma(1e6)).epsilon(1e-12));
  auto z = log_pochhammer_signed(-4.0, 6);
  CHECK(z.sign == 0);
  CHECK(z.value() == 0.0);
}

TEST_CASE("log_gamma against the standard library") {
  for (double x : {1e-3, 0.5, 1.0, 1.5, 2.0, 7.25, 14.9, 15.0, 33.3, 1000.0, 1e6}) {
    CHECK(log_gamma(x) == Approx(std::lgamma(x)).epsilon(1e-14).margin(1e-14));
  }
  // |Gamma(1/2 + i y)|^2 = pi / cosh(pi y)
  for (double y : {0.0, 0.5, 2.0, 7.0, 20.0}) {
    double lhs = 2.0 * log_gamma(cplx(0.5, y)).real();
    CHECK(lhs == Approx(std::log(pi) - std::log(std::cosh(pi * y))).epsilon(1e-13).margin(1e-13));
  }
}

TEST_CASE("gauss_2f1_unit") {
  CHECK(gauss_2f1_unit(0, 3.3, 1.7) == 1.0);
  CHECK(gauss_2f1_unit(1, 3.3, 1.7) == Approx((1.7 - 3.3) / 1.7));
  CHECK(gauss_2f1_unit(2, -3, 4) == Approx(brute_2f1(2, -3, 4)).epsilon(1e-14));
  for (int n : {3, 5, 9}) {
    for (double b : {-4.0, -1.5, 0.7, 3.0}) {
      for (double c : {0.5, 2.0, 6.5}) CHECK(gauss_2f1_unit(n, b, c) == Approx(brute_2f1(n, b, c)).epsilon(1e-12).margin(1e-13));
    }
  }
  CHECK_THROWS_AS(gauss_2f1_unit(3, 1.0, -2.0), std::domain_error);
  CHECK_NOTHROW(gauss_2f1_unit(2, 1.0, -2.0));
}

TEST_CASE("channel constant") {
  CHECK(channel_constant_sq(Weight(2), Weight(7), 0) == Approx(1.0));
  CHECK(channel_constant_sq(Weight(2), Weight(2), 1) == Approx(1.0 / brute_constant_norm(2, 2, 1)).epsilon(1e-14));
  CHECK(channel_constant_sq(Weight(3), Weight(5), 2) == Approx(1.0 / brute_constant_norm(3, 5, 2)).epsilon(1e-13));
  for (double mu : {2.0, 3.0, 5.0, 8.0}) {
    for (double nu : {2.0, 3.0, 5.0, 11.0}) {
      for (int k = 0; k <= 6; ++k) {
        double s = 0.0;
        for (int j = 0; j <= k; ++j)
          s += std::tgamma(k + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(k - j + 1.0)) /
               (pochhammer(mu, j) * pochhammer(nu, k - j));
        CHECK(channel_constant_sq(Weight(mu), Weight(nu), k) * std::tgamma(k + 1.0) * s == Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("berezin eigenvalue values") {
  CHECK(berezin_eigenvalue(Weight(2), 0.0) == Approx(pi / 4).epsilon(1e-15));
  for (int nu : {2, 3, 10, 50, 200}) {
    for (double l : {0.0, 0.3, 1.0, 2.0, 7.5}) {
      CHECK(berezin_eigenvalue(Weight(nu), l) == Approx(b_oracle(nu, l)).epsilon(1e-13));
      CHECK(berezin_eigenvalue(Weight(nu), l) == berezin_eigenvalue(Weight(nu), -l));
    }
  }
  double d200 = 1.0 - berezin_eigenvalue(Weight(200), 2.0);
  double d400 = 1.0 - berezin_eigenvalue(Weight(400), 2.0);
  CHECK(std::abs(d200) < 0.05);
  CHECK(d200 / d400 == Approx(2.0).epsilon(0.02));
}

TEST_CASE("berezin eigenvalue two routes agree") {
  for (int nu = 2; nu <= 50; ++nu) {
    for (double l = -20.0; l <= 20.0; l += 0.5) {
      double a = berezin_eigenvalue(Weight(nu), l);
      double b = berezin_eigenvalue_gamma_route(Weight(nu), l);
      REQUIRE(a == Approx(b).epsilon(1e-12));
    }
  }
}

TEST_CASE("berezin eigenvalue monotone and bounded") {
  for (int nu = 2; nu <= 50; ++nu) {
    double prev = berezin_eigenvalue(Weight(nu), 0.0);
    CHECK(prev <= 1.0);
    for (int i = 1; i <= 2000; ++i) {
      double l = 0.01 * i;
      double cur = berezin_eigenvalue(Weight(nu), l);
      REQUIRE(cur <= prev * (1.0 + 1e-14));
      prev = cur;
    }
  }
}

TEST_CASE("plancherel density") {
  CHECK(plancherel_density(0.0) == 0.0);
  CHECK(plancherel_density(2.0) == Approx(pi * std::tanh(pi)).epsilon(1e-15));
  // |c(l)|^{-2} = pi |Gamma((i l + 1)/2)|^2 / |Gamma(i l / 2)|^2, with |Gamma(i y)|^2 = pi / (y sinh(pi y))
  for (double l : {0.25, 1.0, 2.0, 5.0}) {
    double g_half = std::exp(2.0 * log_gamma(cplx(0.5, 0.5 * l)).real());
    double y = 0.5 * l;
    double g_iy = pi / (y * std::sinh(pi * y));
    CHECK(plancherel_density(l) == Approx(pi * g_half / g_iy).epsilon(1e-13));
  }
  CHECK(plancherel_density(40.0) / (pi * 20.0) == Approx(1.0).epsilon(1e-15));
}
