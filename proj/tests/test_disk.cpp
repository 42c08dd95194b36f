#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "su11/disk.hpp"

using namespace su11;
using Catch::Approx;

namespace {

GroupElement random_element(std::mt19937_64& rng, double max_r = 0.9) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  double r = max_r * std::sqrt(U(rng));
  cplx w = std::polar(r, 2 * pi * U(rng));
  return rotation(2 * pi * U(rng)) * transporter(w);
}

cplx random_point(std::mt19937_64& rng, double max_r = 0.95) {
  std::uniform_real_distribution<double> U(0.0, 1.0);
  return std::polar(max_r * std::sqrt(U(rng)), 2 * pi * U(rng));
}

// int |z|^{2m} (1 - |z|^2)^s d iota = B(m + 1, s - 1)
double beta_oracle(int m, double s) { return std::exp(std::lgamma(m + 1.0) + std::lgamma(s - 1.0) - std::lgamma(s + m)); }

}  // namespace

TEST_CASE("mobius basics") {
  GroupElement id;
  cplx z(0.3, -0.4);
  CHECK(std::abs(mobius(id, z) - z) == 0.0);
  double th = 0.7;
  CHECK(std::abs(mobius(rotation(th), z) - std::polar(1.0, 2 * th) * z) < 1e-15);
}

TEST_CASE("mobius composition follows the matrix product in reverse order") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 200; ++t) {
    auto g = random_element(rng), h = random_element(rng);
    cplx z = random_point(rng);
    cplx lhs = mobius(g, mobius(h, z));
    CHECK(std::abs(lhs - mobius(h * g, z)) < 1e-12 * (1.0 + std::abs(lhs)));
    CHECK(std::abs(mobius(g, z)) < 1.0);
  }
}

TEST_CASE("determinant invariant under multiplication") {
  std::mt19937_64 rng(12);
  GroupElement acc;
  for (int t = 0; t < 50; ++t) {
    auto g = random_element(rng, 0.6);
    auto p = acc * g;
    if (std::norm(p.a()) < 1e6) acc = p;
    CHECK(acc.determinant() == Approx(1.0).epsilon(1e-12 * std::norm(acc.a())));
  }
  auto g = random_element(rng);
  auto e = g * g.inverse();
  CHECK(std::abs(e.a() - 1.0) < 1e-12);
  CHECK(std::abs(e.b()) < 1e-12);
  CHECK_THROWS_AS(GroupElement(2.0, 0.0), std::invalid_argument);
}

TEST_CASE("transporter") {
  auto g0 = transporter(0.0);
  CHECK(g0.a() == cplx(1.0));
  CHECK(g0.b() == cplx(0.0));
  auto g = transporter(0.5);
  CHECK(g.a().real() == Approx(2.0 / std::sqrt(3.0)).epsilon(1e-15));
  CHECK(g.a().imag() == 0.0);
  CHECK(g.b().real() == Approx(-1.0 / std::sqrt(3.0)).epsilon(1e-15));
  std::mt19937_64 rng(13);
  for (int t = 0; t < 200; ++t) {
    cplx w = random_point(rng, 0.99);
    auto tw = transporter(w);
    CHECK(std::abs(mobius(tw, cplx(0.0)) - w) < 1e-13);
    CHECK(tw.determinant() == Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("build_quadrature rejects weak decay") {
  CHECK_THROWS_AS(build_quadrature(10, 10, 1.5), std::invalid_argument);
  CHECK_NOTHROW(build_quadrature(10, 10, 2.0));
}

TEST_CASE("quadrature integrates (1-|z|^2)^nu exactly") {
  auto q = build_quadrature(400, 8, 2.0);
  for (int nu = 2; nu <= 40; ++nu) {
    double v = q.integrate([&](cplx z) { return std::pow(1.0 - std::norm(z), nu); });
    CHECK(v == Approx(1.0 / (nu - 1)).epsilon(1e-12));
    double w = q.integrate_weighted(nu, [](cplx) { return 1.0; });
    CHECK(w == Approx(1.0 / (nu - 1)).epsilon(1e-12));
  }
}

TEST_CASE("quadrature Beta table") {
  auto q = build_quadrature(64, 4, 2.0);
  for (int s = 2; s <= 40; ++s) {
    for (int m = 0; m <= 40; ++m) {
      double v = q.integrate_weighted(s, [&](cplx z) { return std::pow(std::norm(z), m); });
      CHECK(v == Approx(beta_oracle(m, s)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Jacobi radial rule") {
  for (double s0 : {2.0, 5.0, 12.5, 80.0}) {
    auto q = build_quadrature(48, 4, s0, RadialRule::jacobi);
    double wsum = 0.0;
    for (double lw : q.radial().log_weights) wsum += std::exp(lw);
    CHECK(wsum == Approx(1.0 / (s0 - 1.0)).epsilon(1e-13));
    for (int extra = 0; extra <= 6; ++extra) {
      for (int m : {0, 3, 17, 40}) {
        double s = s0 + extra;
        double v = q.integrate_weighted(s, [&](cplx z) { return std::pow(std::norm(z), m); });
        CHECK(v == Approx(beta_oracle(m, s)).epsilon(1e-11));
      }
    }
  }
  // very large exponents stay finite in log-domain assembly
  auto q = build_quadrature(40, 4, 900.0, RadialRule::jacobi);
  double v = q.integrate_weighted(902.0, [](cplx z) { return std::norm(z); });
  CHECK(v == Approx(beta_oracle(1, 902.0)).epsilon(1e-10));
}

TEST_CASE("angular rule") {
  auto q = build_quadrature(20, 16, 2.0);
  for (int m = -15; m <= 15; ++m) {
    cplx v = q.integrate([&](cplx z) { return std::pow(1.0 - std::norm(z), 3) * std::polar(1.0, m * std::arg(z)); });
    if (m == 0)
      CHECK(std::abs(v - 0.5) < 1e-13);
    else
      CHECK(std::abs(v) < 1e-14);
  }
  // odd in angle
  double odd = q.integrate([](cplx z) { return z.real() * std::pow(1.0 - std::norm(z), 2); });
  CHECK(std::abs(odd) < 1e-15);
  CHECK(q.nodes().size() == q.weights().size());
  for (double w : q.weights()) CHECK(w > 0.0);
}

TEST_CASE("focused angular rule integrates smooth rings") {
  auto q = build_quadrature(60, 256, 2.0);
  for (double phi : {0.0, 1.3, -2.9}) {
    double v = q.integrate_weighted_focused(4.0, phi, [](cplx z) { return 1.0 + 0.3 * z.real(); });
    CHECK(v == Approx(1.0 / 3.0).epsilon(1e-10));
  }
}

TEST_CASE("invariant measure check") {
  auto q = build_quadrature(400, 256, 2.0);
  auto h = [](cplx z) { return std::pow(1.0 - std::norm(z), 3); };
  CHECK(invariant_measure_check(GroupElement(), h, q) == 0.0);
  CHECK(invariant_measure_check(rotation(0.37), h, q) < 1e-15);
  CHECK(invariant_measure_check(transporter(0.3), h, q) <= 1e-8);
  // independent dense grid: both sides on 600 x 384 also agree with 1/2
  auto q2 = build_quadrature(600, 384, 2.0);
  auto g = transporter(0.3);
  double moved = q2.integrate([&](cplx z) { return h(mobius(g, z)); });
  CHECK(moved == Approx(0.5).epsilon(1e-8));
}
