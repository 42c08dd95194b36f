#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "su11/su11.hpp"

using namespace su11;
using Catch::Approx;

namespace {

std::string field_of(const std::string& text) {
  try {
    parse_config(text);
  } catch (const ConfigError& e) {
    return e.field();
  }
  return "";
}

// (1/nu) sum_{p <= L} ((nu)_p/(2+nu)_p)^2
double lowest_k0_square_trace(double nu, std::size_t L) {
  double d = 1.0, s = 1.0;
  for (std::size_t p = 0; p < L; ++p) {
    d *= (nu + p) / (2.0 + nu + p);
    s += d * d;
  }
  return s / nu;
}

ExperimentConfig quiet(const std::string& text) {
  auto c = parse_config(text);
  c.timing = false;
  return c;
}

}  // namespace

TEST_CASE("config parsing") {
  auto c = parse_config("# comment\nexperiment = channel-limit\nmu = 3   # trailing\nnu_list = 10, 20,40\npsi=0,1,0.5\n");
  CHECK(c.experiment == ExperimentKind::channel_limit);
  CHECK(c.mu == 3.0);
  CHECK(c.nu_list == std::vector<std::size_t>{10, 20, 40});
  CHECK(c.psi == std::vector<double>{0.0, 1.0, 0.5});
  CHECK(c.order_target == -1.0);

  auto t = parse_config("experiment = toeplitz-trace\nf = 2:1, 3.5:-0.25\nn = 3\nL = 100\n");
  REQUIRE(t.f.size() == 2);
  CHECK(t.f[1].exponent == 3.5);
  CHECK(t.f[1].coeff == -0.25);
  CHECK(t.n == 3);
  CHECK(t.L == 100);

  CHECK(parse_config("", ExperimentKind::kernel_chain).experiment == ExperimentKind::kernel_chain);
  CHECK(parse_config("experiment = kernel-chain", ExperimentKind::kernel_chain).samples == 1000000);

  SECTION("diagnostics name the field") {
    CHECK(field_of("experiment = constants\nbogus = 1\n") == "bogus");
    CHECK(field_of("experiment = constants\nmu = 2\nmu = 3\n") == "mu");
    CHECK(field_of("mu = 2\n") == "experiment");
    CHECK(field_of("experiment = nope\n") == "experiment");
    CHECK(field_of("experiment = constants\nnu_list = 4,4\n") == "nu_list");
    CHECK(field_of("experiment = constants\nnu_list = 8,4\n") == "nu_list");
    CHECK(field_of("experiment = constants\nnu_list = 1\n") == "nu_list");
    CHECK(field_of("experiment = constants\nnu_list = 2.5\n") == "nu_list");
    CHECK(field_of("experiment = channel-limit\npsi = 1,1\n") == "psi");
    CHECK(field_of("experiment = channel-limit\nmu = 1\n") == "mu");
    CHECK(field_of("experiment = channel-limit\ntolerance = 0\n") == "tolerance");
    CHECK(field_of("experiment = channel-limit\ntolerance = -1\n") == "tolerance");
    CHECK(field_of("experiment = channel-limit\norder_tolerance = 0\n") == "order_tolerance");
    CHECK(field_of("experiment = channel-limit\nformat = xml\n") == "format");
    CHECK(field_of("experiment = channel-limit\ninput_state = mixed\n") == "input_state");
    CHECK(field_of("experiment = toeplitz-trace\nf = 2\n") == "f");
    CHECK(field_of("experiment = toeplitz-trace\nf = 1:1\n") == "f");
    CHECK(field_of("experiment = channel-limit\ntiming = maybe\n") == "timing");
    CHECK(field_of("experiment = channel-limit\nk = \n") == "k");
    CHECK(field_of("experiment = channel-limit\njust text\n") == "line 2");
    CHECK_THROWS_AS(parse_config("experiment = constants\n", ExperimentKind::kernel_chain), ConfigError);
    CHECK_THROWS_AS(load_config("/nonexistent/cfg.txt"), ConfigError);
  }
}

TEST_CASE("channel-limit examples") {
  SECTION("k = 0, psi = x^2") {
    auto c = quiet("experiment = channel-limit\nmu = 2\nk = 0\nnu_list = 5,10,20,40\nL = 3000\n");
    auto r = run_experiment(c);
    REQUIRE(r.rows.size() == 4);
    CHECK(r.target_kind == "closed-form");
    for (auto& row : r.rows) {
      CHECK(row.status == "ok");
      CHECK(row.target == Approx(1.0 / 3.0).epsilon(1e-13));
      CHECK(row.measured == Approx(lowest_k0_square_trace(double(row.nu), 3000)).epsilon(1e-12));
      CHECK(row.abs_error == Approx(std::abs(row.measured - row.target)).epsilon(1e-15));
    }
  }
  SECTION("k = 1 target") {
    auto r = run_experiment(quiet("experiment = channel-limit\nk = 1\nnu_list = 20\n"));
    CHECK(r.rows[0].target == Approx(2.0 / 15.0).epsilon(1e-13));
  }
  SECTION("closed-form target matches quadrature of psi(H)") {
    for (std::size_t k : {0u, 1u, 2u})
      for (double mu : {2.0, 3.5}) {
        auto c = quiet("experiment = channel-limit\nnu_list = 20\npsi = 0,0.5,1,-0.25\n");
        c.k = k;
        c.mu = mu;
        auto a = TruncatedOperator::basis_projector(TruncatedSpace{Weight(mu), 0}, 0);
        double quad = husimi_functional_integral(a, k, Polynomial(c.psi), 60, 16);
        CHECK(run_experiment(c).rows[0].target == Approx(quad).epsilon(1e-9));
      }
  }
  SECTION("first-order convergence over a decade") {
    for (std::size_t k : {0u, 1u}) {
      auto c = quiet("experiment = channel-limit\nnu_list = 50,100,200,400,800\n");
      c.k = k;
      auto r = run_experiment(c);
      REQUIRE(r.fitted_order);
      CHECK(r.fitted_order->order == Approx(-1.0).margin(0.15));
      CHECK(r.fitted_order->std_error < 0.05);
      CHECK(r.passed);
    }
  }
  SECTION("tail bound brackets the untruncated value for mu >= 3") {
    for (const char* psi : {"0,1", "0,0,1", "0,1,1,1"})
      for (std::size_t k : {0u, 2u}) {
        auto c = quiet(std::string("experiment = channel-limit\nmu = 3\nnu_list = 10,40\nL = 400\npsi = ") + psi + "\n");
        c.k = k;
        auto coarse = run_experiment(c);
        c.L = 200000;
        auto fine = run_experiment(c);
        for (std::size_t i = 0; i < 2; ++i) {
          const auto& a = coarse.rows[i];
          const auto& b = fine.rows[i];
          CHECK(a.measured <= b.measured + 1e-14);
          CHECK(b.measured <= a.measured + a.tail_bound);
          CHECK(a.tail_bound > 0.0);
        }
      }
    // psi = x: untruncated trace is known exactly
    auto c = quiet("experiment = channel-limit\nmu = 3\nk = 1\nnu_list = 10,40\nL = 300\npsi = 0,1\n");
    for (auto& row : run_experiment(c).rows) {
      double exact = (3.0 + row.nu + 2.0 - 1.0) / (2.0 * row.nu);
      CHECK(row.measured <= exact);
      CHECK(exact <= row.measured + row.tail_bound * (1.0 + 1e-12));
    }
  }
  SECTION("random input uses a quadrature target") {
    auto c = quiet("experiment = channel-limit\ninput_state = random\nmu = 3\nrank = 2\nsupport = 4\nnu_list = 10,20,40,80\n"
                   "radial_count = 40\nangular_count = 32\n");
    auto r = run_experiment(c);
    CHECK(r.target_kind == "quadrature");
    REQUIRE(r.fitted_order);
    CHECK(r.fitted_order->order == Approx(-1.0).margin(0.25));
    for (std::size_t i = 1; i < r.rows.size(); ++i) CHECK(r.rows[i].abs_error < r.rows[i - 1].abs_error);
    c.nu_list = {10, 40};
    c.L = 120;
    auto coarse = run_experiment(c);
    c.L = 20000;
    auto fine = run_experiment(c);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(coarse.rows[i].measured <= fine.rows[i].measured + 1e-14);
      CHECK(fine.rows[i].measured <= coarse.rows[i].measured + coarse.rows[i].tail_bound);
    }
  }
}

TEST_CASE("other experiments") {
  SECTION("constants") {
    auto r = run_experiment(quiet("experiment = constants\nk = 3\nmu = 5\n"));
    CHECK(r.passed);
    for (auto& row : r.rows) CHECK(row.abs_error <= 1e-12);
  }
  SECTION("toeplitz-trace f = (1-|z|^2)^2, n = 2") {
    auto r = run_experiment(quiet("experiment = toeplitz-trace\n"));
    CHECK(r.passed);
    for (auto& row : r.rows) CHECK(row.target == Approx(1.0 / 3.0).epsilon(1e-14));
    REQUIRE(r.fitted_order);
    CHECK(r.fitted_order->order == Approx(-1.0).margin(0.15));
  }
  SECTION("toeplitz-trace target for a two-term symbol") {
    // f = (1-u)^2 - 0.5 (1-u)^3, n = 2: int f^2 = 1/3 - 1/4 + 0.25/5
    auto r = run_experiment(quiet("experiment = toeplitz-trace\nf = 2:1,3:-0.5\nnu_list = 100\n"));
    CHECK(r.rows[0].target == Approx(1.0 / 3.0 - 0.25 + 0.05).epsilon(1e-14));
  }
  SECTION("husimi-check compares (1/nu) Tr T(A) with the Husimi integral") {
    auto r = run_experiment(quiet("experiment = husimi-check\nk = 1\ntolerance = 0.25\n"));
    for (auto& row : r.rows) CHECK(std::abs(row.abs_error - 2.0 / row.nu) <= row.tail_bound + 1e-12);
    CHECK(r.target_kind == "quadrature");
    CHECK(r.rows[0].target == Approx(0.5).epsilon(1e-10));
    CHECK(r.passed);
  }
  SECTION("e-identity") {
    auto r = run_experiment(quiet("experiment = e-identity\nk = 2\n"));
    CHECK(r.passed);
    REQUIRE(r.fitted_order);
    CHECK(r.fitted_order->order == Approx(-1.0).margin(0.2));
  }
  SECTION("berezin-eigen") {
    auto r = run_experiment(quiet("experiment = berezin-eigen\nlambda = 1\nnu_list = 4\n"));
    CHECK(r.passed);
    CHECK(r.rows[0].abs_error <= 1e-6);
    CHECK(r.rows[0].target == Approx(berezin_multiplier(Weight(4.0), 1.0)).epsilon(1e-15));
  }
  SECTION("kernel-chain") {
    auto r = run_experiment(quiet("experiment = kernel-chain\nsamples = 100000\nnu_list = 4,16\n"));
    CHECK(r.rows[0].measured + r.rows[0].tail_bound <= 81.0);
    CHECK(r.passed);
    auto one = run_experiment(quiet("experiment = kernel-chain\nn = 1\nnu_list = 4\n"));
    CHECK(one.rows[0].measured == 1.0);
    CHECK(one.rows[0].abs_error == 0.0);
    auto three = run_experiment(quiet("experiment = kernel-chain\nn = 3\nsamples = 20000\nnu_list = 4\n"));
    CHECK(three.target_kind == "bound");
    CHECK(three.rows[0].target == 729.0);
  }
  SECTION("tolerance failures are reported") {
    auto r = run_experiment(quiet("experiment = toeplitz-trace\ntolerance = 1e-9\nnu_list = 50,100\n"));
    CHECK_FALSE(r.passed);
    REQUIRE(r.failures.size() == 2);
    CHECK(r.failures[0].rfind("nu=50:", 0) == 0);
    auto o = run_experiment(quiet("experiment = toeplitz-trace\norder_target = -2\n"));
    CHECK_FALSE(o.passed);
    CHECK(o.failures.back().find("fitted order") != std::string::npos);
  }
}

TEST_CASE("determinism") {
  const std::string cfg = "experiment = kernel-chain\nsamples = 20000\nnu_list = 4,8,16\n";
  auto a = quiet(cfg), b = quiet(cfg);
  b.threads = 3;
  auto ra = run_experiment(a), rb = run_experiment(b);
  CHECK(format_report(ra, ReportFormat::csv) == format_report(rb, ReportFormat::csv));
  CHECK(format_report(ra, ReportFormat::json) == format_report(run_experiment(a), ReportFormat::json));
  auto c = a;
  c.seed = 2;
  CHECK(format_report(run_experiment(c), ReportFormat::csv) != format_report(ra, ReportFormat::csv));

  auto t = parse_config("experiment = constants\n");
  auto rt = run_experiment(t);
  for (auto& row : rt.rows) CHECK(row.seconds > 0.0);
  for (auto& row : ra.rows) CHECK(row.seconds == 0.0);
}

TEST_CASE("fit_order") {
  std::vector<ReportRow> rows;
  for (std::size_t nu : {10u, 20u, 40u}) rows.push_back({nu, 0, 0, 3.0 / nu, 0, 0});
  CHECK_FALSE(fit_order(rows));
  rows.push_back({80, 0, 0, 3.0 / 80, 0, 0});
  auto f = fit_order(rows);
  REQUIRE(f);
  CHECK(f->order == Approx(-1.0).epsilon(1e-12));
  CHECK(f->std_error == Approx(0.0).margin(1e-12));
  rows[1].abs_error *= 1.1;
  CHECK(fit_order(rows)->std_error > 0.0);
}

TEST_CASE("report output") {
  ExperimentReport empty;
  CHECK(format_report(empty, ReportFormat::csv) == "nu,measured,target,abs_error,tail_bound,seconds\n");

  ExperimentReport one;
  one.rows.push_back({7, 0.5, 0.25, 0.25, 1e-3, 0.0, "ok"});
  CHECK(format_report(one, ReportFormat::csv) == "nu,measured,target,abs_error,tail_bound,seconds\n7,0.5,0.25,0.25,0.001,0\n");

  SECTION("json round trip") {
    auto r = run_experiment(quiet("experiment = channel-limit\nnu_list = 10,20,40,80\n"));
    r.rows[1].status = "error: synthetic";
    r.rows[1].measured = std::nan("");
    auto j = nlohmann::ordered_json::parse(format_report(r, ReportFormat::json));
    auto back = report_from_json(j);
    CHECK(std::isnan(back.rows[1].measured));
    back.rows[1].measured = r.rows[1].measured = 0.0;
    CHECK(back == r);
    CHECK(j["version"] == "0.1.0");
    CHECK(j["config"]["experiment"] == "channel-limit");
    CHECK(j["config"]["nu_list"] == "10,20,40,80");
    REQUIRE(r.fitted_order);
  }

  SECTION("files") {
    auto dir = std::filesystem::temp_directory_path() / "su11_report_test";
    std::filesystem::create_directories(dir);
    auto path = (dir / "r.csv").string();
    emit_report(one, ReportFormat::csv, path);
    std::ifstream in(path);
    std::stringstream ss;
    ss << in.rdbuf();
    CHECK(ss.str() == format_report(one, ReportFormat::csv));
    try {
      emit_report(one, ReportFormat::csv, (dir / "missing" / "r.csv").string());
      FAIL("expected an exception");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find("missing/r.csv") != std::string::npos);
    }
    std::filesystem::remove_all(dir);
  }
}
