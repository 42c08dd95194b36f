#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "bergman.hpp"
#include "channel.hpp"
#include "parallel.hpp"
#include "random.hpp"
#include "specfun.hpp"
#include "spectral.hpp"
#include "transforms.hpp"

namespace su11 {

inline constexpr const char* version = "0.1.0";

enum class ExperimentKind { constants, channel_limit, toeplitz_trace, berezin_eigen, husimi_check, e_identity, kernel_chain };

inline const std::vector<std::pair<ExperimentKind, std::string>>& experiment_names() {
  static const std::vector<std::pair<ExperimentKind, std::string>> names{
      {ExperimentKind::constants, "constants"},         {ExperimentKind::channel_limit, "channel-limit"},
      {ExperimentKind::toeplitz_trace, "toeplitz-trace"}, {ExperimentKind::berezin_eigen, "berezin-eigen"},
      {ExperimentKind::husimi_check, "husimi-check"},   {ExperimentKind::e_identity, "e-identity"},
      {ExperimentKind::kernel_chain, "kernel-chain"}};
  return names;
}

inline std::string to_string(ExperimentKind k) {
  for (auto& [kind, name] : experiment_names())
    if (kind == k) return name;
  return "?";
}

inline std::optional<ExperimentKind> parse_experiment_kind(const std::string& s) {
  for (auto& [kind, name] : experiment_names())
    if (name == s) return kind;
  return std::nullopt;
}

class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string field, const std::string& msg)
      : std::runtime_error("config field '" + field + "': " + msg), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

enum class InputState { lowest, random };
enum class ReportFormat { csv, json };

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::channel_limit;
  double mu = 2.0;
  std::size_t k = 0;
  std::vector<std::size_t> nu_list{50, 100, 200, 400, 800};
  InputState input_state = InputState::lowest;
  std::size_t rank = 3;
  std::size_t support = 8;
  std::uint64_t seed = 1;
  std::vector<double> psi{0.0, 0.0, 1.0};
  std::vector<RadialTerm> f{{2.0, 1.0}};
  std::size_t n = 2;
  std::size_t L = 0;  // 0: automatic
  std::size_t radial_count = 400;
  std::size_t angular_count = 512;
  double lambda = 0.0;
  std::size_t samples = 100000;
  double tolerance = 0.05;
  std::optional<double> order_target;
  double order_tolerance = 0.15;
  std::string output;
  ReportFormat format = ReportFormat::csv;
  unsigned threads = 1;
  bool timing = true;
};

namespace detail {

inline std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

inline double parse_real(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    double x = std::stod(v, &pos);
    if (pos != v.size() || !std::isfinite(x)) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a finite real, got '" + v + "'");
  }
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
    throw ConfigError(key, "expected a non-negative integer, got '" + v + "'");
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw ConfigError(key, "integer out of range: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError(key, "expected true or false, got '" + v + "'");
}

inline std::string fmt_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

template <class T, class F>
std::string join(const std::vector<T>& xs, F&& fmt) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + fmt(xs[i]);
  return s;
}

inline std::vector<std::size_t> default_nu_list(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::constants: return {2, 3, 5};
    case ExperimentKind::berezin_eigen: return {2, 4, 8};
    case ExperimentKind::kernel_chain: return {4, 8, 16};
    case ExperimentKind::husimi_check:
    case ExperimentKind::e_identity: return {10, 20, 40, 80, 160};
    default: return {50, 100, 200, 400, 800};
  }
}

inline double default_tolerance(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::constants: return 1e-12;
    case ExperimentKind::berezin_eigen: return 1e-6;
    case ExperimentKind::kernel_chain: return 0.02;
    case ExperimentKind::husimi_check: return 0.1;
    default: return 0.05;
  }
}

inline std::optional<double> default_order_target(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::channel_limit:
    case ExperimentKind::toeplitz_trace:
    case ExperimentKind::husimi_check:
    case ExperimentKind::e_identity: return -1.0;
    default: return std::nullopt;
  }
}

}  // namespace detail

inline const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys{
      "experiment", "mu",      "k",         "nu_list",      "input_state",   "rank",            "support",
      "seed",       "psi",     "f",         "n",            "L",             "radial_count",    "angular_count",
      "lambda",     "samples", "tolerance", "order_target", "order_tolerance", "output",        "format",
      "threads",    "timing"};
  return keys;
}

// Flat "key = value" lines; '#' starts a comment. experiment_override stands in for a missing experiment key
// and must agree with it when both are present.
inline ExperimentConfig parse_config(const std::string& text, std::optional<ExperimentKind> experiment_override = {}) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = detail::trim(line.substr(0, line.find('#')));
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno), "expected key = value");
    std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) throw ConfigError(key, "unknown key");
    if (kv.count(key)) throw ConfigError(key, "duplicate key");
    if (value.empty()) throw ConfigError(key, "empty value");
    kv[key] = value;
  }

  ExperimentConfig c;
  if (kv.count("experiment")) {
    auto e = parse_experiment_kind(kv["experiment"]);
    if (!e) throw ConfigError("experiment", "unknown experiment '" + kv["experiment"] + "'");
    if (experiment_override && *experiment_override != *e)
      throw ConfigError("experiment", "config says '" + kv["experiment"] + "' but '" + to_string(*experiment_override) +
                                          "' was requested");
    c.experiment = *e;
  } else if (experiment_override) {
    c.experiment = *experiment_override;
  } else {
    throw ConfigError("experiment", "missing");
  }
  c.nu_list = detail::default_nu_list(c.experiment);
  c.tolerance = detail::default_tolerance(c.experiment);
  c.order_target = detail::default_order_target(c.experiment);
  if (c.experiment == ExperimentKind::husimi_check) c.mu = 3.0;
  if (c.experiment == ExperimentKind::e_identity) c.k = 1;
  if (c.experiment == ExperimentKind::kernel_chain) c.samples = 1000000;

  auto has = [&](const char* key) { return kv.count(key) > 0; };
  if (has("mu")) {
    c.mu = detail::parse_real("mu", kv["mu"]);
    if (!(c.mu > 1.0)) throw ConfigError("mu", "must exceed 1");
  }
  if (has("k")) c.k = detail::parse_uint("k", kv["k"]);
  if (has("nu_list")) {
    c.nu_list.clear();
    for (auto& s : detail::split(kv["nu_list"], ',')) c.nu_list.push_back(detail::parse_uint("nu_list", s));
  }
  if (c.nu_list.empty()) throw ConfigError("nu_list", "empty");
  for (std::size_t i = 0; i < c.nu_list.size(); ++i) {
    if (c.nu_list[i] < 2) throw ConfigError("nu_list", "entries must be >= 2");
    if (i && c.nu_list[i] <= c.nu_list[i - 1]) throw ConfigError("nu_list", "must be strictly increasing");
  }
  if (has("input_state")) {
    auto v = kv["input_state"];
    if (v == "lowest") c.input_state = InputState::lowest;
    else if (v == "random") c.input_state = InputState::random;
    else throw ConfigError("input_state", "expected lowest or random, got '" + v + "'");
  }
  if (has("rank")) c.rank = detail::parse_uint("rank", kv["rank"]);
  if (c.rank == 0) throw ConfigError("rank", "must be >= 1");
  if (has("support")) c.support = detail::parse_uint("support", kv["support"]);
  if (has("seed")) c.seed = detail::parse_uint("seed", kv["seed"]);
  if (has("psi")) {
    c.psi.clear();
    for (auto& s : detail::split(kv["psi"], ',')) c.psi.push_back(detail::parse_real("psi", s));
  }
  if (c.psi.empty() || c.psi[0] != 0.0) throw ConfigError("psi", "constant coefficient must be 0");
  if (has("f")) {
    c.f.clear();
    for (auto& s : detail::split(kv["f"], ',')) {
      auto parts = detail::split(s, ':');
      if (parts.size() != 2) throw ConfigError("f", "expected exponent:coeff terms, got '" + s + "'");
      c.f.push_back({detail::parse_real("f", parts[0]), detail::parse_real("f", parts[1])});
    }
  }
  for (auto& t : c.f)
    if (!(t.exponent > 1.0)) throw ConfigError("f", "exponents must exceed 1");
  if (has("n")) c.n = detail::parse_uint("n", kv["n"]);
  if (c.n == 0) throw ConfigError("n", "must be >= 1");
  if (has("L")) c.L = detail::parse_uint("L", kv["L"]);
  if (has("radial_count")) c.radial_count = detail::parse_uint("radial_count", kv["radial_count"]);
  if (has("angular_count")) c.angular_count = detail::parse_uint("angular_count", kv["angular_count"]);
  if (c.radial_count == 0) throw ConfigError("radial_count", "must be >= 1");
  if (c.angular_count == 0) throw ConfigError("angular_count", "must be >= 1");
  if (has("lambda")) c.lambda = detail::parse_real("lambda", kv["lambda"]);
  if (has("samples")) c.samples = detail::parse_uint("samples", kv["samples"]);
  if (c.samples < 2) throw ConfigError("samples", "must be >= 2");
  if (has("tolerance")) c.tolerance = detail::parse_real("tolerance", kv["tolerance"]);
  if (!(c.tolerance > 0.0)) throw ConfigError("tolerance", "must be > 0");
  if (has("order_target")) {
    auto v = kv["order_target"];
    c.order_target = v == "none" ? std::nullopt : std::optional<double>(detail::parse_real("order_target", v));
  }
  if (has("order_tolerance")) c.order_tolerance = detail::parse_real("order_tolerance", kv["order_tolerance"]);
  if (!(c.order_tolerance > 0.0)) throw ConfigError("order_tolerance", "must be > 0");
  if (has("output")) c.output = kv["output"];
  if (has("format")) {
    auto v = kv["format"];
    if (v == "csv") c.format = ReportFormat::csv;
    else if (v == "json") c.format = ReportFormat::json;
    else throw ConfigError("format", "expected csv or json, got '" + v + "'");
  }
  if (has("threads")) c.threads = static_cast<unsigned>(detail::parse_uint("threads", kv["threads"]));
  if (has("timing")) c.timing = detail::parse_bool("timing", kv["timing"]);

  if (c.experiment == ExperimentKind::kernel_chain && c.nu_list.front() < 2)
    throw ConfigError("nu_list", "kernel-chain needs nu >= 2");
  return c;
}

inline ExperimentConfig load_config(const std::string& path, std::optional<ExperimentKind> experiment_override = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("--config", "cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), experiment_override);
}

// Resolved configuration in key order; output, format, threads and timing are excluded.
inline std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig& c) {
  using detail::fmt_real;
  std::vector<std::pair<std::string, std::string>> e;
  e.emplace_back("experiment", to_string(c.experiment));
  e.emplace_back("mu", fmt_real(c.mu));
  e.emplace_back("k", std::to_string(c.k));
  e.emplace_back("nu_list", detail::join(c.nu_list, [](std::size_t v) { return std::to_string(v); }));
  e.emplace_back("input_state", c.input_state == InputState::lowest ? "lowest" : "random");
  e.emplace_back("rank", std::to_string(c.rank));
  e.emplace_back("support", std::to_string(c.support));
  e.emplace_back("seed", std::to_string(c.seed));
  e.emplace_back("psi", detail::join(c.psi, fmt_real));
  e.emplace_back("f", detail::join(c.f, [](const RadialTerm& t) { return fmt_real(t.exponent) + ":" + fmt_real(t.coeff); }));
  e.emplace_back("n", std::to_string(c.n));
  e.emplace_back("L", std::to_string(c.L));
  e.emplace_back("radial_count", std::to_string(c.radial_count));
  e.emplace_back("angular_count", std::to_string(c.angular_count));
  e.emplace_back("lambda", fmt_real(c.lambda));
  e.emplace_back("samples", std::to_string(c.samples));
  e.emplace_back("tolerance", fmt_real(c.tolerance));
  e.emplace_back("order_target", c.order_target ? fmt_real(*c.order_target) : "none");
  e.emplace_back("order_tolerance", fmt_real(c.order_tolerance));
  return e;
}

struct ReportRow {
  std::size_t nu = 0;
  double measured = 0.0;
  double target = 0.0;
  double abs_error = 0.0;
  double tail_bound = 0.0;
  double seconds = 0.0;
  std::string status = "ok";
  bool operator==(const ReportRow&) const = default;
};

struct FittedOrder {
  double order;
  double std_error;
  bool operator==(const FittedOrder&) const = default;
};

struct ExperimentReport {
  std::string version = su11::version;
  std::string experiment;
  std::string target_kind;
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<ReportRow> rows;
  std::optional<FittedOrder> fitted_order;
  bool passed = true;
  std::vector<std::string> failures;
  bool operator==(const ExperimentReport&) const = default;
};

// Least-squares slope of log abs_error against log nu over ok rows with positive error.
inline std::optional<FittedOrder> fit_order(const std::vector<ReportRow>& rows) {
  std::vector<double> x, y;
  for (auto& r : rows)
    if (r.status == "ok" && r.abs_error > 0.0 && std::isfinite(r.abs_error)) {
      x.push_back(std::log(static_cast<double>(r.nu)));
      y.push_back(std::log(r.abs_error));
    }
  const std::size_t n = x.size();
  if (n < 4) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) mx += x[i], my += y[i];
  mx /= n, my /= n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) sxx += (x[i] - mx) * (x[i] - mx), sxy += (x[i] - mx) * (y[i] - my);
  double slope = sxy / sxx, rss = 0;
  for (std::size_t i = 0; i < n; ++i) {
    double r = y[i] - my - slope * (x[i] - mx);
    rss += r * r;
  }
  return FittedOrder{slope, std::sqrt(rss / static_cast<double>(n - 2) / sxx)};
}

namespace detail {

inline double log_beta(double a, double b) { return log_gamma(a) + log_gamma(b) - log_gamma(a + b); }

inline std::vector<cplx> experiment_samples() {
  std::vector<cplx> pts;
  for (double r : {0.0, 0.25, 0.5, 0.75, 0.9})
    for (double th : {0.0, 1.7, 3.3, 4.9}) pts.push_back(std::polar(r, th));
  return pts;
}

inline TruncatedOperator input_operator(const ExperimentConfig& c) {
  if (c.input_state == InputState::lowest) return TruncatedOperator::basis_projector(TruncatedSpace{Weight(c.mu), 0}, 0);
  return random_density_operator(TruncatedSpace{Weight(c.mu), c.support}, c.rank, c.support, c.seed);
}

// int psi(H_mu^k(e_0 e_0^*)) d iota with H = ((mu)_k/k!) |w|^{2k} (1-|w|^2)^mu
inline double lowest_state_target(const ExperimentConfig& c) {
  const double lc = log_pochhammer(c.mu, c.k) - log_factorial(c.k);
  CompensatedSum s;
  for (std::size_t j = 1; j < c.psi.size(); ++j) {
    if (c.psi[j] == 0.0) continue;
    double jj = static_cast<double>(j);
    s.add(c.psi[j] * std::exp(jj * lc + log_beta(jj * static_cast<double>(c.k) + 1.0, jj * c.mu - 1.0)));
  }
  return s.value();
}

// max |d| over the last eighth of the computed diagonal, taken as the envelope of the decreasing tail
inline double tail_envelope(std::span<const double> d) {
  double e = 0.0;
  for (std::size_t i = d.size() - std::max<std::size_t>(d.size() / 8, 1); i < d.size(); ++i) e = std::max(e, std::abs(d[i]));
  return e;
}

// sum_{p>L} |psi(d_p)| <= sum_j |psi_j| env^{j-1} sum_{p>L} |d_p|
inline double functional_tail(const Polynomial& psi, double env, double trace_tail) {
  double s = 0.0, pw = 1.0;
  for (std::size_t j = 1; j < psi.coeffs().size(); ++j, pw *= env) s += std::abs(psi.coeffs()[j]) * pw;
  return s * trace_tail;
}

struct RowValues {
  double measured, target, abs_error, tail_bound;
};

inline RowValues row_constants(const ExperimentConfig& c, std::size_t nu) {
  Weight mu(c.mu), w(static_cast<double>(nu));
  // ||(z - w)^k||^2 in H_mu (x) H_nu
  CompensatedSum s;
  for (std::size_t j = 0; j <= c.k; ++j) {
    double b = binomial(c.k, j);
    s.add(b * b * monomial_norm_sq(mu, j) * monomial_norm_sq(w, c.k - j));
  }
  double measured = channel_constant_sq(mu, w, c.k) * s.value();
  double err = std::abs(measured - 1.0);
  ChannelParams params{mu, w, c.k};
  IsometryTable iso(params, 60, 60 + c.k);
  for (std::size_t p = 0; p <= 60; ++p) {
    CompensatedSum t;
    for (std::size_t m = 0; m <= p + c.k; ++m) t.add(iso.beta(p, m) * iso.beta(p, m));
    err = std::max(err, std::abs(t.value() - 1.0));
  }
  return {measured, 1.0, err, 0.0};
}

inline RowValues row_channel_limit(const ExperimentConfig& c, std::size_t nu, double target) {
  const Polynomial psi(c.psi);
  auto a = input_operator(c);
  ChannelParams params{Weight(c.mu), Weight(static_cast<double>(nu)), c.k};
  const double v = static_cast<double>(nu);
  const double full_trace = params.trace_factor() * a.trace().real();
  const std::size_t L = c.L ? c.L : std::max<std::size_t>(64 * (nu + c.k), 2000);
  double ft, partial, tail;
  if (a.is_diagonal()) {
    auto d = apply_channel_diagonal(real_diagonal(a), params, L);
    ft = functional_trace(std::span<const double>(d), psi);
    CompensatedSum s;
    for (double x : d) s.add(x);
    partial = s.value();
    tail = functional_tail(psi, tail_envelope(d), std::max(0.0, full_trace - partial));
  } else {
    auto t = apply_channel_banded(a, params, L);
    ft = functional_trace(t, psi);
    partial = t.trace();
    // Tr T^j - Tr (P T P)^j <= j ||T||^{j-1} Tr(Q T Q) with ||T|| <= 1
    CompensatedSum w;
    for (std::size_t j = 1; j < c.psi.size(); ++j) w.add(static_cast<double>(j) * std::abs(c.psi[j]));
    tail = w.value() * std::max(0.0, full_trace - partial);
  }
  double measured = ft / v;
  return {measured, target, std::abs(measured - target), tail / v};
}

inline double radial_power_integral(const std::vector<RadialTerm>& f, std::size_t n) {
  // expand f^n termwise; int (1-|z|^2)^S d iota = 1/(S-1)
  std::map<double, double> acc{{0.0, 1.0}};
  for (std::size_t i = 0; i < n; ++i) {
    std::map<double, double> next;
    for (auto& [s, c] : acc)
      for (auto& t : f) next[s + t.exponent] += c * t.coeff;
    acc = std::move(next);
  }
  CompensatedSum sum;
  for (auto& [s, c] : acc) sum.add(c / (s - 1.0));
  return sum.value();
}

inline RowValues row_toeplitz_trace(const ExperimentConfig& c, std::size_t nu, double target) {
  Weight w(static_cast<double>(nu));
  const double v = w.value();
  const std::size_t N = c.L ? c.L : std::max<std::size_t>(64 * nu, 2000);
  auto f = DiskFunction::radial(c.f);
  auto d = toeplitz_diagonal(f, w, N);
  CompensatedSum s;
  for (double x : d) s.add(std::pow(x, static_cast<double>(c.n)));
  const double env = tail_envelope(d);
  // sum_{m > N} |d_m| <= sum_j |c_j| (Tr T_{(1-|z|^2)^{s_j}} - partial_j)
  CompensatedSum tail;
  for (auto& t : c.f) {
    auto dj = toeplitz_diagonal(DiskFunction::power(t.exponent), w, N);
    CompensatedSum pj;
    for (double x : dj) pj.add(x);
    tail.add(std::abs(t.coeff) * std::max(0.0, (v - 1.0) / (t.exponent - 1.0) - pj.value()));
  }
  double measured = s.value() / (v - 1.0);
  double tb = std::pow(env, static_cast<double>(c.n) - 1.0) * tail.value() / (v - 1.0);
  return {measured, target, std::abs(measured - target), tb};
}

inline RowValues row_berezin_eigen(const ExperimentConfig& c, std::size_t nu) {
  Weight w(static_cast<double>(nu));
  auto q = build_quadrature(c.radial_count, c.angular_count, 2.0);
  auto f = DiskFunction::eigen(c.lambda, 1.0);
  const double target = berezin_multiplier(w, c.lambda);
  RowValues r{target, target, 0.0, 0.0};
  for (cplx z : experiment_samples()) {
    cplx ratio = (w.value() - 1.0) * berezin_transform(f, w, z, q) / f(z);
    double e = std::abs(ratio - target);
    if (e > r.abs_error) r = {ratio.real(), target, e, 0.0};
  }
  return r;
}

inline RowValues row_husimi_check(const ExperimentConfig& c, std::size_t nu, double target) {
  auto a = input_operator(c);
  ChannelParams params{Weight(c.mu), Weight(static_cast<double>(nu)), c.k};
  const double v = static_cast<double>(nu);
  std::size_t L = c.L ? c.L : std::max<std::size_t>(256 * (nu + c.k), 2000);
  auto d = apply_channel_diagonal(real_diagonal(a), params, L);
  CompensatedSum s;
  for (double x : d) s.add(x);
  double measured = s.value() / v;
  double tail = std::max(0.0, params.trace_factor() * a.trace().real() - s.value()) / v;
  return {measured, target, std::abs(measured - target), tail};
}

inline RowValues row_e_identity(const ExperimentConfig& c, std::size_t nu) {
  auto f = DiskFunction::radial(c.f);
  Weight mu(c.mu), w(static_cast<double>(nu));
  double worst = 0.0, at = 0.0;
  for (cplx z : experiment_samples()) {
    double lim = e_mu_k(f, mu, c.k, z);
    double fin = e_mu_k(f, mu, c.k, z, w);
    if (std::abs(fin - lim) >= worst) worst = std::abs(fin - lim), at = fin - lim;
  }
  return {at, 0.0, worst, 0.0};
}

// sum_i ((nu/2)_i/(nu)_i)^2, the closed form of I_2(nu)
inline double chain_two_series(double nu) {
  const double kappa = 0.5 * nu;
  CompensatedSum s;
  s.add(1.0);
  double term = 1.0;
  std::size_t i = 0;
  for (; i < 10000000; ++i) {
    double q = (kappa + static_cast<double>(i)) / (nu + static_cast<double>(i));
    term *= q * q;
    s.add(term);
    if (term < 1e-18) break;
  }
  // term ~ c i^{-nu}
  s.add(term * static_cast<double>(i + 1) / (nu - 1.0));
  return s.value();
}

inline RowValues row_kernel_chain(const ExperimentConfig& c, std::size_t nu) {
  Weight w(static_cast<double>(nu));
  auto r = chained_kernel_integral(c.n, w, Rng::splitmix(c.seed ^ static_cast<std::uint64_t>(nu)), c.samples, 1);
  if (c.n <= 2) {
    double target = c.n == 1 ? 1.0 : chain_two_series(w.value());
    return {r.estimate, target, std::abs(r.estimate - target), r.half_width};
  }
  double bound = std::pow(9.0, static_cast<double>(c.n));
  return {r.estimate, bound, std::max(0.0, r.estimate + r.half_width - bound), r.half_width};
}

}  // namespace detail

inline ExperimentReport run_experiment(const ExperimentConfig& c) {
  ExperimentReport rep;
  rep.experiment = to_string(c.experiment);
  rep.config = config_echo(c);
  rep.rows.resize(c.nu_list.size());

  std::optional<double> shared_target;
  rep.target_kind = "closed-form";
  switch (c.experiment) {
    case ExperimentKind::channel_limit:
      if (c.input_state == InputState::lowest) {
        shared_target = detail::lowest_state_target(c);
      } else {
        auto a = detail::input_operator(c);
        const Polynomial psi(c.psi);
        shared_target = husimi_functional_integral(a, c.k, psi, c.radial_count, c.angular_count);
        rep.target_kind = "quadrature";
      }
      break;
    case ExperimentKind::toeplitz_trace: shared_target = detail::radial_power_integral(c.f, c.n); break;
    case ExperimentKind::husimi_check:
      shared_target = husimi_integral(detail::input_operator(c), c.k);
      rep.target_kind = "quadrature";
      break;
    case ExperimentKind::e_identity: rep.target_kind = "limit"; break;
    case ExperimentKind::kernel_chain: rep.target_kind = c.n <= 2 ? "closed-form" : "bound"; break;
    default: break;
  }

  parallel_for(c.nu_list.size(), c.threads, [&](std::size_t i) {
    const std::size_t nu = c.nu_list[i];
    auto& row = rep.rows[i];
    row.nu = nu;
    auto t0 = std::chrono::steady_clock::now();
    try {
      detail::RowValues v{};
      switch (c.experiment) {
        case ExperimentKind::constants: v = detail::row_constants(c, nu); break;
        case ExperimentKind::channel_limit: v = detail::row_channel_limit(c, nu, *shared_target); break;
        case ExperimentKind::toeplitz_trace: v = detail::row_toeplitz_trace(c, nu, *shared_target); break;
        case ExperimentKind::berezin_eigen: v = detail::row_berezin_eigen(c, nu); break;
        case ExperimentKind::husimi_check: v = detail::row_husimi_check(c, nu, *shared_target); break;
        case ExperimentKind::e_identity: v = detail::row_e_identity(c, nu); break;
        case ExperimentKind::kernel_chain: v = detail::row_kernel_chain(c, nu); break;
      }
      row.measured = v.measured;
      row.target = v.target;
      row.abs_error = v.abs_error;
      row.tail_bound = v.tail_bound;
    } catch (const std::exception& e) {
      row.measured = row.target = row.abs_error = row.tail_bound = std::nan("");
      row.status = std::string("error: ") + e.what();
    }
    if (c.timing) row.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  for (auto& r : rep.rows) {
    std::string tag = "nu=" + std::to_string(r.nu) + ": ";
    if (r.status != "ok") {
      rep.failures.push_back(tag + r.status);
    } else if (!(r.abs_error <= c.tolerance + r.tail_bound)) {
      rep.failures.push_back(tag + "abs_error " + detail::fmt_real(r.abs_error) + " exceeds tolerance " +
                             detail::fmt_real(c.tolerance) + " + tail " + detail::fmt_real(r.tail_bound));
    }
  }
  rep.fitted_order = fit_order(rep.rows);
  if (c.order_target && rep.fitted_order &&
      !(std::abs(rep.fitted_order->order - *c.order_target) <= c.order_tolerance))
    rep.failures.push_back("fitted order " + detail::fmt_real(rep.fitted_order->order) + " outside " +
                           detail::fmt_real(*c.order_target) + " +/- " + detail::fmt_real(c.order_tolerance));
  rep.passed = rep.failures.empty();
  return rep;
}

inline constexpr const char* csv_header = "nu,measured,target,abs_error,tail_bound,seconds";

inline std::string report_csv(const ExperimentReport& r) {
  std::string s = std::string(csv_header) + "\n";
  for (auto& row : r.rows) {
    s += std::to_string(row.nu);
    for (double x : {row.measured, row.target, row.abs_error, row.tail_bound, row.seconds}) s += "," + detail::fmt_real(x);
    s += "\n";
  }
  return s;
}

namespace detail {

inline nlohmann::ordered_json num(double x) {
  if (std::isfinite(x)) return x;
  return nullptr;
}

inline double num_back(const nlohmann::ordered_json& j) { return j.is_null() ? std::nan("") : j.get<double>(); }

}  // namespace detail

inline nlohmann::ordered_json report_json(const ExperimentReport& r) {
  nlohmann::ordered_json j;
  j["version"] = r.version;
  j["experiment"] = r.experiment;
  j["target_kind"] = r.target_kind;
  j["config"] = nlohmann::ordered_json::object();
  for (auto& [k, v] : r.config) j["config"][k] = v;
  j["rows"] = nlohmann::ordered_json::array();
  for (auto& row : r.rows)
    j["rows"].push_back({{"nu", row.nu},
                         {"measured", detail::num(row.measured)},
                         {"target", detail::num(row.target)},
                         {"abs_error", detail::num(row.abs_error)},
                         {"tail_bound", detail::num(row.tail_bound)},
                         {"seconds", detail::num(row.seconds)},
                         {"status", row.status}});
  if (r.fitted_order)
    j["fitted_order"] = {{"order", r.fitted_order->order}, {"std_error", detail::num(r.fitted_order->std_error)}};
  else
    j["fitted_order"] = nullptr;
  j["passed"] = r.passed;
  j["failures"] = r.failures;
  return j;
}

inline ExperimentReport report_from_json(const nlohmann::ordered_json& j) {
  ExperimentReport r;
  r.version = j.at("version").get<std::string>();
  r.experiment = j.at("experiment").get<std::string>();
  r.target_kind = j.at("target_kind").get<std::string>();
  for (auto& [k, v] : j.at("config").items()) r.config.emplace_back(k, v.get<std::string>());
  for (auto& jr : j.at("rows")) {
    ReportRow row;
    row.nu = jr.at("nu").get<std::size_t>();
    row.measured = detail::num_back(jr.at("measured"));
    row.target = detail::num_back(jr.at("target"));
    row.abs_error = detail::num_back(jr.at("abs_error"));
    row.tail_bound = detail::num_back(jr.at("tail_bound"));
    row.seconds = detail::num_back(jr.at("seconds"));
    row.status = jr.at("status").get<std::string>();
    r.rows.push_back(row);
  }
  if (!j.at("fitted_order").is_null())
    r.fitted_order = FittedOrder{j["fitted_order"].at("order").get<double>(),
                                 detail::num_back(j["fitted_order"].at("std_error"))};
  r.passed = j.at("passed").get<bool>();
  r.failures = j.at("failures").get<std::vector<std::string>>();
  return r;
}

inline std::string format_report(const ExperimentReport& r, ReportFormat f) {
  if (f == ReportFormat::csv) return report_csv(r);
  return report_json(r).dump(2) + "\n";
}

// Writes to path, or to stdout when path is empty or "-".
inline void emit_report(const ExperimentReport& r, ReportFormat f, const std::string& path) {
  std::string text = format_report(r, f);
  if (path.empty() || path == "-") {
    std::fwrite(text.data(), 1, text.size(), stdout);
    std::fflush(stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

}  // namespace su11
