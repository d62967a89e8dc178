#include <doctest.h>

#include <cmath>

#include "evalign/ssm.hpp"
#include "test_support.hpp"

using namespace evalign;

namespace {

SSMParams random_params(std::uint64_t seed, int n, int channels,
                        double delta) {
  Rng rng(seed);
  SSMParams p;
  p.a.resize(static_cast<std::size_t>(n));
  for (auto& a : p.a) a = -rng.uniform(0.05, 2.0);
  p.b.resize(static_cast<std::size_t>(n) * channels);
  for (auto& b : p.b) b = rng.uniform(-1, 1);
  p.c.resize(static_cast<std::size_t>(n) * channels);
  for (auto& c : p.c) c = rng.uniform(-1, 1);
  p.d.resize(static_cast<std::size_t>(channels));
  for (auto& d : p.d) d = rng.uniform(-1, 1);
  p.delta = {delta};
  return p;
}

std::vector<double> random_input(std::uint64_t seed, std::size_t n) {
  Rng rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = rng.uniform(-1, 1);
  return x;
}

}  // namespace

TEST_CASE("discretize: closed-form example") {
  const double ln2 = std::log(2.0);
  const Discretized d = discretize({-1.0}, {1.0}, ln2);
  CHECK(d.abar[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(d.bbar[0] == doctest::Approx(0.5).epsilon(1e-14));
}

TEST_CASE("discretize: zero dynamics takes the series limit") {
  const Discretized d = discretize({0.0}, {2.0}, 0.1);
  CHECK(d.abar[0] == 1.0);
  CHECK(d.bbar[0] == doctest::Approx(0.2).epsilon(1e-15));
}

TEST_CASE("discretize is continuous across the series switch point") {
  // |delta a| just above and below 1e-6 must agree to ulp-level
  const double delta = 1.0;
  const Discretized lo = discretize({-0.999999e-6}, {1.0}, delta);
  const Discretized hi = discretize({-1.000001e-6}, {1.0}, delta);
  CHECK(lo.bbar[0] == doctest::Approx(hi.bbar[0]).epsilon(1e-12));
}

TEST_CASE("discretize matches quadrature of the matrix exponential integral") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const double a = rng.uniform(-3.0, 0.5);
    const double b = rng.uniform(-2.0, 2.0);
    const double delta = rng.uniform(0.01, 2.0);
    const Discretized d = discretize({a}, {b}, delta);
    CHECK(d.bbar[0] ==
          doctest::Approx(testsup::zoh_bbar_quadrature(a, b, delta))
              .epsilon(1e-10));
  }
}

TEST_CASE("discretize rejects non-positive delta") {
  CHECK_THROWS_AS(discretize({-1.0}, {1.0}, 0.0), NonPositiveDelta);
  CHECK_THROWS_AS(discretize({-1.0}, {1.0}, -0.5), NonPositiveDelta);
}

TEST_CASE("impulse response decays geometrically") {
  // abar = 0.5, bbar = 1: pick a = ln(0.5), delta = 1, b from the closed form
  SSMParams p;
  const double a = std::log(0.5);
  p.a = {a};
  p.b = {a / (0.5 - 1.0)};  // makes bbar = (abar-1)/a * b = 1
  p.c = {1.0};
  p.d = {0.0};
  p.delta = {1.0};
  const std::vector<double> y = selective_scan(p, {1.0, 0.0, 0.0}, 3);
  CHECK(y[0] == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(y[2] == doctest::Approx(0.25).epsilon(1e-14));
}

TEST_CASE("feedthrough-only scan is the identity") {
  SSMParams p = random_params(4, 3, 2, 1.0);
  std::fill(p.c.begin(), p.c.end(), 0.0);
  std::fill(p.d.begin(), p.d.end(), 1.0);
  const std::vector<double> x = random_input(5, 64 * 2);
  const std::vector<double> y = selective_scan(p, x, 64);
  CHECK(y == x);
}

TEST_CASE("constant-delta scan matches the convolution oracle") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.below(8));
    const int ch = 1 + static_cast<int>(rng.below(3));
    const std::size_t length = 2 + rng.below(63);
    const SSMParams p = random_params(seed * 31 + 7, n, ch, rng.uniform(0.2, 1.5));
    const std::vector<double> x = random_input(seed * 77 + 1, length * ch);
    const std::vector<double> got = selective_scan(p, x, length);
    const std::vector<double> want = testsup::scan_conv_oracle(p, x, length);
    for (std::size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - want[i]) < 1e-10);
    }
  }
}

TEST_CASE("scan is linear in the input for fixed delta") {
  const SSMParams p = random_params(9, 4, 2, 0.7);
  const std::size_t length = 48;
  const std::vector<double> x1 = random_input(10, length * 2);
  const std::vector<double> x2 = random_input(11, length * 2);
  const double alpha = 1.7, beta = -0.4;
  std::vector<double> mix(x1.size());
  for (std::size_t i = 0; i < mix.size(); ++i)
    mix[i] = alpha * x1[i] + beta * x2[i];
  const std::vector<double> y_mix = selective_scan(p, mix, length);
  const std::vector<double> y1 = selective_scan(p, x1, length);
  const std::vector<double> y2 = selective_scan(p, x2, length);
  for (std::size_t i = 0; i < mix.size(); ++i) {
    CHECK(std::abs(y_mix[i] - (alpha * y1[i] + beta * y2[i])) < 1e-10);
  }
}

TEST_CASE("changing the input at position t never changes earlier outputs") {
  const SSMParams p = random_params(13, 3, 1, 1.0);
  const std::size_t length = 32;
  std::vector<double> x = random_input(14, length);
  const std::vector<double> y = selective_scan(p, x, length);
  x[20] += 100.0;
  const std::vector<double> y2 = selective_scan(p, x, length);
  for (std::size_t i = 0; i < 20; ++i) CHECK(y[i] == y2[i]);
  CHECK(y[20] != y2[20]);
}

TEST_CASE("stable systems keep bounded inputs bounded") {
  for (std::uint64_t seed = 40; seed < 50; ++seed) {
    const SSMParams p = random_params(seed, 4, 1, 1.0);
    const Discretized d = discretize(p.a, std::vector<double>(4, 1.0),
                                     p.delta[0]);
    double bound = std::abs(p.d[0]);
    for (std::size_t i = 0; i < p.a.size(); ++i) {
      bound += std::abs(p.c[i] * d.bbar[i] * p.b[i]) / (1.0 - d.abar[i]);
    }
    const std::size_t length = 512;
    const std::vector<double> x = random_input(seed + 1, length);
    const std::vector<double> y = selective_scan(p, x, length);
    for (double v : y) CHECK(std::abs(v) <= bound * (1.0 + 1e-12));
  }
}

TEST_CASE("chunked scan equals the one-shot scan bitwise") {
  for (std::uint64_t seed = 60; seed < 70; ++seed) {
    Rng rng(seed);
    const int n = 1 + static_cast<int>(rng.below(6));
    const int ch = 1 + static_cast<int>(rng.below(3));
    const std::size_t length = 10 + rng.below(54);
    SSMParams p = random_params(seed * 3 + 1, n, ch, 1.0);
    // per-position delta to exercise the selective path
    p.delta.assign(length, 0.0);
    Rng drng(seed + 500);
    for (auto& dl : p.delta) dl = drng.uniform(0.1, 2.0);
    const std::vector<double> x =
        random_input(seed * 7 + 5, length * static_cast<std::size_t>(ch));

    const std::vector<double> oneshot = selective_scan(p, x, length);

    std::vector<double> chunked;
    ScanState state = make_scan_state(p);
    std::size_t pos = 0;
    std::size_t step = 1 + seed % 7;
    while (pos < length) {
      const std::size_t len = std::min(step, length - pos);
      std::vector<double> part(
          x.begin() + static_cast<std::ptrdiff_t>(pos * ch),
          x.begin() + static_cast<std::ptrdiff_t>((pos + len) * ch));
      const std::vector<double> yp = scan_chunk(p, part, len, pos, state);
      chunked.insert(chunked.end(), yp.begin(), yp.end());
      pos += len;
      step = step * 2 + 1;
    }
    CHECK(chunked == oneshot);
  }
}

TEST_CASE("per-position delta changes the dynamics") {
  SSMParams p = random_params(70, 2, 1, 1.0);
  const std::size_t length = 16;
  const std::vector<double> x = random_input(71, length);
  const std::vector<double> y_const = selective_scan(p, x, length);
  p.delta.assign(length, 1.0);
  p.delta[8] = 0.01;
  const std::vector<double> y_var = selective_scan(p, x, length);
  for (std::size_t i = 0; i < 8; ++i) CHECK(y_const[i] == y_var[i]);
  CHECK(y_const[8] != y_var[8]);
}

TEST_CASE("shape and stability validation") {
  SSMParams p = random_params(80, 3, 2, 1.0);
  CHECK_NOTHROW(p.validate(16));
  CHECK_NOTHROW(p.validate(16, true));
  SSMParams bad = p;
  bad.b.pop_back();
  CHECK_THROWS_AS(bad.validate(16), ShapeMismatch);
  bad = p;
  bad.delta = {-1.0};
  CHECK_THROWS_AS(bad.validate(16), NonPositiveDelta);
  bad = p;
  bad.a[0] = 0.5;
  CHECK_NOTHROW(bad.validate(16));
  CHECK_THROWS_AS(bad.validate(16, true), ValidationError);
  const std::vector<double> x = random_input(81, 8);
  CHECK_THROWS_AS(selective_scan(p, x, 8), ShapeMismatch);  // 8*2 != 8
}
