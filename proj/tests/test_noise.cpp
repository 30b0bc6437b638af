#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/noise.hpp"

using namespace entroshape;

TEST_CASE("noise defaults") {
  const NoiseSpec s;
  CHECK(s.gamma == 0.02);
  CHECK(s.p == 0.05);
  CHECK(s.kind == NoiseKind::NONE);
}

TEST_CASE("identity cases") {
  const std::vector<double> a = {0.1, -0.2, 0.3, 0.4};
  NoiseSpec s;
  CHECK(corrupt_actions(a, s) == a);
  s.kind = NoiseKind::IMPULSE;
  s.p = 0.0;
  CHECK(corrupt_actions(a, s) == a);
}

TEST_CASE("same seed, same corruption; different seed differs") {
  const std::vector<double> a(64, 0.5);
  for (auto kind : {NoiseKind::CAUCHY, NoiseKind::IMPULSE}) {
    NoiseSpec s;
    s.kind = kind;
    s.p = 0.5;
    s.seed = 17;
    CHECK(corrupt_actions(a, s) == corrupt_actions(a, s));
    auto t = s;
    t.seed = 18;
    CHECK(corrupt_actions(a, s) != corrupt_actions(a, t));
  }
}

TEST_CASE("impulse fraction over 1e6 draws") {
  const std::size_t n = 1000000;
  const std::vector<double> a(n, 0.0);
  NoiseSpec s;
  s.kind = NoiseKind::IMPULSE;
  s.seed = 5;
  const auto out = corrupt_actions(a, s);
  const auto hits = std::count_if(out.begin(), out.end(), [](double x) { return x != 0.0; });
  const double frac = static_cast<double>(hits) / static_cast<double>(n);
  CHECK(std::abs(frac - s.p) <= 3.0 * std::sqrt(s.p * (1 - s.p) / static_cast<double>(n)));
  // Deviations are zero-mean with the configured spread.
  double sum = 0.0, sq = 0.0;
  for (double x : out)
    if (x != 0.0) {
      sum += x;
      sq += x * x;
    }
  const double h = static_cast<double>(hits);
  CHECK(std::abs(sum / h) < 4.0 * s.impulse_std / std::sqrt(h));
  CHECK(std::sqrt(sq / h) == doctest::Approx(s.impulse_std).epsilon(0.02));
}

TEST_CASE("truncated cauchy over 1e6 draws") {
  const std::size_t n = 1000000;
  const std::vector<double> a(n, 0.25);
  NoiseSpec s;
  s.kind = NoiseKind::CAUCHY;
  s.truncation_bound = 0.3;
  s.seed = 9;
  auto out = corrupt_actions(a, s);
  std::vector<double> dev(n);
  for (std::size_t i = 0; i < n; ++i) {
    dev[i] = out[i] - 0.25;
    CHECK_MESSAGE(std::abs(dev[i]) <= s.truncation_bound + 1e-15, "element " << i);
    if (std::abs(dev[i]) > s.truncation_bound + 1e-15) break;
  }
  std::nth_element(dev.begin(), dev.begin() + n / 2, dev.end());
  CHECK(std::abs(dev[n / 2]) < 1e-3);
  // Interquartile half-width of Cauchy(0, gamma) is gamma.
  std::nth_element(dev.begin(), dev.begin() + 3 * n / 4, dev.end());
  const double q3 = dev[3 * n / 4];
  CHECK(q3 == doctest::Approx(s.gamma).epsilon(0.02));
}

TEST_CASE("noise validation and input errors") {
  NoiseSpec s;
  s.kind = NoiseKind::CAUCHY;
  CHECK_THROWS_AS(corrupt_actions(std::vector<double>{1.0, NAN}, s), InputError);
  CHECK_THROWS_AS(corrupt_actions(std::vector<double>{INFINITY}, s), InputError);
  s.gamma = 0.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.kind = NoiseKind::IMPULSE;
  s.p = 1.5;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = {};
  s.truncation_bound = -1.0;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  CHECK(parse_noise_kind("cauchy") == NoiseKind::CAUCHY);
  CHECK_THROWS_AS(parse_noise_kind("gaussian"), ConfigError);
}
