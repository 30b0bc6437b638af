#include <doctest.h>

#include <cmath>
#include <sstream>

#include "entroshape/csv.hpp"
#include "entroshape/error.hpp"
#include "entroshape/kernel.hpp"
#include "oracles.hpp"

using namespace entroshape;

namespace {
ErrorSet line01() { return ErrorSet::from_rows({{0.0}, {1.0}}); }
}  // namespace

TEST_CASE("kernel of identical samples is one") {
  const auto k = pairwise_kernel(ErrorSet::from_rows({{0.3, -1.2}, {0.3, -1.2}}), 0.7);
  CHECK(k(0, 1) == 1.0);
  CHECK(k(1, 0) == 1.0);
}

TEST_CASE("kernel on {0,1} at sigma 0.5") {
  const auto k = pairwise_kernel(line01(), 0.5);
  const double expected = static_cast<double>(oracle::kernel({0.0L}, {1.0L}, 0.5L));
  CHECK(k(0, 1) == doctest::Approx(expected).epsilon(1e-15));
  CHECK(k(0, 1) == doctest::Approx(0.135335).epsilon(1e-6));
  CHECK(k(0, 0) == 1.0);
}

TEST_CASE("single sample gives a 1x1 unit kernel") {
  const auto k = pairwise_kernel(ErrorSet::from_rows({{4.0, 5.0}}), 1.0);
  REQUIRE(k.size() == 1);
  CHECK(k(0, 0) == 1.0);
}

TEST_CASE("kernel rejects bad bandwidths") {
  const auto e = line01();
  CHECK_THROWS_AS(pairwise_kernel(e, 0.0), ConfigError);
  CHECK_THROWS_AS(pairwise_kernel(e, -1.0), ConfigError);
  CHECK_THROWS_AS(pairwise_kernel(e, std::nan("")), ConfigError);
  CHECK_THROWS_AS(information_potential(e, 0.0), ConfigError);
}

TEST_CASE("mismatched sample lengths are an input error") {
  CHECK_THROWS_AS(ErrorSet::from_rows({{0.0, 1.0}, {2.0}}), InputError);
  CHECK_THROWS_AS(ErrorSet(2, {1.0, 2.0, 3.0}), InputError);
  CHECK_THROWS_AS(ErrorSet(0, {}), InputError);
}

TEST_CASE("information potential") {
  CHECK(information_potential(ErrorSet::from_rows({{1.0}, {1.0}, {1.0}}), 0.5) == 9.0);
  CHECK(information_potential(ErrorSet::from_rows({{2.0}}), 0.5) == 1.0);
  const double z = information_potential(line01(), 0.5);
  CHECK(z == doctest::Approx(static_cast<double>(oracle::potential({{0.0L}, {1.0L}}, 0.5L)))
                 .epsilon(1e-15));
  CHECK(z == doctest::Approx(2.270671).epsilon(1e-6));
}

TEST_CASE("potential matches the naive double sum on random sets") {
  Rng rng(11);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 1 + rep * 3;
    const std::size_t d = 1 + rep % 5;
    const double sigma = 0.3 + 0.2 * rep;
    const auto e = oracle::random_set(rng, n, d, 1.0);
    const double z = information_potential(e, sigma);
    const auto ref = oracle::potential(oracle::rows_of(e), sigma);
    CHECK(z == doctest::Approx(static_cast<double>(ref)).epsilon(1e-13));
    CHECK(z >= static_cast<double>(n));
    CHECK(z <= static_cast<double>(n * n));
    const double deficit = potential_deficit(e, sigma);
    CHECK(deficit == doctest::Approx(static_cast<double>(n * n - ref)).epsilon(1e-10));
  }
}

TEST_CASE("high-dimensional distances agree with direct differences") {
  Rng rng(5);
  const auto e = oracle::random_set(rng, 12, 40, 1.0);
  REQUIRE(e.dim() >= PairwiseDistances::kFactorizedMinDim);
  const PairwiseDistances dist(e);
  const auto rows = oracle::rows_of(e);
  for (std::size_t i = 0; i < e.size(); ++i)
    for (std::size_t j = 0; j < e.size(); ++j) {
      CHECK(dist(i, j) >= 0.0);
      CHECK(dist(i, j) == doctest::Approx(static_cast<double>(oracle::sq_dist(rows[i], rows[j])))
                              .epsilon(1e-12)
                              .scale(1.0));
    }
  CHECK(dist(3, 3) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("kernel complement keeps precision near collapse") {
  const auto v = gaussian_kernel(1e-20);
  CHECK(v.value == 1.0);
  CHECK(v.complement == doctest::Approx(1e-20).epsilon(1e-12));
  const auto far = gaussian_kernel(3.0);
  CHECK(far.value == doctest::Approx(std::exp(-3.0)).epsilon(1e-15));
  CHECK(far.complement == doctest::Approx(1.0 - std::exp(-3.0)).epsilon(1e-15));
}

TEST_CASE("threaded evaluation is bit-identical in deterministic mode") {
  Rng rng(99);
  const auto e = oracle::random_set(rng, 150, 3, 0.8);
  const double serial = information_potential(e, 0.5, {1, true});
  for (unsigned threads : {2u, 3u, 8u}) {
    CHECK(information_potential(e, 0.5, {threads, true}) == serial);
    CHECK(pairwise_kernel(e, 0.5, {threads, true}).entries() ==
          pairwise_kernel(e, 0.5, {1, true}).entries());
  }
  CHECK(information_potential(e, 0.5, {4, false}) == doctest::Approx(serial).epsilon(1e-13));
}

TEST_CASE("flatten_batch ordering and counts") {
  SUBCASE("single vector") {
    const auto e = flatten_batch(std::vector<double>{1.5, -2.0}, {1, 1, 1, 2});
    REQUIRE(e.size() == 1);
    CHECK(e.sample(0)[0] == 1.5);
    CHECK(e.sample(0)[1] == -2.0);
  }
  SUBCASE("B=2 T=1 K=2 order") {
    const auto e = flatten_batch(std::vector<double>{0, 1, 2, 3}, {2, 1, 2, 1});
    REQUIRE(e.size() == 4);
    const std::vector<SampleIndex> expected = {{0, 0, 0}, {0, 0, 1}, {1, 0, 0}, {1, 0, 1}};
    CHECK(e.provenance() == expected);
    for (std::size_t i = 0; i < 4; ++i) CHECK(e.sample(i)[0] == static_cast<double>(i));
  }
  SUBCASE("B=2 T=3 K=8") {
    const auto e = flatten_batch(std::vector<double>(2 * 3 * 8 * 2, 0.0), {2, 3, 8, 2});
    CHECK(e.size() == 48);
  }
  SUBCASE("nested form") {
    std::vector<std::vector<std::vector<std::vector<double>>>> nested = {
        {{{1.0}, {2.0}}}, {{{3.0}, {4.0}}}};
    const auto e = flatten_batch(nested);
    CHECK(e.values() == std::vector<double>{1, 2, 3, 4});
    CHECK(e.provenance()[3] == SampleIndex{1, 0, 1});
    nested[1][0].pop_back();
    CHECK_THROWS_AS(flatten_batch(nested), InputError);
  }
  SUBCASE("size mismatch") {
    CHECK_THROWS_AS(flatten_batch(std::vector<double>(5), {1, 1, 2, 2}), InputError);
  }
}

TEST_CASE("error set CSV round trip is exact") {
  Rng rng(3);
  auto e = flatten_batch(oracle::random_set(rng, 6, 3, 1e-3).values(), {2, 3, 1, 3});
  std::stringstream buf;
  write_error_set_csv(buf, e);
  const auto back = read_error_set_csv(buf);
  CHECK(back == e);

  std::stringstream bad("b,t,k,e_0\n0,0,0,1.0\n0,0,1\n");
  CHECK_THROWS_AS(read_error_set_csv(bad), InputError);
  std::stringstream dup("b,t,k,e_0\n0,0,0,1.0\n0,0,0,2.0\n");
  CHECK_THROWS_AS(read_error_set_csv(dup), InputError);
}

TEST_CASE("csv number formatting round trips") {
  for (double x : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0})
    CHECK(csv::parse_double(csv::format(x)) == x);
  CHECK_THROWS_AS(csv::parse_double("1.0x"), InputError);
  CHECK_THROWS_AS(csv::parse_uint("-1"), InputError);
}
