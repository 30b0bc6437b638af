#include <doctest.h>

#include <cmath>

#include "entroshape/error.hpp"
#include "entroshape/gradients.hpp"
#include "entroshape/losses.hpp"
#include "oracles.hpp"

using namespace entroshape;

namespace {
ErrorSet line01() { return ErrorSet::from_rows({{0.0}, {1.0}}); }

std::vector<double> oracle_tmee_grad(const ErrorSet& e, double sigma) {
  return oracle::gradient([&](const oracle::Rows& r) { return oracle::tmee(r, sigma); },
                          oracle::rows_of(e));
}
std::vector<double> oracle_weighted_grad(const ErrorSet& e, const LossConfig& c) {
  const bool cw = c.variant == Variant::CW_TMEE;
  return oracle::gradient(
      [&](const oracle::Rows& r) { return oracle::weighted(r, c.sigma, c.sigma_w, cw); },
      oracle::rows_of(e));
}
}  // namespace

TEST_CASE("tmee gradient on collapsed set is zero") {
  const auto g = tmee_gradient(ErrorSet::from_rows({{0.4, 1.0}, {0.4, 1.0}, {0.4, 1.0}}), 0.5);
  for (double v : g.values) CHECK(v == 0.0);
}

TEST_CASE("tmee gradient on {0,1}") {
  const auto g = tmee_gradient(line01(), 0.5);
  const auto ref = oracle_tmee_grad(line01(), 0.5);
  CHECK(g.values[0] == doctest::Approx(ref[0]).epsilon(1e-9));
  CHECK(g.values[1] == doctest::Approx(ref[1]).epsilon(1e-9));
  CHECK(g.values[0] == doctest::Approx(-0.476812).epsilon(1e-6));
  CHECK(g.values[1] == doctest::Approx(0.476812).epsilon(1e-6));
  CHECK(g.loss_value == tmee_loss(line01(), 0.5));
  CHECK_THROWS_AS(tmee_gradient(line01(), -1.0), ConfigError);
}

TEST_CASE("tmee gradient against a long-double oracle") {
  Rng rng(1234);
  for (int rep = 0; rep < 25; ++rep) {
    const double sigma = (rep % 3 == 0) ? 0.5 : (rep % 3 == 1 ? 1.0 : 2.0);
    const auto e = oracle::random_set(rng, 2 + rep, 1 + rep % 8, sigma * 0.7);
    const auto g = tmee_gradient(e, sigma);
    CHECK(relative_error(g.values, oracle_tmee_grad(e, sigma)) < 1e-8);
  }
}

TEST_CASE("tmee gradient sums to zero and points toward other samples") {
  Rng rng(4);
  for (int rep = 0; rep < 20; ++rep) {
    const auto e = oracle::random_set(rng, 3 + rep, 3, 1.0);
    const auto g = tmee_gradient(e, 0.8);
    double scale = 0.0;
    for (double v : g.values) scale = std::max(scale, std::abs(v));
    for (std::size_t d = 0; d < 3; ++d) {
      double sum = 0.0;
      for (std::size_t i = 0; i < e.size(); ++i) sum += g.at(i)[d];
      CHECK(std::abs(sum) <= 1e-13 * scale * static_cast<double>(e.size()));
    }
  }
  // Two points: the force -g on each is a positive multiple of the direction to the other.
  const auto e = ErrorSet::from_rows({{0.3, -0.2}, {1.1, 0.5}});
  const auto g = tmee_gradient(e, 0.7);
  for (std::size_t i = 0; i < 2; ++i) {
    const std::size_t j = 1 - i;
    const double dx = e.sample(j)[0] - e.sample(i)[0];
    const double dy = e.sample(j)[1] - e.sample(i)[1];
    const double fx = -g.at(i)[0];
    const double fy = -g.at(i)[1];
    CHECK(fx * dx + fy * dy > 0.0);
    CHECK(std::abs(fx * dy - fy * dx) <= 1e-15);
  }
}

TEST_CASE("weighted gradients") {
  LossConfig c;
  SUBCASE("collapsed set is stationary") {
    for (auto v : {Variant::CW_TMEE, Variant::EW_TMEE}) {
      c.variant = v;
      const auto g = weighted_tmee_gradient(ErrorSet::from_rows({{0.2}, {0.2}, {0.2}}), c);
      for (double x : g.values) CHECK(x == doctest::Approx(0.0).scale(1.0).epsilon(1e-15));
    }
  }
  SUBCASE("Ew on {0,1} matches central differences") {
    c.variant = Variant::EW_TMEE;
    const auto g = weighted_tmee_gradient(line01(), c);
    const auto fd = finite_difference_oracle(
        [&](const ErrorSet& e) { return weighted_tmee_loss(e, c); }, line01());
    CHECK(relative_error(g.values, fd.values) < 1e-6);
    CHECK(relative_error(g.values, oracle_weighted_grad(line01(), c)) < 1e-9);
  }
  SUBCASE("random instances against the long-double oracle") {
    Rng rng(77);
    for (int rep = 0; rep < 40; ++rep) {
      c.variant = rep % 2 ? Variant::CW_TMEE : Variant::EW_TMEE;
      c.sigma = 0.5 * (1 + rep % 3);
      c.sigma_w = 0.5 + 0.25 * (rep % 4);
      const auto e = oracle::random_set(rng, 2 + rep % 10, 1 + rep % 5, 0.6);
      const auto g = weighted_tmee_gradient(e, c);
      CHECK(relative_error(g.values, oracle_weighted_grad(e, c)) < 1e-7);
      CHECK(g.loss_value == weighted_tmee_loss(e, c));
    }
  }
  SUBCASE("skewed weights keep relative accuracy") {
    // One weight ~1e-16: the weight-logit term is a small difference of
    // quantities near one and must not be formed by subtraction.
    c.variant = Variant::EW_TMEE;
    c.sigma = 2.0;
    const auto e = ErrorSet::from_rows(
        {{0.6465596031182459, -1.4040003971195112, 0.45493083596200007},
         {2.051756434865963, -3.3927156480951264, 1.208826923880458}});
    const auto g = weighted_tmee_gradient(e, c);
    CHECK(relative_error(g.values, oracle_weighted_grad(e, c)) < 1e-6);
  }
  SUBCASE("TMEE routed to the weighted path") {
    c.variant = Variant::TMEE;
    CHECK_THROWS_AS(weighted_tmee_gradient(line01(), c), ConfigError);
  }
}

TEST_CASE("total gradient follows the schedule") {
  Rng rng(2);
  const auto e = oracle::random_set(rng, 10, 2, 0.5);
  LossConfig c;
  const auto warm = total_gradient(e, c, 0, 300);
  CHECK(warm.values == mse_gradient(e).values);
  const auto on = total_gradient(e, c, 100, 300);
  auto expected = mse_gradient(e);
  expected.add_scaled(tmee_gradient(e, c.sigma), c.alpha);
  CHECK(relative_error(on.values, expected.values) < 1e-15);
  CHECK(on.loss_value == doctest::Approx(total_loss(e, c, 100, 300).total).epsilon(1e-15));
}

TEST_CASE("finite-difference oracle") {
  const auto mse = [](const ErrorSet& e) { return mse_loss(e); };
  const auto g = finite_difference_oracle(mse, line01());
  CHECK(g.values[0] == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK(g.values[1] == doctest::Approx(1.0).epsilon(1e-9));

  // Second order: halving h cuts the error on a smooth loss by about 4.
  const auto e = ErrorSet::from_rows({{0.0}, {0.7}, {-0.4}});
  const auto exact = oracle_tmee_grad(e, 0.5);
  const auto loss = [](const ErrorSet& x) { return tmee_loss(x, 0.5); };
  const double err1 = relative_error(finite_difference_oracle(loss, e, 1e-2).values, exact);
  const double err2 = relative_error(finite_difference_oracle(loss, e, 5e-3).values, exact);
  CHECK(err1 / err2 == doctest::Approx(4.0).epsilon(0.05));
  // Fourth order: about 16.
  const double q1 =
      relative_error(finite_difference_oracle(loss, e, 4e-2, FdStencil::CENTRAL_4).values, exact);
  const double q2 =
      relative_error(finite_difference_oracle(loss, e, 2e-2, FdStencil::CENTRAL_4).values, exact);
  CHECK(q1 / q2 == doctest::Approx(16.0).epsilon(0.1));

  const auto t = finite_difference_oracle(loss, line01());
  CHECK(relative_error(tmee_gradient(line01(), 0.5).values, t.values) < 1e-6);
  CHECK_THROWS_AS(finite_difference_oracle(loss, e, 0.0), ConfigError);
}

TEST_CASE("chain rule to parameters") {
  const auto e = ErrorSet::from_rows({{0.5, -1.0}, {2.0, 0.25}});
  const auto g = tmee_gradient(e, 0.6);
  SUBCASE("identity policy") {
    // yhat_i = theta_i: parameters are the outputs themselves.
    const auto p = chain_to_parameters(g, 2, 4, [](std::size_t i, auto gi, auto out) {
      for (std::size_t d = 0; d < 2; ++d) out[i * 2 + d] += gi[d];
    });
    CHECK(p == g.values);
  }
  SUBCASE("linear policy W x") {
    const std::vector<std::vector<double>> xs = {{1.0, 2.0, -1.0}, {0.5, 0.0, 3.0}};
    const auto p = chain_to_parameters(g, 2, 6, [&](std::size_t i, auto gi, auto out) {
      for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < 3; ++c) out[r * 3 + c] += gi[r] * xs[i][c];
    });
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t c = 0; c < 3; ++c)
        CHECK(p[r * 3 + c] ==
              doctest::Approx(g.at(0)[r] * xs[0][c] + g.at(1)[r] * xs[1][c]).epsilon(1e-15));
  }
  SUBCASE("2-parameter linear policy against FD on theta") {
    // yhat_i = theta_0 * x_i + theta_1, scalar outputs, targets y_i.
    const std::vector<double> x = {0.0, 1.0, 2.0, 3.5}, y = {0.1, 0.9, 2.3, 3.0};
    const double theta[2] = {0.8, 0.05};
    auto errors_at = [&](double a, double b) {
      std::vector<double> v;
      for (std::size_t i = 0; i < x.size(); ++i) v.push_back(a * x[i] + b - y[i]);
      return ErrorSet(1, v);
    };
    const auto ge = tmee_gradient(errors_at(theta[0], theta[1]), 0.5);
    const auto p = chain_to_parameters(ge, 1, 2, [&](std::size_t i, auto gi, auto out) {
      out[0] += gi[0] * x[i];
      out[1] += gi[0];
    });
    const double h = 1e-6;
    const std::vector<double> fd = {
        (tmee_loss(errors_at(theta[0] + h, theta[1]), 0.5) -
         tmee_loss(errors_at(theta[0] - h, theta[1]), 0.5)) / (2 * h),
        (tmee_loss(errors_at(theta[0], theta[1] + h), 0.5) -
         tmee_loss(errors_at(theta[0], theta[1] - h), 0.5)) / (2 * h)};
    CHECK(relative_error(p, fd) < 1e-6);
  }
  CHECK_THROWS_AS(chain_to_parameters(g, 3, 6, [](std::size_t, auto, auto) {}), InputError);
}

TEST_CASE("influence curve") {
  const auto bulk = make_influence_bulk(2, 0.5, 0);
  CHECK(bulk.size() == 16);
  for (std::size_t i = 0; i < bulk.size(); ++i) {
    const double r = std::hypot(bulk.sample(i)[0], bulk.sample(i)[1]);
    CHECK(r <= 0.01 * 0.5);
  }
  std::vector<double> cs;
  for (int i = 1; i <= 100; ++i) cs.push_back(0.1 * i);
  const auto curve = influence_curve(bulk, cs, 0.5);
  REQUIRE(curve.size() == cs.size());
  // Tiny c: the outlier sits inside the bulk.
  const auto near = influence_curve(bulk, {1e-4}, 0.5);
  CHECK(near[0].tmee_grad_norm < 1e-2 * curve[9].tmee_grad_norm);
  // MSE gradient norm is linear in c once c*sigma dwarfs the bulk radius.
  CHECK(curve[79].mse_grad_norm / curve[39].mse_grad_norm == doctest::Approx(2.0).epsilon(0.01));
  // Bounded by a constant times the envelope over c in [1, 10].
  double lo = INFINITY, hi = 0.0;
  for (const auto& p : curve) {
    if (p.c < 1.0 - 1e-12) continue;
    CHECK(p.envelope == doctest::Approx(p.c * std::exp(-p.c * p.c / 2)).epsilon(1e-15));
    lo = std::min(lo, p.tmee_grad_norm / p.envelope);
    hi = std::max(hi, p.tmee_grad_norm / p.envelope);
  }
  CHECK(std::isfinite(hi));
  CHECK(hi / lo < 2.0);
}
