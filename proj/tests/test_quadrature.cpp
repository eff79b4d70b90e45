#include <cmath>

#include "doctest.h"
#include "tmm/quadrature.hpp"

using namespace tmm;

TEST_SUITE("quadrature") {

TEST_CASE("gauss rule integrates monomials exactly up to 2*nodes - 1") {
  const Quadrature q = gauss_legendre(16, -1.0, 1.0);
  REQUIRE(q.x.size() == 16);
  for (int k = 0; k <= 31; ++k) {
    double acc = 0.0;
    for (Index i = 0; i < q.x.size(); ++i) acc += q.w[i] * std::pow(q.x[i], k);
    const double exact = (k % 2 == 0) ? 2.0 / (k + 1) : 0.0;
    CHECK(acc == doctest::Approx(exact).epsilon(1e-13).scale(1.0));
  }
}

TEST_CASE("weights are positive and sum to the interval length") {
  const Quadrature q = composite_gauss_legendre(7, 10, -2.0, 3.0);
  REQUIRE(q.x.size() == 70);
  double s = 0.0;
  for (Index i = 0; i < q.w.size(); ++i) {
    CHECK(q.w[i] > 0.0);
    s += q.w[i];
  }
  CHECK(s == doctest::Approx(5.0).epsilon(1e-13));
  for (Index i = 1; i < q.x.size(); ++i) CHECK(q.x[i] > q.x[i - 1]);
  CHECK(q.x[0] > -2.0);
  CHECK(q.x[q.x.size() - 1] < 3.0);
}

TEST_CASE("smooth integrand on a shifted interval") {
  const Quadrature q = gauss_legendre(32, 0.0, 2.0);
  double acc = 0.0;
  for (Index i = 0; i < q.x.size(); ++i) acc += q.w[i] * std::exp(q.x[i]);
  CHECK(acc == doctest::Approx(std::exp(2.0) - 1.0).epsilon(1e-14));
}

TEST_CASE("composite rule resolves a sharp gaussian peak") {
  // integral of exp(-a (x-c)^2) over [-2,2] in closed form via erf.
  const double a = 400.0, c = 0.3;
  const double exact = std::sqrt(M_PI / a) / 2.0 *
                       (std::erf(std::sqrt(a) * (2.0 - c)) -
                        std::erf(std::sqrt(a) * (-2.0 - c)));
  const Quadrature q = composite_gauss_legendre(32, 16, -2.0, 2.0);
  double acc = 0.0;
  for (Index i = 0; i < q.x.size(); ++i)
    acc += q.w[i] * std::exp(-a * (q.x[i] - c) * (q.x[i] - c));
  CHECK(acc == doctest::Approx(exact).epsilon(1e-11));
}

}  // TEST_SUITE
