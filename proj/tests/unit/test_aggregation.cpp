#include <cmath>
#include <limits>

#include "doctest.h"
#include "scralloc/aggregation.hpp"
#include "scralloc/error.hpp"
#include "testkit.hpp"

using namespace scralloc;

namespace {

ErrorKind kind_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::IoError;
}

}  // namespace

TEST_CASE("two risks with correlation one half") {
  const std::vector<double> s = {3.0, 4.0};
  // 9 + 16 + 2 * 0.5 * 12 = 37
  CHECK(aggregate_level(s, {{1.0, 0.5}, {0.5, 1.0}}) == doctest::Approx(std::sqrt(37.0)).epsilon(1e-15));
  CHECK(aggregate_level(s, CorrelationMatrix::identity(2)) == 5.0);
  CHECK(aggregate_level(s, CorrelationMatrix::uniform(2, 1.0)) == 7.0);
  CHECK(aggregate_level(s, CorrelationMatrix::uniform(2, -1.0)) == 1.0);
}

TEST_CASE("correlated sums are R s") {
  const std::vector<double> s = {3.0, 4.0};
  const auto w = correlated_sums(s, {{1.0, 0.5}, {0.5, 1.0}});
  CHECK(w == std::vector<double>{5.0, 5.5});
}

TEST_CASE("nested tree") {
  RiskTree t;
  t.name = "nested";
  t.corr = CorrelationMatrix::identity(2);
  t.macros.push_back({"A", "", {{"a1", "", 3.0}, {"a2", "", 4.0}}, CorrelationMatrix::identity(2)});
  t.macros.push_back({"B", "", {{"b1", "", 5.0}}, CorrelationMatrix::identity(1)});
  const auto out = aggregate_tree(t);
  CHECK(out.macro_values() == std::vector<double>{5.0, 5.0});
  CHECK(out.total_scr == doctest::Approx(std::sqrt(50.0)).epsilon(1e-15));
}

TEST_CASE("degenerate inputs") {
  const std::vector<double> zeros = {0.0, 0.0, 0.0};
  CHECK(aggregate_level(zeros, CorrelationMatrix::uniform(3, 0.2)) == 0.0);
  const std::vector<double> one = {42.0};
  CHECK(aggregate_level(one, CorrelationMatrix::identity(1)) == 42.0);
  // Perfect negative dependence cancels exactly.
  const std::vector<double> pair = {2.0, 2.0};
  CHECK(aggregate_level(pair, CorrelationMatrix::uniform(2, -1.0)) == 0.0);
}

TEST_CASE("invalid inputs raise typed errors") {
  const std::vector<double> s = {3.0, 4.0};
  CHECK(kind_of([&] { aggregate_level(s, CorrelationMatrix::identity(3)); }) == ErrorKind::DimensionMismatch);
  const std::vector<double> neg = {3.0, -4.0};
  CHECK(kind_of([&] { aggregate_level(neg, CorrelationMatrix::identity(2)); }) == ErrorKind::InvalidInput);
  const std::vector<double> nan = {3.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK(kind_of([&] { aggregate_level(nan, CorrelationMatrix::identity(2)); }) == ErrorKind::InvalidInput);
  const std::vector<double> three = {3.0, 4.0, 5.0};
  CHECK(kind_of([&] { aggregate_level(three, CorrelationMatrix::uniform(3, -0.9)); }) ==
        ErrorKind::NegativeRadicand);
}

TEST_CASE("tiny negative radicands from rounding clamp to zero") {
  // Exactly cancelling pair, perturbed at the level of rounding noise.
  const double eps = std::numeric_limits<double>::epsilon();
  const std::vector<double> s = {1.0, 1.0 + eps};
  CHECK(aggregate_level(s, CorrelationMatrix::uniform(2, -1.0)) <= 4 * eps);
}

TEST_CASE("random trees match the long double reference") {
  testkit::Rng rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    const RiskTree t = testkit::random_tree(rng);
    const auto out = aggregate_tree(t);
    const auto ref_macro = testkit::reference_macro_scrs(t);
    for (std::size_t i = 0; i < ref_macro.size(); ++i)
      CHECK(out.macro_scrs[i].scr == doctest::Approx(static_cast<double>(ref_macro[i])).epsilon(1e-12));
    CHECK(out.total_scr == doctest::Approx(static_cast<double>(testkit::reference_total(t))).epsilon(1e-12));
  }
}

TEST_CASE("large levels use compensated sums") {
  std::vector<double> s(500);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = 1.0 + static_cast<double>(i % 7) * 1e-3;
  const auto corr = CorrelationMatrix::uniform(s.size(), 0.1);
  std::vector<long double> ls(s.begin(), s.end());
  const double ref = static_cast<double>(std::sqrt(testkit::quad_form(ls, corr)));
  CHECK(aggregate_level(s, corr) == doctest::Approx(ref).epsilon(1e-14));
}

TEST_CASE("implied normal sigma") {
  CHECK(kQuantile995 == doctest::Approx(2.5758293035489004).epsilon(1e-16));
  CHECK(implied_sigma(100.0) == doctest::Approx(38.822448).epsilon(1e-7));
}
