#include <cmath>
#include <random>

#include "cwlaser/error.hpp"
#include "cwlaser/values.hpp"
#include "doctest.h"

using namespace cwl;

namespace {

ErrorKind kind_of(const auto& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no cwl::Error thrown");
  return ErrorKind::ValidationError;
}

long double factorial(int n) {
  long double f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// Direct sum over b of multinomial((j+k)/2; b, (j-b)/2, (k-b)/2) q^b.
double merging_oracle(int j, int k, int q, double tau) {
  long double s = 0;
  for (int b = j % 2; b <= std::min(j, k); b += 2) {
    if ((k - b) % 2) continue;
    const int n = (j + k) / 2;
    s += factorial(n) / (factorial(b) * factorial((j - b) / 2) * factorial((k - b) / 2)) *
         std::pow(static_cast<long double>(q), b);
  }
  return tau * static_cast<double>(std::log2(s));
}

SplitDistribution sym_split(double a) { return SplitDistribution{2, 2, {{0, a}, {1, 1 - 2 * a}, {2, a}}}; }

double golden_max(const std::function<double(double)>& f, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double a = lo, b = hi, x1 = b - g * (b - a), x2 = a + g * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > 1e-12) {
    if (f1 < f2) {
      a = x1, x1 = x2, f1 = f2, x2 = a + g * (b - a), f2 = f(x2);
    } else {
      b = x2, x2 = x1, f2 = f1, x1 = b - g * (b - a), f1 = f(x1);
    }
  }
  return std::max(f1, f2);
}

}  // namespace

TEST_CASE("level-1 values") {
  const double tau = 0.79;
  CHECK(level1_value({0, 1, 1, 1}, 6, tau) == doctest::Approx(tau * std::log2(6.0)));
  CHECK(level1_value({0, 0, 2, 1}, 6, tau) == 0.0);
  CHECK(level1_value({1, 1, 0, 1}, 5, tau) == doctest::Approx(tau * std::log2(5.0)));
  CHECK(level1_value({2, 0, 0, 1}, 5, tau) == 0.0);
  CHECK(kind_of([&] { level1_value({0, 2, 2, 2}, 5, tau); }) == ErrorKind::WrongLevel);
}

TEST_CASE("merging values match direct enumeration") {
  for (int q : {2, 5, 6})
    for (double tau : {0.7, 0.79, 1.0}) {
      CHECK(merging_value(2, 2, q, tau, 2) == doctest::Approx(tau * std::log2(q * q + 2.0)).epsilon(1e-12));
      CHECK(merging_value(1, 3, q, tau, 2) == doctest::Approx(tau * std::log2(2.0 * q)).epsilon(1e-12));
      CHECK(merging_value(0, 4, q, tau, 2) == 0.0);
      for (int level : {2, 3, 4})
        for (int j = 0; j <= (1 << level); ++j) {
          const int k = (1 << level) - j;
          CHECK(merging_value(j, k, q, tau, level) ==
                doctest::Approx(merging_oracle(j, k, q, tau)).epsilon(1e-12));
          CHECK(merging_value(j, k, q, tau, level) == merging_value(k, j, q, tau, level));
          const double v = merging_value(Component{0, j, k, level}, q, tau);
          CHECK(merging_value(Component{j, 0, k, level}, q, tau) == doctest::Approx(v).epsilon(1e-14));
          CHECK(merging_value(Component{j, k, 0, level}, q, tau) == doctest::Approx(v).epsilon(1e-14));
          CHECK(merging_value(Component{k, j, 0, level}, q, tau) == doctest::Approx(v).epsilon(1e-14));
        }
    }
  CHECK(kind_of([] { merging_value(1, 2, 6, 0.8, 2); }) == ErrorKind::InvalidComponent);
  CHECK(kind_of([] { merging_value(Component{1, 1, 2, 2}, 6, 0.8); }) == ErrorKind::InvalidComponent);
}

TEST_CASE("restricted merging values") {
  const int q = 6;
  const double tau = 0.79;
  const Component c{0, 2, 2, 2};
  const double b = 1.0 / (2.0 + q * q);
  CHECK(restricted_merging_value(c, sym_split(b), q, tau).log2_value ==
        doctest::Approx(tau * std::log2(q * q + 2.0)).epsilon(1e-12));
  CHECK(restricted_merging_value(c, SplitDistribution::point(2, 2, 1), q, tau).log2_value ==
        doctest::Approx(2 * tau * std::log2(6.0)).epsilon(1e-12));
  for (double a : {0.01, 0.1, 0.3, 0.5}) {
    const double expect = tau * (2 * (1 - 2 * a) * std::log2(6.0) - 2 * a * std::log2(a) -
                                 (a < 0.5 ? (1 - 2 * a) * std::log2(1 - 2 * a) : 0.0));
    CHECK(restricted_merging_value(c, sym_split(a), q, tau).log2_value ==
          doctest::Approx(expect).epsilon(1e-12));
  }
  CHECK(kind_of([&] { restricted_merging_value({0, 0, 4, 2}, SplitDistribution::trivial(2, 4), q, tau); }) ==
        ErrorKind::MultipleZeros);
  CHECK(kind_of([&] { restricted_merging_value({0, 1, 3, 2}, SplitDistribution::point(2, 3, 0), q, tau); }) ==
        ErrorKind::InfeasibleSplit);
  // k = 0: no restriction.
  const Component c0{2, 2, 0, 2};
  CHECK(restricted_merging_value(c0, SplitDistribution::trivial(2, 0), q, tau).log2_value ==
        doctest::Approx(merging_value(c0, q, tau)));
}

TEST_CASE("optimizing the restriction recovers the merging value") {
  for (int q : {2, 5, 6})
    for (double tau : {0.7, 0.7913, 1.0}) {
      const Component c{0, 2, 2, 2};
      const double best = golden_max(
          [&](double a) { return restricted_merging_value(c, sym_split(a), q, tau).log2_value; }, 0.0, 0.5);
      CHECK(best == doctest::Approx(merging_value(c, q, tau)).epsilon(1e-9));
      for (int level : {2, 3})
        for (const auto& cc : all_components(level)) {
          if (cc.zero_count() != 1 || cc.k == 0) continue;
          CHECK(merging_value_pair(cc, q, tau).log2_value ==
                doctest::Approx(merging_value(cc, q, tau)).epsilon(1e-9));
        }
    }
}

TEST_CASE("level-2 (1,1,2) value") {
  const int q = 6;
  for (double tau : {0.7, 0.7917, 1.0}) {
    const double bs = level2_112_optimal_b(q, tau);
    CHECK(bs == doctest::Approx(1.0 / (2.0 + std::pow(6.0, 3 * tau))));
    const double closed = 2.0 / 3.0 + tau * std::log2(6.0) + std::log2(std::pow(6.0, 3 * tau) + 2.0) / 3.0;
    CHECK(level2_112_value(q, tau, bs).log2_value == doctest::Approx(closed).epsilon(1e-12));
    const double h = 1e-7;
    const double deriv =
        (level2_112_value(q, tau, bs + h).log2_value - level2_112_value(q, tau, bs - h).log2_value) / (2 * h);
    CHECK(std::abs(deriv) < 1e-6);
    CHECK(level2_112_value(q, tau, 0.0).log2_value ==
          doctest::Approx(2.0 / 3.0 + 2 * tau * std::log2(6.0)).epsilon(1e-14));
  }
  const auto t = level2_112_value(6, 0.7916, 0.00021015);
  CHECK(std::isfinite(t.log2_value));
  CHECK(t.kind == ValueKind::Sym3);
  CHECK(kind_of([] { level2_112_value(6, 0.8, 0.6); }) == ErrorKind::OutOfRange);
  CHECK(kind_of([] { level2_112_value(6, 0.8, -0.01); }) == ErrorKind::OutOfRange);
}

TEST_CASE("symmetric hashing reproduces the (1,1,2) derivation") {
  const int q = 6;
  for (double tau : {0.7, 0.7917, 1.0}) {
    const LowerValueFn lower = [&](const Component& c) { return level1_value(c, q, tau); };
    for (double b : {0.0005, level2_112_optimal_b(q, tau), 0.05, 0.2}) {
      const double a = (1 - 2 * b) / 2;
      JointDistribution left{1, {{{0, 1, 1, 1}, a}, {{1, 0, 1, 1}, a}, {{1, 1, 0, 1}, b}, {{0, 0, 2, 1}, b}}};
      const auto v = symhash_value_pair({1, 1, 2, 2}, left, lower, tau);
      CHECK(v.log2_value == doctest::Approx(level2_112_value(q, tau, b).log2_value).epsilon(1e-12));
      CHECK(v.z_split(0) == doctest::Approx(b));
      CHECK(v.z_split(1) == doctest::Approx(1 - 2 * b));
    }
  }
}

TEST_CASE("symmetric hashing with trivial factors") {
  JointDistribution left{1, {{{1, 1, 0, 1}, 1.0}}};
  const auto v = symhash_value_pair({2, 2, 0, 2}, left, [](const Component&) { return 0.0; }, 0.8);
  CHECK(v.log2_value == 0.0);
  ValueTable empty;
  CHECK(kind_of([&] { symhash_value_pair({2, 2, 0, 2}, left, empty, 0.8); }) == ErrorKind::MissingLowerValue);
}

TEST_CASE("symmetric hashing against a direct long-double evaluation") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int t = 0; t < 50; ++t) {
    // Level-3 component with all indices positive.
    Component c{1 + int(rng() % 5), 0, 0, 3};
    c.j = 1 + int(rng() % (7 - c.i));
    c.k = 8 - c.i - c.j;
    std::map<Component, double> lv;
    for (const auto& x : all_components(2)) lv[x] = 3 * u(rng);
    JointDistribution left{2, {}};
    long double s = 0;
    for (const auto& x : all_components(2)) {
      Component r{c.i - x.i, c.j - x.j, c.k - x.k, 2};
      if (!r.valid() || u(rng) < 0.3) continue;
      s += left.mass[x] = u(rng) + 0.01;
    }
    if (left.mass.empty()) continue;
    for (auto& [x, m] : left.mass) m = static_cast<double>(m / s);
    const double tot = left.total();
    for (auto& [x, m] : left.mass) m /= tot;

    std::array<std::array<long double, 5>, 3> marg{};
    long double body = 0;
    for (const auto& [x, m] : left.mass) {
      for (int ax = 0; ax < 3; ++ax) marg[ax][x.at(ax)] += m;
      body += m * ((long double)lv[x] + lv[Component{c.i - x.i, c.j - x.j, c.k - x.k, 2}]);
    }
    long double h = 0;
    for (const auto& mx : marg)
      for (long double p : mx)
        if (p > 0) h -= p * std::log2(p);
    const double expect = static_cast<double>(h / 3 + body);
    const auto v = symhash_value_pair(c, left, [&](const Component& x) { return lv.at(x); }, 0.8);
    CHECK(v.log2_value == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("values are monotone in tau") {
  const int q = 5;
  double prev_m = -1, prev_r = -1, prev_112 = -1, prev_1 = -1;
  for (double tau = 2.0 / 3; tau <= 1.0; tau += 0.01) {
    const double m = merging_value(Component{0, 3, 5, 3}, q, tau);
    const double r = merging_value_pair(Component{0, 3, 5, 3}, q, tau).log2_value;
    const double v112 = level2_112_value(q, tau, level2_112_optimal_b(q, tau)).log2_value;
    const double v1 = level1_value({1, 0, 1, 1}, q, tau);
    CHECK(m >= prev_m);
    CHECK(r >= prev_r);
    CHECK(v112 >= prev_112);
    CHECK(v1 >= prev_1);
    prev_m = m, prev_r = r, prev_112 = v112, prev_1 = v1;
  }
}

TEST_CASE("value table") {
  ValueTable t;
  ValuePair a{{0, 2, 2, 2}, 0.8, 3.0, sym_split(0.1), ValueKind::Nonrot};
  ValuePair b{{0, 2, 2, 2}, 0.8, 3.5, sym_split(0.2), ValueKind::Nonrot};
  t.add(a);
  t.add(b);
  CHECK(t.size() == 2);
  CHECK(t.best({0, 2, 2, 2})->log2_value == 3.5);
  CHECK(t.find({0, 2, 2, 2}, split_digest(sym_split(0.1)))->log2_value == 3.0);
  CHECK(t.best({1, 1, 2, 2}) == nullptr);
  CHECK(kind_of([&] { t.log2_value({1, 1, 2, 2}); }) == ErrorKind::MissingLowerValue);
  CHECK(right_part({1, 1, 2, 2}, {0, 1, 1, 1}) == Component{1, 0, 1, 1});
  CHECK(kind_of([] { right_part({1, 1, 2, 2}, {2, 0, 0, 1}); }) == ErrorKind::InfeasibleSplit);
}
