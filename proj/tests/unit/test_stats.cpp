#include <algorithm>
#include <cmath>
#include <random>

#include "doctest.h"
#include "trajcrit/error.hpp"
#include "trajcrit/stats.hpp"

using namespace trajcrit;
using namespace trajcrit::stats;

namespace {

std::vector<double> logistic_sample(double mu, double s, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  std::vector<double> out(n);
  for (auto& x : out) {
    const double p = u(rng);
    x = mu + s * std::log(p / (1 - p));
  }
  return out;
}

std::vector<double> gev_sample(double mu, double sigma, double xi, int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1e-12, 1.0 - 1e-12);
  std::vector<double> out(n);
  for (auto& x : out) {
    const double e = -std::log(u(rng));
    x = xi == 0.0 ? mu - sigma * std::log(e) : mu + sigma * (std::pow(e, -xi) - 1) / xi;
  }
  return out;
}

}  // namespace

TEST_CASE("histogram examples") {
  const std::vector<double> v{1, 1, 2};
  const auto h = histogram(v, {{0, 1.5, 3}});
  CHECK(h.counts == std::vector<long>{2, 1});
  CHECK(h.total == 3);

  const auto e = histogram(std::vector<double>{}, HistogramSpec::uniform(0, 1, 4));
  CHECK(e.counts == std::vector<long>(4, 0));

  const std::vector<double> w{-1, 0.5, 3, NAN};
  const auto drop = histogram(w, {{0, 1, 2}});
  CHECK(drop.counts == std::vector<long>{1, 0});
  CHECK(drop.underflow == 2);
  CHECK(drop.overflow == 1);
  const auto sat = histogram(w, {{0, 1, 2}, ClampPolicy::Saturate});
  CHECK(sat.counts == std::vector<long>{2, 1});

  CHECK_THROWS_AS((HistogramSpec{{1, 1}}.validate()), SpecError);
  CHECK_THROWS_AS((HistogramSpec{{0}}.validate()), SpecError);
  CHECK((HistogramSpec{{0, 1, 2}}.locate(1.0)) == 1);
  CHECK((HistogramSpec{{0, 1, 2}}.locate(2.0)) == 2);

  auto m = h;
  m.merge(h);
  CHECK(m.counts == std::vector<long>{4, 2});
  CHECK_THROWS_AS(m.merge(e), SpecError);
}

TEST_CASE("uniform sample stays within 5 sigma per bin") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 10);
  std::vector<double> v(100000);
  for (auto& x : v) x = u(rng);
  const auto h = histogram(v, HistogramSpec::uniform(0, 10, 50));
  const double p = 1.0 / 50, n = 100000;
  const double sigma = std::sqrt(n * p * (1 - p));
  for (long c : h.counts) CHECK(std::abs(c - n * p) < 5 * sigma);
}

TEST_CASE("2-D histogram marginals equal the 1-D histograms") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> xs, ys;
  for (int i = 0; i < 5000; ++i) {
    const bool a = i % 2;
    xs.push_back((a ? 2 : -2) + 0.3 * n(rng));
    ys.push_back((a ? -1 : 1) + 0.3 * n(rng));
  }
  const auto sx = HistogramSpec::uniform(-4.25, 4.25, 17, ClampPolicy::Saturate);
  const auto sy = HistogramSpec::uniform(-3.25, 3.25, 13, ClampPolicy::Saturate);
  const auto h2 = histogram2d(xs, ys, sx, sy);
  const auto hx = histogram(xs, sx);
  const auto hy = histogram(ys, sy);
  for (std::size_t i = 0; i < sx.bins(); ++i) {
    long s = 0;
    for (std::size_t j = 0; j < sy.bins(); ++j) s += h2.at(i, j);
    CHECK(s == hx.counts[i]);
  }
  for (std::size_t j = 0; j < sy.bins(); ++j) {
    long s = 0;
    for (std::size_t i = 0; i < sx.bins(); ++i) s += h2.at(i, j);
    CHECK(s == hy.counts[j]);
  }
  // The two largest cells sit on the cluster centers.
  std::vector<long> sorted = h2.counts;
  std::sort(sorted.rbegin(), sorted.rend());
  const auto cell = [&](double x, double y) { return h2.at(sx.locate(x), sy.locate(y)); };
  CHECK(std::min(cell(2, -1), cell(-2, 1)) == sorted[1]);
  CHECK(std::max(cell(2, -1), cell(-2, 1)) == sorted[0]);
  CHECK(cell(2, 1) == 0);

  const auto one = histogram2d(std::vector<double>{0.1}, std::vector<double>{0.1}, sx, sy);
  long nonzero = 0;
  for (long c : one.counts) nonzero += c != 0;
  CHECK(nonzero == 1);
}

TEST_CASE("pearson") {
  const std::vector<double> x{1, 2, 3, 4, 5};
  CHECK(pearson(x, std::vector<double>{2, 4, 6, 8, 10}) == doctest::Approx(1.0));
  CHECK(pearson(x, std::vector<double>{-1, -2, -3, -4, -5}) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(x, std::vector<double>{1, 1, 1, 1, 1}), SpecError);
  CHECK_THROWS_AS(pearson(std::vector<double>{1}, std::vector<double>{1}), SpecError);

  std::mt19937_64 rng(9);
  std::normal_distribution<double> n(0, 1);
  std::vector<double> a, b;
  for (int i = 0; i < 500; ++i) {
    a.push_back(n(rng));
    b.push_back(-0.8 * a.back() + 0.6 * n(rng));
  }
  double ma = 0, mb = 0;
  for (int i = 0; i < 500; ++i) ma += a[i] / 500, mb += b[i] / 500;
  double sab = 0, saa = 0, sbb = 0;
  for (int i = 0; i < 500; ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  CHECK(pearson(a, b) == doctest::Approx(sab / std::sqrt(saa * sbb)).epsilon(1e-9));
}

TEST_CASE("moving average") {
  const std::vector<double> c(9, 3.0);
  CHECK(smooth(c, 3) == c);
  std::vector<double> imp(11, 0.0);
  imp[5] = 5.0;
  const auto s = smooth(imp, 5);
  for (int i = 3; i <= 7; ++i) CHECK(s[i] == doctest::Approx(1.0));
  CHECK(s[2] == 0.0);
  std::vector<double> ramp(20);
  for (int i = 0; i < 20; ++i) ramp[i] = 0.5 * i;
  const auto r = smooth(ramp, 7);
  for (int i = 3; i < 17; ++i) CHECK(r[i] == doctest::Approx(ramp[i]));
}

TEST_CASE("logistic fit") {
  const auto v = logistic_sample(0.122, 0.147, 20000, 1);
  const auto f = fit_logistic(v);
  CHECK(f.converged);
  CHECK(std::abs(f.params[0] - 0.122) < 0.01);
  CHECK(std::abs(f.params[1] - 0.147) < 0.01);
  CHECK(f.log_likelihood >= f.start_log_likelihood);
  CHECK(f.log_likelihood == doctest::Approx(logistic_log_likelihood(v, f.params[0], f.params[1])));

  std::vector<double> sym;
  for (int i = -50; i <= 50; ++i) sym.push_back(std::tanh(i / 20.0));
  CHECK(fit_logistic(sym).params[0] == doctest::Approx(0.0).epsilon(1e-6));
  CHECK_THROWS_AS(fit_logistic(std::vector<double>(100, 1.0)), SpecError);
  CHECK_THROWS_AS(fit_logistic(std::vector<double>{1, 2, 3}), SpecError);
}

TEST_CASE("pdfs integrate to one") {
  double a = 0, b = 0;
  for (double x = -20; x < 60; x += 0.001) {
    a += logistic_pdf(x, 0.1, 0.5) * 0.001;
    b += gev_pdf(x, 1.1, 0.7, 0.1) * 0.001;
  }
  CHECK(a == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(b == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(gev_pdf(-1.0, 1.1, 0.7, 0.5) == 0.0);
  CHECK(std::isinf(gev_log_likelihood(std::vector<double>{-1.0}, 1.1, 0.7, 0.5)));
}

TEST_CASE("GEV fit") {
  const auto v = gev_sample(1.1, 0.7, 0.5, 20000, 2);
  const auto f = fit_gev(v);
  CHECK(f.params[0] == doctest::Approx(1.1).epsilon(0.05));
  CHECK(f.params[1] == doctest::Approx(0.7).epsilon(0.05));
  CHECK(f.params[2] == doctest::Approx(0.5).epsilon(0.05));
  CHECK(f.log_likelihood >= f.start_log_likelihood);

  const auto g = fit_gev(gev_sample(0.0, 1.0, 0.0, 20000, 4));
  CHECK(std::abs(g.params[2]) < 0.05);
  CHECK_THROWS_AS(fit_gev(std::vector<double>(20, 1.0)), SpecError);
  CHECK_THROWS_AS(fit_gev(std::vector<double>(100, 1.0)), SpecError);
}
