#include "trajcrit/stats.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "trajcrit/error.hpp"

namespace trajcrit::stats {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

HistogramSpec HistogramSpec::uniform(double lo, double hi, std::size_t bins, ClampPolicy clamp) {
  if (!(lo < hi)) throw SpecError("histogram range requires lo < hi");
  if (bins == 0) throw SpecError("histogram needs at least one bin");
  HistogramSpec s;
  s.clamp = clamp;
  s.edges.resize(bins + 1);
  const double width = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) s.edges[i] = lo + width * static_cast<double>(i);
  s.edges.back() = hi;
  return s;
}

void HistogramSpec::validate() const {
  if (edges.size() < 2) throw SpecError("histogram needs at least two edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (std::isnan(edges[i])) throw SpecError("histogram edge is NaN");
    if (i > 0 && !(edges[i - 1] < edges[i])) throw SpecError("histogram edges must be strictly increasing");
  }
}

long HistogramSpec::locate(double v) const {
  if (std::isnan(v) || v < edges.front()) return -1;
  if (v >= edges.back()) return static_cast<long>(bins());
  const auto it = std::upper_bound(edges.begin(), edges.end(), v);
  return static_cast<long>(it - edges.begin()) - 1;
}

void Histogram::merge(const Histogram& other) {
  if (!(spec == other.spec)) throw SpecError("cannot merge histograms with different specs");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  underflow += other.underflow;
  overflow += other.overflow;
  total += other.total;
}

namespace {

// Returns the bin after clamping, or -1 / bins() when dropped.
long place(const HistogramSpec& spec, double v) {
  long b = spec.locate(v);
  const long n = static_cast<long>(spec.bins());
  if (spec.clamp == ClampPolicy::Saturate && !std::isnan(v)) b = std::clamp(b, 0L, n - 1);
  return b;
}

}  // namespace

Histogram histogram(std::span<const double> values, const HistogramSpec& spec) {
  spec.validate();
  Histogram h;
  h.spec = spec;
  h.counts.assign(spec.bins(), 0);
  const long n = static_cast<long>(spec.bins());
  for (double v : values) {
    const long b = place(spec, v);
    if (b < 0) {
      ++h.underflow;
    } else if (b >= n) {
      ++h.overflow;
    } else {
      ++h.counts[static_cast<std::size_t>(b)];
    }
  }
  h.total = static_cast<long>(values.size());
  return h;
}

void Histogram2D::merge(const Histogram2D& other) {
  if (!(x == other.x) || !(y == other.y)) throw SpecError("cannot merge 2-D histograms with different specs");
  for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
  outside += other.outside;
  total += other.total;
}

Histogram2D histogram2d(std::span<const double> xs, std::span<const double> ys, const HistogramSpec& spec_x,
                        const HistogramSpec& spec_y) {
  if (xs.size() != ys.size()) throw SpecError("histogram2d needs equally long inputs");
  spec_x.validate();
  spec_y.validate();
  Histogram2D h;
  h.x = spec_x;
  h.y = spec_y;
  const long nx = static_cast<long>(spec_x.bins());
  const long ny = static_cast<long>(spec_y.bins());
  h.counts.assign(static_cast<std::size_t>(nx * ny), 0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const long bx = place(spec_x, xs[i]);
    const long by = place(spec_y, ys[i]);
    if (bx < 0 || bx >= nx || by < 0 || by >= ny) {
      ++h.outside;
      continue;
    }
    ++h.counts[static_cast<std::size_t>(bx * ny + by)];
  }
  h.total = static_cast<long>(xs.size());
  return h;
}

double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw SpecError("pearson needs equally long inputs");
  if (xs.size() < 2) throw SpecError("pearson needs at least two pairs");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx;
    const double dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) throw SpecError("correlation undefined for zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::vector<double> smooth(std::span<const double> series, std::size_t window) {
  if (window == 0 || window % 2 == 0) throw SpecError("smoothing window must be odd");
  if (window > series.size()) throw SpecError("smoothing window longer than series");
  const std::size_t half = window / 2;
  std::vector<double> out(series.size());
  for (std::size_t i = 0; i < series.size(); ++i) {
    const std::size_t lo = i >= half ? i - half : 0;
    const std::size_t hi = std::min(series.size() - 1, i + half);
    double sum = 0.0;
    for (std::size_t j = lo; j <= hi; ++j) sum += series[j];
    out[i] = sum / static_cast<double>(hi - lo + 1);
  }
  return out;
}

std::string to_string(Family f) { return f == Family::Logistic ? "logistic" : "gev"; }

double logistic_log_likelihood(std::span<const double> values, double location, double scale) {
  if (!(scale > 0.0)) return kNegInf;
  double ll = 0.0;
  const double log_scale = std::log(scale);
  for (double x : values) {
    const double z = (x - location) / scale;
    // log f = -z - log s - 2 log(1 + e^-z), written symmetric for large |z|.
    const double az = std::abs(z);
    ll += -az - log_scale - 2.0 * std::log1p(std::exp(-az));
  }
  return ll;
}

double logistic_pdf(double x, double location, double scale) {
  const double z = std::abs((x - location) / scale);
  const double e = std::exp(-z);
  return e / (scale * (1.0 + e) * (1.0 + e));
}

namespace {

constexpr double kGumbelShape = 1e-7;

double gev_point_log_density(double x, double location, double scale, double log_scale, double shape) {
  const double z = (x - location) / scale;
  if (std::abs(shape) < kGumbelShape) return -log_scale - z - std::exp(-z);
  const double u = shape * z;
  if (!(u > -1.0)) return kNegInf;
  const double lt = std::log1p(u);
  return -log_scale - (1.0 + 1.0 / shape) * lt - std::exp(-lt / shape);
}

}  // namespace

double gev_log_likelihood(std::span<const double> values, double location, double scale, double shape) {
  if (!(scale > 0.0)) return kNegInf;
  const double log_scale = std::log(scale);
  double ll = 0.0;
  for (double x : values) {
    const double p = gev_point_log_density(x, location, scale, log_scale, shape);
    if (p == kNegInf) return kNegInf;
    ll += p;
  }
  return ll;
}

double gev_pdf(double x, double location, double scale, double shape) {
  const double lp = gev_point_log_density(x, location, scale, std::log(scale), shape);
  return lp == kNegInf ? 0.0 : std::exp(lp);
}

namespace {

void require_spread(std::span<const double> values, std::size_t min_n, const char* who) {
  if (values.size() < min_n) {
    throw SpecError(std::string(who) + " needs at least " + std::to_string(min_n) + " samples");
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw SpecError(std::string(who) + ": non-finite sample");
  }
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  if (*lo == *hi) throw SpecError(std::string(who) + ": constant data has zero scale");
}

double median_of(std::vector<double> v) {
  const std::size_t n = v.size();
  std::nth_element(v.begin(), v.begin() + static_cast<long>(n / 2), v.end());
  const double upper = v[n / 2];
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), v.begin() + static_cast<long>(n / 2));
  return 0.5 * (lower + upper);
}

}  // namespace

FitResult fit_logistic(std::span<const double> values) {
  require_spread(values, 10, "fit_logistic");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double x : values) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / (n - 1.0));

  double mu = median_of(std::vector<double>(values.begin(), values.end()));
  double sigma = std::sqrt(3.0) * sd / std::numbers::pi;

  FitResult r;
  r.family = Family::Logistic;
  r.start_params = {mu, sigma};
  r.start_log_likelihood = logistic_log_likelihood(values, mu, sigma);
  double ll = r.start_log_likelihood;

  constexpr int kMaxIter = 500;
  constexpr double kGradTol = 1e-8;
  int iter = 0;
  double grad_norm = std::numeric_limits<double>::infinity();
  for (; iter < kMaxIter; ++iter) {
    // Per-sample gradient and Hessian in (mu, sigma).
    double g_mu = 0.0, g_s = 0.0, h_mm = 0.0, h_ms = 0.0, h_ss = 0.0;
    for (double x : values) {
      const double z = (x - mu) / sigma;
      const double t = std::tanh(0.5 * z);
      const double w = 1.0 - t * t;
      g_mu += t;
      g_s += z * t - 1.0;
      h_mm += -0.5 * w;
      h_ms += -(0.5 * z * w + t);
      h_ss += 1.0 - 2.0 * z * t - 0.5 * z * z * w;
    }
    g_mu /= n * sigma;
    g_s /= n * sigma;
    const double s2 = n * sigma * sigma;
    h_mm /= s2;
    h_ms /= s2;
    h_ss /= s2;
    grad_norm = std::hypot(g_mu, g_s);
    if (grad_norm < kGradTol) break;

    double d_mu = g_mu;
    double d_s = g_s;
    const double det = h_mm * h_ss - h_ms * h_ms;
    if (h_mm < 0.0 && det > 0.0) {
      d_mu = -(h_ss * g_mu - h_ms * g_s) / det;
      d_s = -(-h_ms * g_mu + h_mm * g_s) / det;
    }
    double step = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, step *= 0.5) {
      const double m2 = mu + step * d_mu;
      const double s2n = sigma + step * d_s;
      if (!(s2n > 0.0)) continue;
      const double ll2 = logistic_log_likelihood(values, m2, s2n);
      // Near the optimum the gain drops below the rounding noise of the sum.
      if (ll2 >= ll - 64.0 * std::numeric_limits<double>::epsilon() * std::abs(ll)) {
        mu = m2;
        sigma = s2n;
        ll = ll2;
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  r.params = {mu, sigma};
  r.log_likelihood = ll;
  r.iterations = iter;
  r.converged = grad_norm < kGradTol;
  r.diagnostics = "gradient norm " + std::to_string(grad_norm);
  return r;
}

namespace {

// Probability-weighted-moment estimates (Hosking, Wallis and Wood).
std::array<double, 3> gev_pwm_start(std::span<const double> values) {
  std::vector<double> x(values.begin(), values.end());
  std::sort(x.begin(), x.end());
  const double n = static_cast<double>(x.size());
  double b0 = 0.0, b1 = 0.0, b2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double j = static_cast<double>(i);
    b0 += x[i];
    b1 += j / (n - 1.0) * x[i];
    b2 += j * (j - 1.0) / ((n - 1.0) * (n - 2.0)) * x[i];
  }
  b0 /= n;
  b1 /= n;
  b2 /= n;
  const double l1 = b0;
  const double l2 = 2.0 * b1 - b0;
  const double l3 = 6.0 * b2 - 6.0 * b1 + b0;
  const double t3 = l3 / l2;
  const double c = 2.0 / (3.0 + t3) - std::log(2.0) / std::log(3.0);
  double k = 7.8590 * c + 2.9554 * c * c;
  k = std::clamp(k, -0.95, 5.0);
  double scale, loc;
  if (std::abs(k) < 1e-6) {
    scale = l2 / std::log(2.0);
    loc = l1 - std::numbers::egamma * scale;
  } else {
    const double g = std::tgamma(1.0 + k);
    scale = l2 * k / ((1.0 - std::pow(2.0, -k)) * g);
    loc = l1 - scale * (1.0 - g) / k;
  }
  return {loc, scale, -k};
}

struct Simplex {
  std::array<std::array<double, 3>, 4> pts;
  std::array<double, 4> f;
};

template <typename Objective>
int nelder_mead(Objective&& obj, std::array<double, 3>& best, double& best_f, const std::array<double, 3>& step,
                int max_iter, bool& converged) {
  Simplex s;
  s.pts[0] = best;
  s.f[0] = best_f;
  for (int i = 0; i < 3; ++i) {
    s.pts[i + 1] = best;
    s.pts[i + 1][i] += step[i];
    s.f[i + 1] = obj(s.pts[i + 1]);
  }
  int iter = 0;
  converged = false;
  std::array<int, 4> order{0, 1, 2, 3};
  for (; iter < max_iter; ++iter) {
    std::sort(order.begin(), order.end(), [&](int a, int b) { return s.f[a] < s.f[b]; });
    const int lo = order[0], hi = order[3], second = order[2];
    double diam = 0.0;
    for (int i = 1; i < 4; ++i) {
      for (int d = 0; d < 3; ++d) diam = std::max(diam, std::abs(s.pts[order[i]][d] - s.pts[lo][d]));
    }
    if (std::isfinite(s.f[hi]) && s.f[hi] - s.f[lo] <= 1e-13 * (1.0 + std::abs(s.f[lo])) && diam < 1e-9) {
      converged = true;
      break;
    }
    std::array<double, 3> centroid{0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      for (int d = 0; d < 3; ++d) centroid[d] += s.pts[order[i]][d] / 3.0;
    }
    auto along = [&](double t) {
      std::array<double, 3> p;
      for (int d = 0; d < 3; ++d) p[d] = centroid[d] + t * (s.pts[hi][d] - centroid[d]);
      return p;
    };
    const auto xr = along(-1.0);
    const double fr = obj(xr);
    if (fr < s.f[lo]) {
      const auto xe = along(-2.0);
      const double fe = obj(xe);
      if (fe < fr) {
        s.pts[hi] = xe;
        s.f[hi] = fe;
      } else {
        s.pts[hi] = xr;
        s.f[hi] = fr;
      }
      continue;
    }
    if (fr < s.f[second]) {
      s.pts[hi] = xr;
      s.f[hi] = fr;
      continue;
    }
    const bool outside = fr < s.f[hi];
    const auto xc = along(outside ? -0.5 : 0.5);
    const double fc = obj(xc);
    if (fc < (outside ? fr : s.f[hi])) {
      s.pts[hi] = xc;
      s.f[hi] = fc;
      continue;
    }
    for (int i = 1; i < 4; ++i) {
      const int idx = order[i];
      for (int d = 0; d < 3; ++d) s.pts[idx][d] = s.pts[lo][d] + 0.5 * (s.pts[idx][d] - s.pts[lo][d]);
      s.f[idx] = obj(s.pts[idx]);
    }
  }
  int b = 0;
  for (int i = 1; i < 4; ++i) {
    if (s.f[i] < s.f[b]) b = i;
  }
  if (s.f[b] <= best_f) {
    best = s.pts[b];
    best_f = s.f[b];
  }
  return iter;
}

}  // namespace

FitResult fit_gev(std::span<const double> values) {
  require_spread(values, 50, "fit_gev");
  const double n = static_cast<double>(values.size());
  auto start = gev_pwm_start(values);
  // Pull the shape towards zero until every sample lies inside the support.
  for (int i = 0; i < 80 && gev_log_likelihood(values, start[0], start[1], start[2]) == kNegInf; ++i) {
    start[2] *= 0.5;
    if (std::abs(start[2]) < 1e-12) start[2] = 0.0;
  }

  FitResult r;
  r.family = Family::Gev;
  r.start_params = {start[0], start[1], start[2]};
  r.start_log_likelihood = gev_log_likelihood(values, start[0], start[1], start[2]);

  // Minimize the negative mean log-likelihood over (location, log scale, shape);
  // leaving the support is an infinite barrier.
  auto objective = [&](const std::array<double, 3>& p) {
    const double ll = gev_log_likelihood(values, p[0], std::exp(p[1]), p[2]);
    return ll == kNegInf ? std::numeric_limits<double>::infinity() : -ll / n;
  };
  std::array<double, 3> best{start[0], std::log(start[1]), start[2]};
  double best_f = objective(best);
  if (!std::isfinite(best_f)) throw SpecError("fit_gev: no feasible starting point");

  constexpr int kMaxIterPerRun = 4000;
  constexpr int kRestarts = 6;
  int total_iter = 0;
  bool converged = false;
  std::array<double, 3> step{0.1 * start[1], 0.1, 0.1};
  for (int run = 0; run < kRestarts; ++run) {
    const double before = best_f;
    bool run_converged = false;
    total_iter += nelder_mead(objective, best, best_f, step, kMaxIterPerRun, run_converged);
    const double scale = std::exp(best[1]);
    step = {0.02 * scale, 0.02, 0.02};
    if (run_converged && run > 0 && before - best_f <= 1e-12 * (1.0 + std::abs(best_f))) {
      converged = true;
      break;
    }
  }
  r.params = {best[0], std::exp(best[1]), best[2]};
  r.log_likelihood = gev_log_likelihood(values, r.params[0], r.params[1], r.params[2]);
  r.iterations = total_iter;
  r.converged = converged;
  r.diagnostics = converged ? "simplex converged" : "simplex iteration cap reached";
  return r;
}

}  // namespace trajcrit::stats
