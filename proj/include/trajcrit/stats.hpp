#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace trajcrit::stats {

enum class ClampPolicy { Drop, Saturate };

// Bin i covers [edges[i], edges[i+1]).
struct HistogramSpec {
  std::vector<double> edges;
  ClampPolicy clamp = ClampPolicy::Drop;

  static HistogramSpec uniform(double lo, double hi, std::size_t bins, ClampPolicy clamp = ClampPolicy::Drop);
  std::size_t bins() const { return edges.empty() ? 0 : edges.size() - 1; }
  // Throws SpecError unless there are >= 2 strictly increasing finite edges.
  void validate() const;
  // Bin index, -1 for underflow, bins() for overflow; clamping not applied.
  long locate(double v) const;

  bool operator==(const HistogramSpec&) const = default;
};

struct Histogram {
  HistogramSpec spec;
  std::vector<long> counts;
  long underflow = 0;  // also receives NaN
  long overflow = 0;
  long total = 0;

  // Histograms over identical specs add up; throws SpecError otherwise.
  void merge(const Histogram& other);
};

Histogram histogram(std::span<const double> values, const HistogramSpec& spec);

struct Histogram2D {
  HistogramSpec x;
  HistogramSpec y;
  std::vector<long> counts;  // row major over x bins
  long outside = 0;
  long total = 0;

  long at(std::size_t ix, std::size_t iy) const { return counts[ix * y.bins() + iy]; }
  void merge(const Histogram2D& other);
};

// Pairs falling outside either axis (after clamping) are counted in `outside`.
Histogram2D histogram2d(std::span<const double> xs, std::span<const double> ys, const HistogramSpec& spec_x,
                        const HistogramSpec& spec_y);

// Product-moment correlation. Throws SpecError for n < 2, length mismatch or
// zero variance.
double pearson(std::span<const double> xs, std::span<const double> ys);

// Centered moving average with an odd window; windows shrink at the edges.
std::vector<double> smooth(std::span<const double> series, std::size_t window);

enum class Family { Logistic, Gev };

std::string to_string(Family f);

struct FitResult {
  Family family = Family::Logistic;
  // (location, scale) or (location, scale, shape).
  std::vector<double> params;
  double log_likelihood = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> start_params;
  double start_log_likelihood = 0.0;
  std::string diagnostics;
};

double logistic_log_likelihood(std::span<const double> values, double location, double scale);
// -inf when any value lies outside the support.
double gev_log_likelihood(std::span<const double> values, double location, double scale, double shape);

double logistic_pdf(double x, double location, double scale);
double gev_pdf(double x, double location, double scale, double shape);

// Maximum likelihood by Newton iteration from (median, sqrt(3) sd / pi); stops
// when the per-sample gradient norm drops below 1e-8 or after 500 iterations.
// Throws SpecError for n < 10 or constant data.
FitResult fit_logistic(std::span<const double> values);

// Maximum likelihood over (location, scale, shape) by Nelder-Mead with restarts,
// started from probability-weighted-moment estimates. Throws SpecError for
// n < 50 or constant data.
FitResult fit_gev(std::span<const double> values);

}  // namespace trajcrit::stats
