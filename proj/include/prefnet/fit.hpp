#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace prefnet {

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
};

/// y = a * x^-b * exp(-c x)
struct PowerExpTailFit {
  double amplitude = 0.0;  // a
  double exponent = 0.0;   // b
  double cutoff = 0.0;     // c
  /// Residual norm in log space, over the points used.
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  std::size_t points_used = 0;
  /// Points with x <= 0 or y <= 0.
  std::size_t points_dropped = 0;
  /// True when the free solution had c < 0 and c was pinned at 0.
  bool cutoff_pinned = false;
};

double power_exp_tail(double x, double a, double b, double c);

/// Linear least squares on log y = log a - b log x - c x. Optional weights
/// (one per point) scale the squared residuals. Throws ValidationError for
/// fewer than 4 usable points or a rank-deficient design.
PowerExpTailFit fit_power_exp_tail(std::span<const CurvePoint> points, std::span<const double> weights = {});

struct BigaussianParams {
  double y0 = 0.0;
  double xc = 0.0;
  double height = 0.0;  // H
  double w1 = 1.0;
  double w2 = 1.0;
};

/// y0 + H exp(-0.5 ((x - xc) / w)^2) with w = w1 left of xc and w2 from xc on.
double bigaussian(double x, const BigaussianParams& p);

struct BigaussianFit {
  BigaussianParams params;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
};

/// y0 = min y, H = max y - min y, xc = argmax, w1 = w2 = half the x-span of
/// points at or above half maximum.
BigaussianParams bigaussian_initial_guess(std::span<const CurvePoint> points);

/// Levenberg-Marquardt from `init` (or the data-driven guess). Stops when the
/// relative step or relative improvement drops below 1e-10; hitting the
/// iteration cap returns converged = false. Throws ValidationError for fewer
/// than 6 points.
BigaussianFit fit_bigaussian(std::span<const CurvePoint> points,
                             const std::optional<BigaussianParams>& init = std::nullopt,
                             int max_iterations = 500);

struct Correlation {
  std::optional<double> r;
  std::optional<double> p;
  std::size_t n = 0;
  /// Why r is absent.
  std::string reason;
};

/// Sample Pearson r with a two-sided p-value from Student's t with n - 2
/// degrees of freedom. Throws ValidationError for unequal lengths or n < 3.
Correlation pearson(std::span<const double> xs, std::span<const double> ys);

struct AgeStage {
  int first_age = 0;
  int last_age = 0;
};

struct AgeModeOptions {
  std::vector<AgeStage> stages{{12, 18}, {19, 25}, {26, 40}};
  double threshold = 0.10;
};

/// Mean of the per-age values falling inside each stage; absent for a stage
/// with no ages present.
std::vector<std::optional<double>> stage_means(const std::map<int, double>& value_by_age,
                                               const std::vector<AgeStage>& stages);

/// One symbol per adjacent stage pair: "/" when the later mean exceeds the
/// earlier by more than the threshold, "\" when it falls short by more, "-"
/// otherwise. Absent when any stage mean is absent.
std::optional<std::string> classify_age_mode(std::span<const std::optional<double>> means,
                                             double threshold = 0.10);

std::optional<std::string> classify_age_mode(const std::map<int, double>& value_by_age,
                                             const AgeModeOptions& options = {});

}  // namespace prefnet
