#include "prefnet/fit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <Eigen/Dense>
#include <boost/math/distributions/students_t.hpp>

#include "prefnet/model.hpp"

namespace prefnet {

double power_exp_tail(double x, double a, double b, double c) { return a * std::pow(x, -b) * std::exp(-c * x); }

namespace {

struct LogSolve {
  Eigen::VectorXd beta;
  double residual = 0.0;
};

LogSolve solve_log_space(const Eigen::MatrixXd& design, const Eigen::VectorXd& rhs) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-12);
  if (qr.rank() < design.cols()) throw ValidationError("decay fit: rank-deficient design matrix");
  LogSolve out;
  out.beta = qr.solve(rhs);
  out.residual = (design * out.beta - rhs).norm();
  return out;
}

}  // namespace

PowerExpTailFit fit_power_exp_tail(std::span<const CurvePoint> points, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != points.size())
    throw ValidationError("decay fit: weights and points differ in length");
  PowerExpTailFit fit;
  std::vector<std::size_t> used;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const bool ok = points[i].x > 0.0 && points[i].y > 0.0 && std::isfinite(points[i].y) &&
                    (weights.empty() || weights[i] > 0.0);
    if (ok)
      used.push_back(i);
    else
      ++fit.points_dropped;
  }
  fit.points_used = used.size();
  if (used.size() < 4) throw ValidationError("decay fit: fewer than 4 points with x > 0 and y > 0");

  const auto n = static_cast<Eigen::Index>(used.size());
  Eigen::MatrixXd design(n, 3);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index k = 0; k < n; ++k) {
    const auto& p = points[used[static_cast<std::size_t>(k)]];
    const double s = weights.empty() ? 1.0 : std::sqrt(weights[used[static_cast<std::size_t>(k)]]);
    design(k, 0) = s;
    design(k, 1) = -s * std::log(p.x);
    design(k, 2) = -s * p.x;
    rhs(k) = s * std::log(p.y);
  }
  auto sol = solve_log_space(design, rhs);
  if (sol.beta(2) < 0.0) {
    // Pure power law is the boundary of the model family.
    fit.cutoff_pinned = true;
    auto reduced = solve_log_space(design.leftCols(2), rhs);
    sol.beta = Eigen::Vector3d(reduced.beta(0), reduced.beta(1), 0.0);
    sol.residual = reduced.residual;
  }
  fit.amplitude = std::exp(sol.beta(0));
  fit.exponent = sol.beta(1);
  fit.cutoff = sol.beta(2);
  fit.residual_norm = sol.residual;
  fit.iterations = 1;
  fit.converged = true;
  return fit;
}

double bigaussian(double x, const BigaussianParams& p) {
  const double w = x < p.xc ? p.w1 : p.w2;
  const double z = (x - p.xc) / w;
  return p.y0 + p.height * std::exp(-0.5 * z * z);
}

BigaussianParams bigaussian_initial_guess(std::span<const CurvePoint> points) {
  BigaussianParams p;
  if (points.empty()) return p;
  auto [lo, hi] = std::minmax_element(points.begin(), points.end(),
                                      [](const CurvePoint& a, const CurvePoint& b) { return a.y < b.y; });
  p.y0 = lo->y;
  p.height = hi->y - lo->y;
  p.xc = hi->x;
  const double half = p.y0 + 0.5 * p.height;
  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
  double all_min = xmin, all_max = -xmin;
  for (const auto& q : points) {
    all_min = std::min(all_min, q.x);
    all_max = std::max(all_max, q.x);
    if (q.y >= half) {
      xmin = std::min(xmin, q.x);
      xmax = std::max(xmax, q.x);
    }
  }
  double w = 0.5 * (xmax - xmin);
  if (!(w > 0.0)) w = 0.25 * (all_max - all_min);
  if (!(w > 0.0)) w = 1.0;
  p.w1 = p.w2 = w;
  if (!(p.height > 0.0)) p.height = 1e-6;
  return p;
}

namespace {

using Vec5 = Eigen::Matrix<double, 5, 1>;

Vec5 pack(const BigaussianParams& p) { return Vec5(p.y0, p.xc, p.height, p.w1, p.w2); }
BigaussianParams unpack(const Vec5& v) { return {v(0), v(1), v(2), v(3), v(4)}; }

double sse(std::span<const CurvePoint> points, const BigaussianParams& p) {
  double s = 0.0;
  for (const auto& q : points) {
    const double r = q.y - bigaussian(q.x, p);
    s += r * r;
  }
  return s;
}

}  // namespace

BigaussianFit fit_bigaussian(std::span<const CurvePoint> points, const std::optional<BigaussianParams>& init,
                             int max_iterations) {
  if (points.size() < 6) throw ValidationError("bigaussian fit: fewer than 6 points");
  BigaussianFit fit;
  Vec5 theta = pack(init ? *init : bigaussian_initial_guess(points));
  double cost = sse(points, unpack(theta));
  double lambda = 1e-3;
  const auto n = static_cast<Eigen::Index>(points.size());
  Eigen::Matrix<double, Eigen::Dynamic, 5> jac(n, 5);
  Eigen::VectorXd resid(n);

  for (int iter = 0; iter < max_iterations; ++iter) {
    fit.iterations = iter + 1;
    const auto p = unpack(theta);
    for (Eigen::Index k = 0; k < n; ++k) {
      const auto& q = points[static_cast<std::size_t>(k)];
      const bool left = q.x < p.xc;
      const double w = left ? p.w1 : p.w2;
      const double z = (q.x - p.xc) / w;
      const double e = std::exp(-0.5 * z * z);
      resid(k) = q.y - (p.y0 + p.height * e);
      jac(k, 0) = 1.0;
      jac(k, 1) = p.height * e * z / w;
      jac(k, 2) = e;
      jac(k, 3) = left ? p.height * e * z * z / w : 0.0;
      jac(k, 4) = left ? 0.0 : p.height * e * z * z / w;
    }
    const Eigen::Matrix<double, 5, 5> jtj = jac.transpose() * jac;
    const Vec5 jtr = jac.transpose() * resid;
    if (jtr.norm() <= 1e-15 * (1.0 + std::sqrt(cost))) {
      fit.converged = true;
      break;
    }

    bool accepted = false;
    while (lambda < 1e20) {
      Eigen::Matrix<double, 5, 5> a = jtj;
      for (int d = 0; d < 5; ++d) a(d, d) += lambda * std::max(jtj(d, d), 1e-12);
      const Vec5 step = a.ldlt().solve(jtr);
      const Vec5 next = theta + step;
      if (next(2) > 0.0 && next(3) > 0.0 && next(4) > 0.0 && step.allFinite()) {
        const double next_cost = sse(points, unpack(next));
        if (next_cost <= cost) {
          const double rel_step = step.norm() / (theta.norm() + 1e-30);
          const double rel_gain = (cost - next_cost) / (cost + 1e-300);
          theta = next;
          cost = next_cost;
          lambda = std::max(lambda * 0.3, 1e-12);
          accepted = true;
          if (rel_step < 1e-10 || (rel_gain < 1e-10 && rel_step < 1e-6) || cost == 0.0) fit.converged = true;
          break;
        }
      }
      lambda *= 10.0;
    }
    // No downhill step exists at any damping: a local minimum to machine precision.
    if (!accepted) fit.converged = true;
    if (fit.converged) break;
  }
  fit.params = unpack(theta);
  fit.residual_norm = std::sqrt(cost);
  return fit;
}

Correlation pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw ValidationError("pearson: inputs differ in length");
  if (xs.size() < 3) throw ValidationError("pearson: need at least 3 pairs");
  Correlation out;
  out.n = xs.size();
  const double n = static_cast<double>(xs.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    mx += xs[i];
    my += ys[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (!(sxx > 0.0)) {
    out.reason = "zero variance in x";
    return out;
  }
  if (!(syy > 0.0)) {
    out.reason = "zero variance in y";
    return out;
  }
  const double r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
  out.r = r;
  const double df = n - 2.0;
  if (std::abs(r) >= 1.0) {
    out.p = 0.0;
  } else {
    const double t = r * std::sqrt(df / (1.0 - r * r));
    boost::math::students_t dist(df);
    out.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return out;
}

std::vector<std::optional<double>> stage_means(const std::map<int, double>& value_by_age,
                                               const std::vector<AgeStage>& stages) {
  std::vector<std::optional<double>> out;
  out.reserve(stages.size());
  for (const auto& s : stages) {
    double sum = 0.0;
    std::size_t count = 0;
    for (auto it = value_by_age.lower_bound(s.first_age); it != value_by_age.end() && it->first <= s.last_age;
         ++it) {
      sum += it->second;
      ++count;
    }
    out.push_back(count ? std::optional<double>(sum / static_cast<double>(count)) : std::nullopt);
  }
  return out;
}

std::optional<std::string> classify_age_mode(std::span<const std::optional<double>> means, double threshold) {
  std::string code;
  for (const auto& m : means)
    if (!m) return std::nullopt;
  for (std::size_t i = 1; i < means.size(); ++i) {
    const double before = *means[i - 1], after = *means[i];
    if (after > before * (1.0 + threshold))
      code += '/';
    else if (after < before * (1.0 - threshold))
      code += '\\';
    else
      code += '-';
  }
  return code;
}

std::optional<std::string> classify_age_mode(const std::map<int, double>& value_by_age,
                                             const AgeModeOptions& options) {
  const auto means = stage_means(value_by_age, options.stages);
  return classify_age_mode(means, options.threshold);
}

}  // namespace prefnet
