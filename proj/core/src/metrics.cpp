#include "lvqa/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "lvqa/error.hpp"

namespace lvqa {
namespace {

void require_equal_length(const std::vector<double>& a, const std::vector<double>& b,
                          size_t min_n) {
  if (a.size() != b.size()) {
    throw Error(ErrorCode::kShapeMismatch,
                "length mismatch: " + std::to_string(a.size()) + " vs " + std::to_string(b.size()));
  }
  if (a.size() < min_n) {
    throw Error(ErrorCode::kShapeMismatch,
                "need at least " + std::to_string(min_n) + " samples, got " +
                    std::to_string(a.size()));
  }
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const size_t n = a.size();
  double ma = 0.0, mb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) {
    throw Error(ErrorCode::kUndefinedCorrelation, "correlation undefined: zero variance");
  }
  return sab / std::sqrt(saa * sbb);
}

// Gaussian elimination with partial pivoting; a is n x n row-major, in place.
std::vector<double> solve_linear(std::vector<double> a, std::vector<double> rhs, size_t n) {
  for (size_t col = 0; col < n; ++col) {
    size_t pivot = col;
    for (size_t r = col + 1; r < n; ++r) {
      if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
    }
    if (std::abs(a[pivot * n + col]) < 1e-300) {
      throw Error(ErrorCode::kFitFailure, "degenerate least-squares system");
    }
    if (pivot != col) {
      for (size_t c = 0; c < n; ++c) std::swap(a[col * n + c], a[pivot * n + c]);
      std::swap(rhs[col], rhs[pivot]);
    }
    const double inv = 1.0 / a[col * n + col];
    for (size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] * inv;
      if (f == 0.0) continue;
      for (size_t c = col; c < n; ++c) a[r * n + c] -= f * a[col * n + c];
      rhs[r] -= f * rhs[col];
    }
  }
  std::vector<double> x(n);
  for (size_t ri = n; ri-- > 0;) {
    double acc = rhs[ri];
    for (size_t c = ri + 1; c < n; ++c) acc -= a[ri * n + c] * x[c];
    x[ri] = acc / a[ri * n + ri];
  }
  return x;
}

}  // namespace

std::vector<double> fractional_ranks(const std::vector<double>& values) {
  const size_t n = values.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t i, size_t j) { return values[i] < values[j]; });

  std::vector<double> ranks(n);
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the average of ranks i+1..j+1
    const double avg = (static_cast<double>(i) + j) / 2.0 + 1.0;
    for (size_t p = i; p <= j; ++p) ranks[order[p]] = avg;
    i = j + 1;
  }
  return ranks;
}

double srcc(const std::vector<double>& pred, const std::vector<double>& gt) {
  require_equal_length(pred, gt, 3);
  return pearson(fractional_ranks(pred), fractional_ranks(gt));
}

double plcc(const std::vector<double>& pred, const std::vector<double>& gt) {
  require_equal_length(pred, gt, 3);
  return pearson(pred, gt);
}

double plcc_fitted(const std::vector<double>& pred, const std::vector<double>& gt) {
  require_equal_length(pred, gt, 5);
  const Poly4Fit fit = fit_poly4(pred, gt);
  std::vector<double> mapped(pred.size());
  for (size_t i = 0; i < pred.size(); ++i) mapped[i] = fit.eval(pred[i]);
  return pearson(mapped, gt);
}

double rmse(const std::vector<double>& pred, const std::vector<double>& gt) {
  require_equal_length(pred, gt, 1);
  double acc = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - gt[i];
    acc += d * d;
  }
  return std::sqrt(acc / pred.size());
}

Poly4Fit fit_poly4(const std::vector<double>& x, const std::vector<double>& y) {
  require_equal_length(x, y, 5);
  const size_t n = x.size();

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= n;
  if (var <= 0.0) throw Error(ErrorCode::kFitFailure, "poly4 fit requires nondegenerate x");

  Poly4Fit fit;
  fit.x_mean = mean;
  fit.x_std = std::sqrt(var);

  // Normal equations over powers of the standardized variable.
  std::array<double, 9> power_sums{};  // sum z^0 .. z^8
  std::array<double, 5> moment_rhs{};  // sum z^i * y
  for (size_t s = 0; s < n; ++s) {
    const double z = (x[s] - fit.x_mean) / fit.x_std;
    double zp = 1.0;
    for (int p = 0; p <= 8; ++p) {
      power_sums[p] += zp;
      if (p <= 4) moment_rhs[p] += zp * y[s];
      zp *= z;
    }
  }
  std::vector<double> a(25);
  std::vector<double> rhs(moment_rhs.begin(), moment_rhs.end());
  for (int r = 0; r < 5; ++r) {
    for (int c = 0; c < 5; ++c) a[r * 5 + c] = power_sums[r + c];
    a[r * 5 + r] += 1e-12;  // ridge
  }
  const std::vector<double> sol = solve_linear(std::move(a), std::move(rhs), 5);
  std::copy(sol.begin(), sol.end(), fit.coeffs.begin());
  return fit;
}

MetricsReport compute_metrics(const std::vector<double>& pred, const std::vector<double>& gt) {
  require_equal_length(pred, gt, 3);
  MetricsReport report;
  report.n = pred.size();
  report.srcc = srcc(pred, gt);
  report.plcc_raw = plcc(pred, gt);
  report.rmse = rmse(pred, gt);
  if (pred.size() >= 5) {
    report.poly4 = fit_poly4(pred, gt);
    std::vector<double> mapped(pred.size());
    for (size_t i = 0; i < pred.size(); ++i) mapped[i] = report.poly4->eval(pred[i]);
    report.plcc_fitted = pearson(mapped, gt);
  }
  return report;
}

}  // namespace lvqa
