#pragma once

#include <array>
#include <optional>
#include <vector>

namespace lvqa {

// Least-squares quartic y ~ p(z), fitted on z = (x - x_mean) / x_std for
// conditioning. Coefficients are in the standardized basis, constant first.
struct Poly4Fit {
  std::array<double, 5> coeffs{};
  double x_mean = 0.0;
  double x_std = 1.0;

  double eval(double x) const {
    const double z = (x - x_mean) / x_std;
    double acc = 0.0;
    for (int i = 4; i >= 0; --i) acc = acc * z + coeffs[i];
    return acc;
  }
};

// Fractional (average) ranks, 1-based; ties share the mean of their ranks.
std::vector<double> fractional_ranks(const std::vector<double>& values);

// Spearman rank correlation: Pearson correlation of the fractional rank
// vectors. Throws kUndefinedCorrelation when either side has zero rank
// variance. Requires n >= 3.
double srcc(const std::vector<double>& pred, const std::vector<double>& gt);

// Pearson correlation of raw values. Throws kUndefinedCorrelation on zero
// variance. Requires n >= 3.
double plcc(const std::vector<double>& pred, const std::vector<double>& gt);

// Pearson correlation of (poly4(pred), gt); the quartic is fitted here.
// Requires n >= 5.
double plcc_fitted(const std::vector<double>& pred, const std::vector<double>& gt);

// sqrt(mean squared error). Requires equal lengths, n >= 1.
double rmse(const std::vector<double>& pred, const std::vector<double>& gt);

// Normal-equation quartic fit with ridge 1e-12 on the diagonal. Requires
// n >= 5 and nondegenerate x (std > 0).
Poly4Fit fit_poly4(const std::vector<double>& x, const std::vector<double>& y);

struct MetricsReport {
  size_t n = 0;
  double srcc = 0.0;
  double plcc_raw = 0.0;
  double rmse = 0.0;
  // Present when n >= 5; smaller sets cannot support the quartic fit.
  std::optional<double> plcc_fitted;
  std::optional<Poly4Fit> poly4;
};

// Computes every metric the evaluation protocol reports. Requires n >= 3.
MetricsReport compute_metrics(const std::vector<double>& pred, const std::vector<double>& gt);

}  // namespace lvqa
