#include "fbcontrol/regression.hpp"

#include <cmath>
#include <string>

#include "fbcontrol/errors.hpp"

namespace fbcontrol {

PolynomialRegression::PolynomialRegression(int degree) : degree_(degree) {
  if (degree < 0 || degree > 8)
    throw InputError("regression: degree must lie in [0, 8]");
}

void PolynomialRegression::fit(const std::vector<double>& x, const std::vector<double>& target) {
  if (x.size() != target.size() || x.empty())
    throw InputError("regression: feature and target sizes disagree or are empty");
  const std::size_t n = x.size();

  // Serial accumulation throughout: refits are bit-identical regardless of
  // the caller's thread budget.
  double mean = 0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(n);
  double var = 0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  mean_ = mean;
  scale_ = std::sqrt(var);

  double target_mean = 0;
  for (double v : target) target_mean += v;
  target_mean /= static_cast<double>(n);

  if (degree_ == 0 || scale_ < 1e-12 * (1.0 + std::fabs(mean_))) {
    // No usable spread: project onto the constant.
    constant_fallback_ = degree_ != 0;
    scale_ = 1.0;
    coef_.assign(1, target_mean);
    fitted_ = true;
    return;
  }
  constant_fallback_ = false;

  const int m = degree_ + 1;
  std::vector<double> moments(static_cast<std::size_t>(2 * degree_ + 1), 0.0);
  std::vector<double> rhs(static_cast<std::size_t>(m), 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double s = (x[k] - mean_) / scale_;
    double pw = 1.0;
    for (int i = 0; i <= 2 * degree_; ++i) {
      moments[static_cast<std::size_t>(i)] += pw;
      if (i < m) rhs[static_cast<std::size_t>(i)] += pw * target[k];
      pw *= s;
    }
  }

  // Normal equations over standardized monomials, solved by Cholesky.
  std::vector<double> a(static_cast<std::size_t>(m * m));
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      a[static_cast<std::size_t>(i * m + j)] = moments[static_cast<std::size_t>(i + j)];

  std::vector<double> l(static_cast<std::size_t>(m * m), 0.0);
  const double pivot_floor = 1e-12 * a[0];  // a[0] = n
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j <= i; ++j) {
      double sum = a[static_cast<std::size_t>(i * m + j)];
      for (int k = 0; k < j; ++k)
        sum -= l[static_cast<std::size_t>(i * m + k)] * l[static_cast<std::size_t>(j * m + k)];
      if (i == j) {
        if (sum < pivot_floor)
          throw RegressionRankDeficiency("regression: Cholesky pivot collapsed at order " +
                                         std::to_string(i));
        l[static_cast<std::size_t>(i * m + i)] = std::sqrt(sum);
      } else {
        l[static_cast<std::size_t>(i * m + j)] = sum / l[static_cast<std::size_t>(j * m + j)];
      }
    }
  }

  // Forward then back substitution.
  std::vector<double> y(static_cast<std::size_t>(m));
  for (int i = 0; i < m; ++i) {
    double sum = rhs[static_cast<std::size_t>(i)];
    for (int k = 0; k < i; ++k) sum -= l[static_cast<std::size_t>(i * m + k)] * y[static_cast<std::size_t>(k)];
    y[static_cast<std::size_t>(i)] = sum / l[static_cast<std::size_t>(i * m + i)];
  }
  coef_.assign(static_cast<std::size_t>(m), 0.0);
  for (int i = m - 1; i >= 0; --i) {
    double sum = y[static_cast<std::size_t>(i)];
    for (int k = i + 1; k < m; ++k)
      sum -= l[static_cast<std::size_t>(k * m + i)] * coef_[static_cast<std::size_t>(k)];
    coef_[static_cast<std::size_t>(i)] = sum / l[static_cast<std::size_t>(i * m + i)];
  }
  fitted_ = true;
}

double PolynomialRegression::evaluate(double x) const {
  if (!fitted_) throw InputError("regression: evaluate before fit");
  const double s = (x - mean_) / scale_;
  double acc = 0.0;
  for (std::size_t i = coef_.size(); i-- > 0;) acc = acc * s + coef_[i];
  return acc;
}

}
