#pragma once

#include <cstddef>
#include <vector>

namespace fbcontrol {

/// Least-squares polynomial fit in one variable, used for conditional
/// expectation projections.  Features are standardized before the normal
/// equations are assembled; accumulation is serial so refits are bit-stable.
class PolynomialRegression {
 public:
  /// degree <= 8.  Throws InputError on a larger request.
  explicit PolynomialRegression(int degree);

  /// Fits E[target | x].  Falls back to the plain mean when the feature
  /// spread is negligible; throws RegressionRankDeficiency when a Cholesky
  /// pivot collapses on a genuinely spread feature.
  void fit(const std::vector<double>& x, const std::vector<double>& target);

  double evaluate(double x) const;

  bool constant_fallback() const { return constant_fallback_; }
  int degree() const { return degree_; }

 private:
  int degree_;
  bool fitted_ = false;
  bool constant_fallback_ = false;
  double mean_ = 0, scale_ = 1;
  std::vector<double> coef_;
};

}
