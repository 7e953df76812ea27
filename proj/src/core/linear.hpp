#pragma once

#include <atomic>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "core/dataset.hpp"

namespace attnsl {

struct LinearModel {
  std::string kind;  // "ridge" | "lasso"
  double lambda = 0.0;
  double intercept = 0.0;
  Vector coefficients;  // original feature scale
  std::vector<std::string> feature_names;
  bool converged = true;
  // Every feature column had zero weighted variance (e.g. all weight on a
  // single row); the fit degenerates to the weighted mean.
  bool degenerate = false;
};

struct LambdaPath {
  Vector values;  // strictly decreasing, head = lambda_max
};

struct LassoCvResult {
  LinearModel model;
  double lambda_hat = 0.0;
  LambdaPath path;
  Vector cv_mse;  // mean over folds, aligned with path
};

// Validates and rescales observation weights to sum to n.
Vector normalize_weights(const Vector& w);

LinearModel ridge_fit(const Matrix& X, const Vector& y, double lambda);

// CV over the shared log-spaced grid; ties toward larger lambda.
double ridge_cv_lambda(const Matrix& X, const Vector& y, const FoldPlan& folds);

double lambda_max(const Matrix& X, const Vector& y, const Vector& w);

LambdaPath make_lambda_path(double lmax, int n, int p, int count = 100);

LinearModel weighted_lasso_fit(const Matrix& X, const Vector& y,
                               const Vector& w, double lambda,
                               const Vector* warm_start = nullptr);

// Same fit, recording the objective value before the first sweep and after
// every sweep (property check: non-increasing).
LinearModel weighted_lasso_fit_traced(const Matrix& X, const Vector& y,
                                      const Vector& w, double lambda,
                                      std::vector<double>& objective_trace);

LassoCvResult lasso_cv(const Matrix& X, const Vector& y, const FoldPlan& folds,
                       const std::optional<LambdaPath>& path = std::nullopt);

Vector predict(const LinearModel& model, const Matrix& X);

// Count of weighted lasso fits since the last reset; instrumentation for the
// no-refit property of mixing selection.
std::uint64_t weighted_fit_count();
void reset_weighted_fit_count();

}  // namespace attnsl
