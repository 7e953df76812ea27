#pragma once

#include <optional>
#include <string>
#include <vector>

#include "core/attention.hpp"
#include "core/dataset.hpp"
#include "core/linear.hpp"
#include "core/trees.hpp"

namespace attnsl {

enum class BaseLearner { Lasso, Gbt, Forest };
enum class MixingMode { Global, Adaptive };

struct MixingParameter {
  double value = 0.0;
  MixingMode mode = MixingMode::Global;
  Vector per_point_values;  // adaptive mode only, one m per test row
};

std::vector<double> default_m_grid();

struct PipelineConfig {
  BaseLearner base_learner = BaseLearner::Lasso;
  int num_trees = 500;  // proximity forest
  int mtry = 0;         // 0 -> max(1, p/3)
  int min_node_size = 5;
  double temperature = 1.0;
  std::vector<double> m_grid = default_m_grid();
  int cv_folds = 10;
  std::uint64_t seed = 0;
  bool adaptive = false;
  bool approximate = false;
  std::optional<double> fixed_m;  // skips mixing CV entirely
  int threads = 0;

  // gbt base learner structure; per-point fits reuse the baseline's
  // selected round count.
  int gbt_rounds = 100;
  double gbt_learning_rate = 0.1;
  int gbt_max_leaves = 8;
  int gbt_min_node_size = 1;
  bool gbt_cv_rounds = false;

  // Column wiring. Empty means all features. The proximity forest sees
  // similarity_features; the regression model sees regression_features
  // (time-series runs feed lags to the forest only).
  std::vector<std::string> similarity_features;
  std::vector<std::string> regression_features;
};

struct PipelineResult {
  Vector y_base;
  Vector y_attn;
  Vector y_blend;
  MixingParameter mixing;
  double lambda_hat = std::numeric_limits<double>::quiet_NaN();
  // Lasso mode: test rows by (intercept, coefficients...), blended per point.
  Matrix blended_coefficients;
  std::vector<std::string> coefficient_names;
  AttentionMatrix attention;
  // Gbt mode without approximation: per-test-point split-gain totals.
  Matrix point_importances;
  // The fitted baseline, kept for serialization (exactly one is filled).
  LinearModel base_model;
  TreeEnsemble base_ensemble;
};

PipelineResult fit_predict_attention_lasso(const Dataset& train,
                                           const Matrix& X_test,
                                           const PipelineConfig& config);

PipelineResult fit_predict_attention_sl(const Dataset& train,
                                        const Matrix& X_test,
                                        const PipelineConfig& config);

// Alg: fit the ensemble once, reweight its leaves per test point.
PipelineResult approximate_attention_predict(const Dataset& train,
                                             const Matrix& X_test,
                                             const PipelineConfig& config);

// Stores per-fold base/attention predictions once and scans m_grid over
// them. Adaptive mode weighs the stored errors by each test point's
// attention row and needs that row, hence the optional matrix.
MixingParameter select_mixing_cv(const Dataset& train,
                                 const PipelineConfig& config,
                                 const AttentionMatrix* test_attention = nullptr);

// Residual correction for a stale ensemble: attention over recent data,
// weighted residual added to the model's predictions.
Vector drift_correct(const TreeEnsemble& model, const Matrix& X2,
                     const Vector& y2, const Matrix& X3, double temperature);

void write_predictions_csv(const std::string& path, const PipelineResult& r,
                           const std::vector<std::string>& row_ids);
void write_coefficients_csv(const std::string& path, const PipelineResult& r,
                            const std::vector<std::string>& row_ids);

}  // namespace attnsl
