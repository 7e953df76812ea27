#pragma once

#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/linear.hpp"
#include "core/trees.hpp"

namespace attnsl {

// Row-stochastic attention weights, one row per test point.
struct AttentionMatrix {
  Matrix weights;
  double temperature = 1.0;
};

// Nonnegative per-feature relevance, |ridge coefficients| on the
// standardized scale.
struct DiagonalAttention {
  Vector diag;
};

AttentionMatrix softmax_rows(const Matrix& scores, double temperature);

DiagonalAttention diagonal_from_ridge(const LinearModel& ridge,
                                      const StandardizationParams& params);

// Scores against already-standardized inputs: score_j = sum_p x*_p d_p x_jp.
Eigen::RowVectorXd ridge_diag_scores(const Eigen::RowVectorXd& x_star,
                                     const Matrix& X_train,
                                     const DiagonalAttention& diag);

// Normalized Gaussian kernel weights around x_star.
Eigen::RowVectorXd gaussian_kernel_weights(const Eigen::RowVectorXd& x_star,
                                           const Matrix& X_train, double sigma);

AttentionMatrix attention_from_forest(const TreeEnsemble& forest,
                                      const Matrix& X_test,
                                      const Matrix& X_train,
                                      double temperature);

// Long format: test_row_id, train_row_id, weight.
void write_attention_csv(const std::string& path, const AttentionMatrix& attn,
                         const std::vector<std::string>& test_ids,
                         const std::vector<std::string>& train_ids);

}  // namespace attnsl
