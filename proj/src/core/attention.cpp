#include "core/attention.hpp"

#include <cmath>
#include <fstream>

#include "core/errors.hpp"

namespace attnsl {

AttentionMatrix softmax_rows(const Matrix& scores, double temperature) {
  if (!(temperature > 0.0)) throw UsageError("temperature must be positive");
  if (scores.cols() < 1) throw DataError("empty score rows");
  if (!scores.allFinite()) throw NumericError("non-finite attention score");
  AttentionMatrix out;
  out.temperature = temperature;
  out.weights.resize(scores.rows(), scores.cols());
  for (int i = 0; i < scores.rows(); ++i) {
    double mx = scores.row(i).maxCoeff();
    Eigen::RowVectorXd e =
        ((scores.row(i).array() - mx) / temperature).exp().matrix();
    out.weights.row(i) = e / e.sum();
  }
  return out;
}

DiagonalAttention diagonal_from_ridge(const LinearModel& ridge,
                                      const StandardizationParams& params) {
  if (ridge.coefficients.size() != params.sds.size())
    throw DataError("coefficient count does not match standardization");
  DiagonalAttention d;
  d.diag = (ridge.coefficients.array() * params.sds.array()).abs().matrix();
  return d;
}

Eigen::RowVectorXd ridge_diag_scores(const Eigen::RowVectorXd& x_star,
                                     const Matrix& X_train,
                                     const DiagonalAttention& diag) {
  if (x_star.size() != X_train.cols() || diag.diag.size() != X_train.cols())
    throw DataError("feature count mismatch in attention scoring");
  return (x_star.array() * diag.diag.transpose().array()).matrix() *
         X_train.transpose();
}

Eigen::RowVectorXd gaussian_kernel_weights(const Eigen::RowVectorXd& x_star,
                                           const Matrix& X_train,
                                           double sigma) {
  if (!(sigma > 0.0)) throw UsageError("sigma must be positive");
  if (x_star.size() != X_train.cols())
    throw DataError("feature count mismatch in kernel weighting");
  const int n = static_cast<int>(X_train.rows());
  Eigen::RowVectorXd log_k(n);
  for (int j = 0; j < n; ++j) {
    double d2 = (X_train.row(j) - x_star).squaredNorm();
    log_k(j) = -d2 / (2.0 * sigma * sigma);
  }
  // Same max-subtraction as the softmax so tiny sigmas stay finite.
  Eigen::RowVectorXd e = (log_k.array() - log_k.maxCoeff()).exp().matrix();
  return e / e.sum();
}

AttentionMatrix attention_from_forest(const TreeEnsemble& forest,
                                      const Matrix& X_test,
                                      const Matrix& X_train,
                                      double temperature) {
  return softmax_rows(proximity(forest, X_test, X_train), temperature);
}

void write_attention_csv(const std::string& path, const AttentionMatrix& attn,
                         const std::vector<std::string>& test_ids,
                         const std::vector<std::string>& train_ids) {
  if (static_cast<int>(test_ids.size()) != attn.weights.rows() ||
      static_cast<int>(train_ids.size()) != attn.weights.cols())
    throw DataError("row id counts do not match attention matrix");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "test_row_id,train_row_id,weight\n";
  for (int i = 0; i < attn.weights.rows(); ++i)
    for (int j = 0; j < attn.weights.cols(); ++j)
      out << test_ids[i] << ',' << train_ids[j] << ','
          << format_double(attn.weights(i, j)) << '\n';
}

}  // namespace attnsl
