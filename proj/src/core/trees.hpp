#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "core/dataset.hpp"

namespace attnsl {

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1, right = -1;
  double value = 0.0;  // (weighted) mean of fit targets reaching the node
  // Leaves: range into leaf_rows/leaf_values. In-bag rows with multiplicity
  // for forests, all rows for boosting.
  int rows_begin = 0, rows_end = 0;
};

struct RegressionTree {
  std::vector<TreeNode> nodes;   // nodes[0] is the root
  std::vector<int> leaf_rows;    // training row ids per leaf, concatenated
  std::vector<double> leaf_values;  // fit-time target per entry (y or residual)

  int route(const Matrix& X, int row) const {
    int node = 0;
    while (nodes[node].feature >= 0)
      node = X(row, nodes[node].feature) < nodes[node].threshold
                 ? nodes[node].left
                 : nodes[node].right;
    return node;
  }
};

struct TreeEnsemble {
  std::string kind;  // "forest" | "boosted"
  std::vector<RegressionTree> trees;
  double learning_rate = 1.0;  // boosted
  double init_value = 0.0;     // boosted
  std::uint64_t seed = 0;
  int p = 0;
  std::vector<std::string> feature_names;
  Vector feature_gain;  // split-gain importance accumulated during the fit

  int num_trees() const { return static_cast<int>(trees.size()); }
};

using LeafAssignment = Eigen::MatrixXi;  // rows = observations, cols = trees

struct GbtOptions {
  int num_rounds = 100;
  double learning_rate = 0.1;
  int max_leaves = 8;
  int min_node_size = 1;
  int patience = 20;           // early-stopping patience under fold CV
  const FoldPlan* folds = nullptr;
  const Vector* weights = nullptr;  // observation weights (attention fits)
  std::uint64_t seed = 0;
};

TreeEnsemble forest_fit(const Matrix& X, const Vector& y, int num_trees,
                        int mtry, int min_node_size, std::uint64_t seed,
                        int threads = 0);

TreeEnsemble gbt_fit(const Matrix& X, const Vector& y, const GbtOptions& opts);

Vector predict(const TreeEnsemble& ensemble, const Matrix& X);

LeafAssignment leaf_assignments(const TreeEnsemble& ensemble, const Matrix& X);

// Fraction of trees in which A_i and B_j land in the same leaf.
Matrix ensemble_similarity(const TreeEnsemble& ensemble, const Matrix& A,
                           const Matrix& B);
// Forest-only alias of ensemble_similarity.
Matrix proximity(const TreeEnsemble& forest, const Matrix& A, const Matrix& B);

double weighted_leaf_predict(const TreeEnsemble& ensemble,
                             const Eigen::RowVectorXd& x_star,
                             const Matrix& X_train, const Vector& y_train,
                             const Vector& attn);

int default_mtry(int p);

}  // namespace attnsl
