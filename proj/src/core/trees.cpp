#include "core/trees.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace attnsl {

int default_mtry(int p) { return std::max(1, p / 3); }

namespace {

struct SampleEntry {
  double x, w, wy;
};

struct BestSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Greedy variance-reduction split over the given candidate features
// (ascending order so equal gains resolve to the lowest feature index, and
// within a feature to the lowest threshold). Gain is the decrease in weighted
// SSE; tiny gains below FP noise of the prefix sums are rejected.
BestSplit find_best_split(const Matrix& X, const double* targets,
                          const double* weights, const std::vector<int>& idx,
                          int lo, int hi, const std::vector<int>& features,
                          std::vector<SampleEntry>& scratch) {
  const int m = hi - lo;
  double tot_w = 0.0, tot_wy = 0.0, tot_wyy = 0.0;
  for (int k = lo; k < hi; ++k) {
    int row = idx[k];
    double w = weights ? weights[row] : 1.0;
    double y = targets[row];
    tot_w += w;
    tot_wy += w * y;
    tot_wyy += w * y * y;
  }
  BestSplit best;
  if (tot_w <= 0.0) return best;
  const double parent_score = tot_wy * tot_wy / tot_w;
  const double gain_floor = 1e-12 * std::max(tot_wyy, 1e-300);

  scratch.resize(m);
  for (int feature : features) {
    for (int k = 0; k < m; ++k) {
      int row = idx[lo + k];
      double w = weights ? weights[row] : 1.0;
      scratch[k] = {X(row, feature), w, w * targets[row]};
    }
    std::sort(scratch.begin(), scratch.end(),
              [](const SampleEntry& a, const SampleEntry& b) { return a.x < b.x; });
    double cw = 0.0, cwy = 0.0;
    for (int k = 0; k + 1 < m; ++k) {
      cw += scratch[k].w;
      cwy += scratch[k].wy;
      if (scratch[k].x == scratch[k + 1].x) continue;
      double rw = tot_w - cw;
      if (cw <= 0.0 || rw <= 0.0) continue;
      double gain = cwy * cwy / cw + (tot_wy - cwy) * (tot_wy - cwy) / rw -
                    parent_score;
      if (gain > gain_floor && gain > best.gain) {
        best.feature = feature;
        best.threshold = 0.5 * (scratch[k].x + scratch[k + 1].x);
        best.gain = gain;
      }
    }
  }
  return best;
}

double node_value(const double* targets, const double* weights,
                  const std::vector<int>& idx, int lo, int hi) {
  double tw = 0.0, twy = 0.0, ty = 0.0;
  for (int k = lo; k < hi; ++k) {
    int row = idx[k];
    double w = weights ? weights[row] : 1.0;
    tw += w;
    twy += w * targets[row];
    ty += targets[row];
  }
  // All-zero weight in a node: fall back to the plain mean.
  return tw > 0.0 ? twy / tw : ty / (hi - lo);
}

void finalize_leaves(RegressionTree& tree, const double* targets,
                     const std::vector<int>& idx,
                     const std::vector<std::pair<int, int>>& ranges) {
  for (std::size_t node = 0; node < tree.nodes.size(); ++node) {
    if (tree.nodes[node].feature >= 0) continue;
    auto [lo, hi] = ranges[node];
    tree.nodes[node].rows_begin = static_cast<int>(tree.leaf_rows.size());
    for (int k = lo; k < hi; ++k) {
      tree.leaf_rows.push_back(idx[k]);
      tree.leaf_values.push_back(targets[idx[k]]);
    }
    tree.nodes[node].rows_end = static_cast<int>(tree.leaf_rows.size());
  }
}

// Depth-first growth for forests: mtry candidate features resampled per node,
// nodes processed left-before-right so the RNG stream is schedule-free.
RegressionTree grow_depth_first(const Matrix& X, const double* targets,
                                std::vector<int> idx, int mtry,
                                int min_node_size, Rng& rng,
                                Vector* gain_accum) {
  const int p = static_cast<int>(X.cols());
  RegressionTree tree;
  std::vector<std::pair<int, int>> ranges;
  std::vector<SampleEntry> scratch;
  struct Item {
    int node, lo, hi;
  };
  tree.nodes.emplace_back();
  ranges.push_back({0, static_cast<int>(idx.size())});
  std::vector<Item> stack{{0, 0, static_cast<int>(idx.size())}};
  while (!stack.empty()) {
    Item it = stack.back();
    stack.pop_back();
    tree.nodes[it.node].value = node_value(targets, nullptr, idx, it.lo, it.hi);
    if (it.hi - it.lo <= min_node_size || it.hi - it.lo < 2) continue;
    std::vector<int> features = rng.sample_without_replacement(p, mtry);
    std::sort(features.begin(), features.end());
    BestSplit best = find_best_split(X, targets, nullptr, idx, it.lo, it.hi,
                                     features, scratch);
    if (best.feature < 0) continue;
    auto mid_it = std::stable_partition(
        idx.begin() + it.lo, idx.begin() + it.hi, [&](int row) {
          return X(row, best.feature) < best.threshold;
        });
    int mid = static_cast<int>(mid_it - idx.begin());
    if (mid == it.lo || mid == it.hi) continue;  // degenerate, keep as leaf
    if (gain_accum) (*gain_accum)(best.feature) += best.gain;
    int left = static_cast<int>(tree.nodes.size());
    tree.nodes[it.node].feature = best.feature;
    tree.nodes[it.node].threshold = best.threshold;
    tree.nodes[it.node].left = left;
    tree.nodes[it.node].right = left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    ranges.push_back({it.lo, mid});
    ranges.push_back({mid, it.hi});
    stack.push_back({left + 1, mid, it.hi});
    stack.push_back({left, it.lo, mid});
  }
  finalize_leaves(tree, targets, idx, ranges);
  return tree;
}

// Best-first growth for boosting: expand the pending leaf with the largest
// gain until max_leaves is reached (ties to the earliest-created node).
RegressionTree grow_best_first(const Matrix& X, const double* targets,
                               const double* weights, int max_leaves,
                               int min_node_size, Vector* gain_accum) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  std::vector<int> all_features(p);
  for (int j = 0; j < p; ++j) all_features[j] = j;
  std::vector<int> idx(n);
  for (int i = 0; i < n; ++i) idx[i] = i;

  RegressionTree tree;
  std::vector<std::pair<int, int>> ranges;
  std::vector<SampleEntry> scratch;
  tree.nodes.emplace_back();
  ranges.push_back({0, n});
  tree.nodes[0].value = node_value(targets, weights, idx, 0, n);

  struct Pending {
    int node, lo, hi;
    BestSplit best;
  };
  std::vector<Pending> pending;
  auto consider = [&](int node, int lo, int hi) {
    if (hi - lo <= min_node_size || hi - lo < 2) return;
    BestSplit best = find_best_split(X, targets, weights, idx, lo, hi,
                                     all_features, scratch);
    if (best.feature >= 0) pending.push_back({node, lo, hi, best});
  };
  consider(0, 0, n);
  int leaves = 1;
  while (leaves < max_leaves && !pending.empty()) {
    std::size_t pick = 0;
    for (std::size_t i = 1; i < pending.size(); ++i) {
      if (pending[i].best.gain > pending[pick].best.gain ||
          (pending[i].best.gain == pending[pick].best.gain &&
           pending[i].node < pending[pick].node))
        pick = i;
    }
    Pending chosen = pending[pick];
    pending.erase(pending.begin() + pick);
    auto mid_it = std::stable_partition(
        idx.begin() + chosen.lo, idx.begin() + chosen.hi, [&](int row) {
          return X(row, chosen.best.feature) < chosen.best.threshold;
        });
    int mid = static_cast<int>(mid_it - idx.begin());
    if (mid == chosen.lo || mid == chosen.hi) continue;
    if (gain_accum) (*gain_accum)(chosen.best.feature) += chosen.best.gain;
    int left = static_cast<int>(tree.nodes.size());
    tree.nodes[chosen.node].feature = chosen.best.feature;
    tree.nodes[chosen.node].threshold = chosen.best.threshold;
    tree.nodes[chosen.node].left = left;
    tree.nodes[chosen.node].right = left + 1;
    tree.nodes.emplace_back();
    tree.nodes.emplace_back();
    ranges.push_back({chosen.lo, mid});
    ranges.push_back({mid, chosen.hi});
    tree.nodes[left].value = node_value(targets, weights, idx, chosen.lo, mid);
    tree.nodes[left + 1].value =
        node_value(targets, weights, idx, mid, chosen.hi);
    ++leaves;
    consider(left, chosen.lo, mid);
    consider(left + 1, mid, chosen.hi);
  }
  finalize_leaves(tree, targets, idx, ranges);
  return tree;
}

int route_point(const RegressionTree& tree, const Eigen::RowVectorXd& x) {
  int node = 0;
  while (tree.nodes[node].feature >= 0)
    node = x(tree.nodes[node].feature) < tree.nodes[node].threshold
               ? tree.nodes[node].left
               : tree.nodes[node].right;
  return node;
}

double tree_predict_row(const RegressionTree& tree, const Matrix& X, int row) {
  return tree.nodes[tree.route(X, row)].value;
}

// One boosting stage: grow a tree on the current residuals and update them.
RegressionTree boost_round(const Matrix& X, Vector& resid, const Vector* w,
                           const GbtOptions& opts, Vector* gain_accum) {
  RegressionTree tree =
      grow_best_first(X, resid.data(), w ? w->data() : nullptr,
                      opts.max_leaves, opts.min_node_size, gain_accum);
  for (std::size_t node = 0; node < tree.nodes.size(); ++node) {
    const TreeNode& nd = tree.nodes[node];
    if (nd.feature >= 0) continue;
    for (int k = nd.rows_begin; k < nd.rows_end; ++k)
      resid(tree.leaf_rows[k]) -= opts.learning_rate * nd.value;
  }
  return tree;
}

}  // namespace

TreeEnsemble forest_fit(const Matrix& X, const Vector& y, int num_trees,
                        int mtry, int min_node_size, std::uint64_t seed,
                        int threads) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n < 2) throw DataError("forest requires at least 2 rows");
  if (y.size() != n) throw DataError("response length does not match rows");
  if (X.hasNaN()) throw DataError("features contain missing values");
  if (mtry < 1 || mtry > p) throw UsageError("mtry must be in [1, p]");
  if (num_trees < 1) throw UsageError("num_trees must be positive");
  TreeEnsemble e;
  e.kind = "forest";
  e.seed = seed;
  e.p = p;
  e.trees.resize(num_trees);
  std::vector<Vector> gains(num_trees, Vector::Zero(p));
  parallel_for(num_trees, threads, [&](std::size_t t) {
    Rng rng(derive_seed(seed, t));
    std::vector<int> rows(n);
    for (int i = 0; i < n; ++i) rows[i] = static_cast<int>(rng.uniform_int(n));
    e.trees[t] = grow_depth_first(X, y.data(), std::move(rows), mtry,
                                  min_node_size, rng, &gains[t]);
  });
  e.feature_gain = Vector::Zero(p);
  for (const Vector& g : gains) e.feature_gain += g;
  return e;
}

TreeEnsemble gbt_fit(const Matrix& X, const Vector& y, const GbtOptions& opts) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (n < 1) throw DataError("empty training data");
  if (y.size() != n) throw DataError("response length does not match rows");
  if (X.hasNaN()) throw DataError("features contain missing values");
  if (opts.num_rounds < 1) throw UsageError("num_rounds must be positive");
  if (!(opts.learning_rate > 0.0 && opts.learning_rate <= 1.0))
    throw UsageError("learning_rate must be in (0, 1]");
  if (opts.max_leaves < 1) throw UsageError("max_leaves must be positive");

  int rounds = opts.num_rounds;
  if (opts.folds) {
    // Round count minimizing mean fold error, early stop after `patience`
    // rounds without improvement.
    auto splits = cv_splits(*opts.folds);
    struct FoldState {
      Matrix X;
      Vector resid;
      Vector w;
      bool weighted = false;
      std::vector<int> eval;
      Vector eval_pred;
      double init = 0.0;
    };
    std::vector<FoldState> states(splits.size());
    for (std::size_t s = 0; s < splits.size(); ++s) {
      auto& [train_rows, eval_rows] = splits[s];
      FoldState& st = states[s];
      st.X.resize(train_rows.size(), p);
      st.resid.resize(train_rows.size());
      if (opts.weights) {
        st.w.resize(train_rows.size());
        st.weighted = true;
      }
      for (std::size_t i = 0; i < train_rows.size(); ++i) {
        st.X.row(i) = X.row(train_rows[i]);
        st.resid(i) = y(train_rows[i]);
        if (opts.weights) st.w(i) = (*opts.weights)(train_rows[i]);
      }
      st.init = st.weighted && st.w.sum() > 0
                    ? st.w.dot(st.resid) / st.w.sum()
                    : st.resid.mean();
      st.resid.array() -= st.init;
      st.eval = eval_rows;
      st.eval_pred = Vector::Constant(eval_rows.size(), st.init);
    }
    GbtOptions fold_opts = opts;
    fold_opts.folds = nullptr;
    double best_err = std::numeric_limits<double>::infinity();
    int best_round = 1;
    for (int r = 1; r <= opts.num_rounds; ++r) {
      double err = 0.0;
      for (FoldState& st : states) {
        RegressionTree tree =
            boost_round(st.X, st.resid, st.weighted ? &st.w : nullptr,
                        fold_opts, nullptr);
        for (std::size_t i = 0; i < st.eval.size(); ++i) {
          Eigen::RowVectorXd xe = X.row(st.eval[i]);
          st.eval_pred(i) +=
              opts.learning_rate * tree.nodes[route_point(tree, xe)].value;
          double d = y(st.eval[i]) - st.eval_pred(i);
          err += d * d / st.eval.size();
        }
      }
      err /= states.size();
      if (err < best_err) {
        best_err = err;
        best_round = r;
      }
      if (r - best_round >= opts.patience) break;
    }
    rounds = best_round;
  }

  TreeEnsemble e;
  e.kind = "boosted";
  e.seed = opts.seed;
  e.p = p;
  e.learning_rate = opts.learning_rate;
  e.feature_gain = Vector::Zero(p);
  double wsum = opts.weights ? opts.weights->sum() : 0.0;
  e.init_value = opts.weights && wsum > 0 ? opts.weights->dot(y) / wsum
                                          : y.mean();
  Vector resid = (y.array() - e.init_value).matrix();
  e.trees.reserve(rounds);
  GbtOptions grow_opts = opts;
  for (int r = 0; r < rounds; ++r)
    e.trees.push_back(
        boost_round(X, resid, opts.weights, grow_opts, &e.feature_gain));
  return e;
}

Vector predict(const TreeEnsemble& ensemble, const Matrix& X) {
  if (static_cast<int>(X.cols()) != ensemble.p)
    throw DataError("feature count does not match ensemble");
  const int n = static_cast<int>(X.rows());
  Vector out = Vector::Zero(n);
  for (const RegressionTree& tree : ensemble.trees)
    for (int i = 0; i < n; ++i) out(i) += tree_predict_row(tree, X, i);
  if (ensemble.kind == "forest") {
    out /= ensemble.num_trees();
  } else {
    out = (ensemble.init_value + ensemble.learning_rate * out.array()).matrix();
  }
  return out;
}

LeafAssignment leaf_assignments(const TreeEnsemble& ensemble, const Matrix& X) {
  if (static_cast<int>(X.cols()) != ensemble.p)
    throw DataError("feature count does not match ensemble");
  const int n = static_cast<int>(X.rows());
  LeafAssignment out(n, ensemble.num_trees());
  for (int t = 0; t < ensemble.num_trees(); ++t)
    for (int i = 0; i < n; ++i) out(i, t) = ensemble.trees[t].route(X, i);
  return out;
}

Matrix ensemble_similarity(const TreeEnsemble& ensemble, const Matrix& A,
                           const Matrix& B) {
  if (static_cast<int>(A.cols()) != ensemble.p ||
      static_cast<int>(B.cols()) != ensemble.p)
    throw DataError("feature count does not match ensemble");
  const int na = static_cast<int>(A.rows());
  const int nb = static_cast<int>(B.rows());
  Matrix S = Matrix::Zero(na, nb);
  std::unordered_map<int, std::vector<int>> buckets;
  for (const RegressionTree& tree : ensemble.trees) {
    buckets.clear();
    for (int j = 0; j < nb; ++j) buckets[tree.route(B, j)].push_back(j);
    for (int i = 0; i < na; ++i) {
      auto it = buckets.find(tree.route(A, i));
      if (it == buckets.end()) continue;
      for (int j : it->second) S(i, j) += 1.0;
    }
  }
  return S / ensemble.num_trees();
}

Matrix proximity(const TreeEnsemble& forest, const Matrix& A, const Matrix& B) {
  if (forest.kind != "forest")
    throw UsageError("proximity requires a forest ensemble");
  return ensemble_similarity(forest, A, B);
}

double weighted_leaf_predict(const TreeEnsemble& ensemble,
                             const Eigen::RowVectorXd& x_star,
                             const Matrix& X_train, const Vector& y_train,
                             const Vector& attn) {
  if (x_star.size() != ensemble.p)
    throw DataError("feature count does not match ensemble");
  if (static_cast<int>(X_train.rows()) != attn.size() ||
      y_train.size() != attn.size())
    throw DataError("attention length does not match training rows");
  const bool boosted = ensemble.kind == "boosted";
  double acc = 0.0;
  for (const RegressionTree& tree : ensemble.trees) {
    const TreeNode& leaf = tree.nodes[route_point(tree, x_star)];
    double aw = 0.0, awy = 0.0;
    for (int k = leaf.rows_begin; k < leaf.rows_end; ++k) {
      int row = tree.leaf_rows[k];
      double target = boosted ? tree.leaf_values[k] : y_train(row);
      aw += attn(row);
      awy += attn(row) * target;
    }
    // Zero attention mass in the leaf: fall back to the unweighted value.
    acc += aw > 0.0 ? awy / aw : leaf.value;
  }
  if (boosted) return ensemble.init_value + ensemble.learning_rate * acc;
  return acc / ensemble.num_trees();
}

}  // namespace attnsl
