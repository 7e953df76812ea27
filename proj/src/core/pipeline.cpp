#include "core/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace attnsl {

std::vector<double> default_m_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 10; ++i) g.push_back(i / 10.0);
  return g;
}

namespace {

struct Wires {
  std::vector<int> sim;
  std::vector<int> reg;
  std::vector<std::string> reg_names;
};

std::vector<int> resolve_columns(const Dataset& train,
                                 const std::vector<std::string>& names) {
  std::vector<int> cols;
  if (names.empty()) {
    for (int j = 0; j < train.p(); ++j) cols.push_back(j);
    return cols;
  }
  for (const std::string& nm : names) {
    auto it = std::find(train.feature_names.begin(), train.feature_names.end(),
                        nm);
    if (it == train.feature_names.end())
      throw DataError("unknown feature column: " + nm);
    cols.push_back(static_cast<int>(it - train.feature_names.begin()));
  }
  return cols;
}

Wires wire(const Dataset& train, const PipelineConfig& config) {
  Wires w;
  w.sim = resolve_columns(train, config.similarity_features);
  w.reg = resolve_columns(train, config.regression_features);
  for (int j : w.reg) w.reg_names.push_back(train.feature_names[j]);
  return w;
}

Matrix take_cols(const Matrix& X, const std::vector<int>& cols) {
  Matrix out(X.rows(), cols.size());
  for (std::size_t k = 0; k < cols.size(); ++k) out.col(k) = X.col(cols[k]);
  return out;
}

void validate_config(const PipelineConfig& c) {
  if (!(c.temperature > 0.0)) throw UsageError("temperature must be positive");
  if (c.cv_folds < 2) throw UsageError("cv_folds must be at least 2");
  if (c.num_trees < 1) throw UsageError("num_trees must be positive");
  if (c.m_grid.empty()) throw UsageError("m_grid must not be empty");
  bool has0 = false, has1 = false;
  for (double m : c.m_grid) {
    if (!(m >= 0.0 && m <= 1.0)) throw UsageError("m_grid values must lie in [0,1]");
    has0 = has0 || m == 0.0;
    has1 = has1 || m == 1.0;
  }
  if (!has0 || !has1) throw UsageError("m_grid must contain 0 and 1");
  if (c.fixed_m && !(*c.fixed_m >= 0.0 && *c.fixed_m <= 1.0))
    throw UsageError("fixed mixing value must lie in [0,1]");
}

void validate_inputs(const Dataset& train, const Matrix& X_test,
                     const PipelineConfig& config) {
  validate_config(config);
  if (!train.has_response) throw DataError("training data has no response");
  if (train.has_missing())
    throw DataError("training features must be imputed first");
  if (X_test.rows() < 1) throw DataError("empty test set");
  if (X_test.cols() != train.p())
    throw DataError("test feature count does not match training data");
  if (!X_test.allFinite()) throw DataError("test features must be imputed first");
}

int resolved_mtry(const PipelineConfig& config, int p) {
  return config.mtry > 0 ? config.mtry : default_mtry(p);
}

GbtOptions gbt_options(const PipelineConfig& config, std::uint64_t seed) {
  GbtOptions o;
  o.num_rounds = config.gbt_rounds;
  o.learning_rate = config.gbt_learning_rate;
  o.max_leaves = config.gbt_max_leaves;
  o.min_node_size = config.gbt_min_node_size;
  o.seed = seed;
  return o;
}

// One mixing-CV fold: run the full algorithm on the fold's training part
// and store base/attention predictions for the held-out rows.
void fold_fit_eval(const Dataset& train, const PipelineConfig& config,
                   const Wires& wires, const std::vector<int>& rows_train,
                   const std::vector<int>& rows_eval, std::uint64_t fold_seed,
                   Vector& base_out, Vector& attn_out) {
  Dataset sub = subset_rows(train, rows_train);
  Matrix Xs_sim = take_cols(sub.X, wires.sim);
  Matrix Xs_reg = take_cols(sub.X, wires.reg);
  Matrix Xe = subset_rows(train, rows_eval).X;
  Matrix Xe_sim = take_cols(Xe, wires.sim);
  Matrix Xe_reg = take_cols(Xe, wires.reg);
  const int n_sub = sub.n();
  const int n_eval = static_cast<int>(rows_eval.size());

  if (config.approximate) {
    TreeEnsemble ens;
    if (config.base_learner == BaseLearner::Forest) {
      ens = forest_fit(Xs_reg, sub.y, config.num_trees,
                       resolved_mtry(config, Xs_reg.cols()),
                       config.min_node_size, derive_seed(fold_seed, 1),
                       config.threads);
    } else {
      GbtOptions opts = gbt_options(config, derive_seed(fold_seed, 1));
      FoldPlan inner;
      if (config.gbt_cv_rounds) {
        inner = make_folds(n_sub, FoldKind::KFold,
                           std::min(config.cv_folds, n_sub),
                           derive_seed(fold_seed, 2));
        opts.folds = &inner;
      }
      ens = gbt_fit(Xs_reg, sub.y, opts);
    }
    AttentionMatrix A = softmax_rows(ensemble_similarity(ens, Xe_reg, Xs_reg),
                                     config.temperature);
    Vector base = predict(ens, Xe_reg);
    for (int i = 0; i < n_eval; ++i) {
      base_out(rows_eval[i]) = base(i);
      attn_out(rows_eval[i]) = weighted_leaf_predict(
          ens, Xe_reg.row(i), Xs_reg, sub.y, A.weights.row(i).transpose());
    }
    return;
  }

  TreeEnsemble forest = forest_fit(
      Xs_sim, sub.y, config.num_trees, resolved_mtry(config, Xs_sim.cols()),
      config.min_node_size, derive_seed(fold_seed, 1), config.threads);
  AttentionMatrix A =
      attention_from_forest(forest, Xe_sim, Xs_sim, config.temperature);

  if (config.base_learner == BaseLearner::Lasso) {
    FoldPlan inner = make_folds(n_sub, FoldKind::KFold,
                                std::min(config.cv_folds, n_sub),
                                derive_seed(fold_seed, 2));
    LassoCvResult base = lasso_cv(Xs_reg, sub.y, inner);
    Vector base_pred = predict(base.model, Xe_reg);
    std::vector<double> attn_pred(n_eval);
    parallel_for(n_eval, config.threads, [&](std::size_t i) {
      Vector w = A.weights.row(i).transpose();
      LinearModel m = weighted_lasso_fit(Xs_reg, sub.y, w, base.lambda_hat,
                                         &base.model.coefficients);
      attn_pred[i] = predict(m, Xe_reg.row(i))(0);
    });
    for (int i = 0; i < n_eval; ++i) {
      base_out(rows_eval[i]) = base_pred(i);
      attn_out(rows_eval[i]) = attn_pred[i];
    }
  } else {
    GbtOptions opts = gbt_options(config, derive_seed(fold_seed, 3));
    FoldPlan inner;
    if (config.gbt_cv_rounds) {
      inner = make_folds(n_sub, FoldKind::KFold,
                         std::min(config.cv_folds, n_sub),
                         derive_seed(fold_seed, 2));
      opts.folds = &inner;
    }
    TreeEnsemble base = gbt_fit(Xs_reg, sub.y, opts);
    Vector base_pred = predict(base, Xe_reg);
    GbtOptions point_opts = gbt_options(config, derive_seed(fold_seed, 3));
    point_opts.num_rounds = base.num_trees();
    std::vector<double> attn_pred(n_eval);
    parallel_for(n_eval, config.threads, [&](std::size_t i) {
      Vector w = A.weights.row(i).transpose();
      GbtOptions o = point_opts;
      o.weights = &w;
      TreeEnsemble m = gbt_fit(Xs_reg, sub.y, o);
      attn_pred[i] = predict(m, Xe_reg.row(i))(0);
    });
    for (int i = 0; i < n_eval; ++i) {
      base_out(rows_eval[i]) = base_pred(i);
      attn_out(rows_eval[i]) = attn_pred[i];
    }
  }
}

double pick_m(const std::vector<double>& grid,
              const std::function<double(double)>& error) {
  std::vector<double> sorted = grid;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  double best_m = sorted.front();
  double best_err = error(sorted.front());
  for (std::size_t k = 1; k < sorted.size(); ++k) {
    double e = error(sorted[k]);
    if (e < best_err) {
      best_err = e;
      best_m = sorted[k];
    }
  }
  return best_m;
}

Vector blend_with(const Vector& y_base, const Vector& y_attn,
                  const MixingParameter& mixing) {
  if (mixing.mode == MixingMode::Adaptive) {
    Vector out(y_base.size());
    for (int i = 0; i < y_base.size(); ++i) {
      double m = mixing.per_point_values(i);
      out(i) = (1.0 - m) * y_base(i) + m * y_attn(i);
    }
    return out;
  }
  return (1.0 - mixing.value) * y_base + mixing.value * y_attn;
}

MixingParameter resolve_mixing(const Dataset& train,
                               const PipelineConfig& config,
                               const AttentionMatrix& attention) {
  if (config.fixed_m) {
    MixingParameter m;
    m.value = *config.fixed_m;
    return m;
  }
  return select_mixing_cv(train, config,
                          config.adaptive ? &attention : nullptr);
}

}  // namespace

MixingParameter select_mixing_cv(const Dataset& train,
                                 const PipelineConfig& config,
                                 const AttentionMatrix* test_attention) {
  validate_config(config);
  if (!train.has_response) throw DataError("training data has no response");
  if (config.adaptive && !test_attention)
    throw UsageError("adaptive mixing needs the test attention rows");
  if (test_attention && test_attention->weights.cols() != train.n())
    throw DataError("attention columns do not match training rows");
  const int n = train.n();
  Wires wires = wire(train, config);

  Vector base_pred(n), attn_pred(n);
  FoldPlan plan = make_folds(n, FoldKind::KFold, std::min(config.cv_folds, n),
                             derive_seed(config.seed, 3));
  auto splits = cv_splits(plan);
  for (std::size_t f = 0; f < splits.size(); ++f)
    fold_fit_eval(train, config, wires, splits[f].first, splits[f].second,
                  derive_seed(config.seed, 1000 + f), base_pred, attn_pred);

  auto squared_err = [&](double m, int j) {
    double r = train.y(j) - ((1.0 - m) * base_pred(j) + m * attn_pred(j));
    return r * r;
  };

  MixingParameter out;
  if (!config.adaptive) {
    out.mode = MixingMode::Global;
    out.value = pick_m(config.m_grid, [&](double m) {
      double acc = 0.0;
      for (int j = 0; j < n; ++j) acc += squared_err(m, j);
      return acc / n;
    });
    return out;
  }

  out.mode = MixingMode::Adaptive;
  const int n_test = static_cast<int>(test_attention->weights.rows());
  out.per_point_values.resize(n_test);
  for (int i = 0; i < n_test; ++i) {
    out.per_point_values(i) = pick_m(config.m_grid, [&](double m) {
      double num = 0.0, den = 0.0;
      for (int j = 0; j < n; ++j) {
        double w = test_attention->weights(i, j);
        num += w * squared_err(m, j);
        den += w;
      }
      return num / (den + 1e-12);
    });
  }
  out.value = out.per_point_values.mean();
  return out;
}

namespace {

PipelineResult fit_predict_full(const Dataset& train, const Matrix& X_test,
                                const PipelineConfig& config) {
  validate_inputs(train, X_test, config);
  if (config.base_learner == BaseLearner::Forest)
    throw UsageError(
        "per-point forest fits are not supported; use the approximate mode");
  Wires wires = wire(train, config);
  Matrix X_sim = take_cols(train.X, wires.sim);
  Matrix X_reg = take_cols(train.X, wires.reg);
  Matrix Xt_sim = take_cols(X_test, wires.sim);
  Matrix Xt_reg = take_cols(X_test, wires.reg);
  const int n_test = static_cast<int>(X_test.rows());
  const int p_reg = static_cast<int>(wires.reg.size());

  TreeEnsemble forest = forest_fit(
      X_sim, train.y, config.num_trees, resolved_mtry(config, X_sim.cols()),
      config.min_node_size, derive_seed(config.seed, 1), config.threads);

  PipelineResult result;
  result.attention =
      attention_from_forest(forest, Xt_sim, X_sim, config.temperature);
  result.mixing = resolve_mixing(train, config, result.attention);

  if (config.base_learner == BaseLearner::Lasso) {
    FoldPlan inner = make_folds(train.n(), FoldKind::KFold,
                                std::min(config.cv_folds, train.n()),
                                derive_seed(config.seed, 2));
    LassoCvResult base = lasso_cv(X_reg, train.y, inner);
    result.lambda_hat = base.lambda_hat;
    result.y_base = predict(base.model, Xt_reg);
    result.y_attn.resize(n_test);
    result.blended_coefficients.resize(n_test, p_reg + 1);
    result.coefficient_names.push_back("intercept");
    for (const std::string& nm : wires.reg_names)
      result.coefficient_names.push_back(nm);

    std::vector<LinearModel> models(n_test);
    parallel_for(n_test, config.threads, [&](std::size_t i) {
      Vector w = result.attention.weights.row(i).transpose();
      models[i] = weighted_lasso_fit(X_reg, train.y, w, base.lambda_hat,
                                     &base.model.coefficients);
    });
    for (int i = 0; i < n_test; ++i) {
      result.y_attn(i) = predict(models[i], Xt_reg.row(i))(0);
      double m = result.mixing.mode == MixingMode::Adaptive
                     ? result.mixing.per_point_values(i)
                     : result.mixing.value;
      result.blended_coefficients(i, 0) =
          (1.0 - m) * base.model.intercept + m * models[i].intercept;
      for (int j = 0; j < p_reg; ++j)
        result.blended_coefficients(i, j + 1) =
            (1.0 - m) * base.model.coefficients(j) +
            m * models[i].coefficients(j);
    }
  } else {
    GbtOptions opts = gbt_options(config, derive_seed(config.seed, 2));
    FoldPlan inner;
    if (config.gbt_cv_rounds) {
      inner = make_folds(train.n(), FoldKind::KFold,
                         std::min(config.cv_folds, train.n()),
                         derive_seed(config.seed, 4));
      opts.folds = &inner;
    }
    TreeEnsemble base = gbt_fit(X_reg, train.y, opts);
    result.y_base = predict(base, Xt_reg);
    result.y_attn.resize(n_test);
    result.point_importances.resize(n_test, p_reg);
    GbtOptions point_opts = gbt_options(config, derive_seed(config.seed, 2));
    point_opts.num_rounds = base.num_trees();
    std::vector<Vector> gains(n_test);
    std::vector<double> preds(n_test);
    parallel_for(n_test, config.threads, [&](std::size_t i) {
      Vector w = result.attention.weights.row(i).transpose();
      GbtOptions o = point_opts;
      o.weights = &w;
      TreeEnsemble m = gbt_fit(X_reg, train.y, o);
      preds[i] = predict(m, Xt_reg.row(i))(0);
      gains[i] = m.feature_gain;
    });
    for (int i = 0; i < n_test; ++i) {
      result.y_attn(i) = preds[i];
      result.point_importances.row(i) = gains[i].transpose();
    }
  }

  result.y_blend = blend_with(result.y_base, result.y_attn, result.mixing);
  return result;
}

}  // namespace

PipelineResult fit_predict_attention_lasso(const Dataset& train,
                                           const Matrix& X_test,
                                           const PipelineConfig& config) {
  PipelineConfig c = config;
  c.base_learner = BaseLearner::Lasso;
  if (c.approximate)
    throw UsageError("approximate mode needs a tree base learner");
  return fit_predict_full(train, X_test, c);
}

PipelineResult fit_predict_attention_sl(const Dataset& train,
                                        const Matrix& X_test,
                                        const PipelineConfig& config) {
  PipelineConfig c = config;
  if (c.base_learner == BaseLearner::Lasso) c.base_learner = BaseLearner::Gbt;
  if (c.approximate) return approximate_attention_predict(train, X_test, c);
  return fit_predict_full(train, X_test, c);
}

PipelineResult approximate_attention_predict(const Dataset& train,
                                             const Matrix& X_test,
                                             const PipelineConfig& config) {
  PipelineConfig c = config;
  c.approximate = true;
  if (c.base_learner == BaseLearner::Lasso)
    throw UsageError("approximate mode needs a tree base learner");
  validate_inputs(train, X_test, c);
  Wires wires = wire(train, c);
  Matrix X_reg = take_cols(train.X, wires.reg);
  Matrix Xt_reg = take_cols(X_test, wires.reg);
  const int n_test = static_cast<int>(X_test.rows());

  TreeEnsemble ens;
  if (c.base_learner == BaseLearner::Forest) {
    ens = forest_fit(X_reg, train.y, c.num_trees,
                     resolved_mtry(c, X_reg.cols()), c.min_node_size,
                     derive_seed(c.seed, 1), c.threads);
  } else {
    GbtOptions opts = gbt_options(c, derive_seed(c.seed, 1));
    FoldPlan inner;
    if (c.gbt_cv_rounds) {
      inner = make_folds(train.n(), FoldKind::KFold,
                         std::min(c.cv_folds, train.n()),
                         derive_seed(c.seed, 4));
      opts.folds = &inner;
    }
    ens = gbt_fit(X_reg, train.y, opts);
  }

  PipelineResult result;
  result.attention = softmax_rows(ensemble_similarity(ens, Xt_reg, X_reg),
                                  c.temperature);
  result.mixing = resolve_mixing(train, c, result.attention);
  result.y_base = predict(ens, Xt_reg);
  result.y_attn.resize(n_test);
  std::vector<double> preds(n_test);
  parallel_for(n_test, c.threads, [&](std::size_t i) {
    preds[i] = weighted_leaf_predict(ens, Xt_reg.row(i), X_reg, train.y,
                                     result.attention.weights.row(i).transpose());
  });
  for (int i = 0; i < n_test; ++i) result.y_attn(i) = preds[i];
  result.y_blend = blend_with(result.y_base, result.y_attn, result.mixing);
  return result;
}

Vector drift_correct(const TreeEnsemble& model, const Matrix& X2,
                     const Vector& y2, const Matrix& X3, double temperature) {
  if (X2.rows() < 1) throw DataError("empty recent data");
  if (y2.size() != X2.rows())
    throw DataError("recent response length does not match rows");
  Vector r2 = y2 - predict(model, X2);
  AttentionMatrix A =
      softmax_rows(ensemble_similarity(model, X3, X2), temperature);
  return predict(model, X3) + A.weights * r2;
}

void write_predictions_csv(const std::string& path, const PipelineResult& r,
                           const std::vector<std::string>& row_ids) {
  if (static_cast<int>(row_ids.size()) != r.y_blend.size())
    throw DataError("row id count does not match predictions");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "row_id,y_base,y_attn,y_blend,m\n";
  for (int i = 0; i < r.y_blend.size(); ++i) {
    double m = r.mixing.mode == MixingMode::Adaptive
                   ? r.mixing.per_point_values(i)
                   : r.mixing.value;
    out << row_ids[i] << ',' << format_double(r.y_base(i)) << ','
        << format_double(r.y_attn(i)) << ',' << format_double(r.y_blend(i))
        << ',' << format_double(m) << '\n';
  }
}

void write_coefficients_csv(const std::string& path, const PipelineResult& r,
                            const std::vector<std::string>& row_ids) {
  if (r.blended_coefficients.rows() == 0)
    throw DataError("no blended coefficients in this result");
  if (static_cast<int>(row_ids.size()) != r.blended_coefficients.rows())
    throw DataError("row id count does not match coefficients");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "test_row_id";
  for (const std::string& nm : r.coefficient_names) out << ',' << nm;
  out << '\n';
  for (int i = 0; i < r.blended_coefficients.rows(); ++i) {
    out << row_ids[i];
    for (int j = 0; j < r.blended_coefficients.cols(); ++j)
      out << ',' << format_double(r.blended_coefficients(i, j));
    out << '\n';
  }
}

}  // namespace attnsl
