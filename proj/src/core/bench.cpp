#include "core/bench.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>

#include "core/errors.hpp"
#include "core/parallel.hpp"
#include "core/rng.hpp"

namespace attnsl {

double pse(const Vector& y_true, const Vector& y_pred) {
  if (y_true.size() == 0) throw UsageError("pse needs at least one value");
  if (y_true.size() != y_pred.size())
    throw UsageError("pse length mismatch: " + std::to_string(y_true.size()) +
                     " vs " + std::to_string(y_pred.size()));
  return (y_true - y_pred).squaredNorm() / static_cast<double>(y_true.size());
}

double relative_improvement(double pse_lasso, double pse_model) {
  if (pse_lasso <= 0.0)
    throw DataError("relative improvement undefined: lasso PSE is zero");
  return 100.0 * (pse_lasso - pse_model) / pse_lasso;
}

namespace {

// Mean response of the k nearest reference rows, ties toward lower index.
double knn_mean(const Matrix& Xs, const Vector& y,
                const Eigen::RowVectorXd& q, const std::vector<int>& ref,
                int k) {
  std::vector<std::pair<double, int>> dist(ref.size());
  for (std::size_t t = 0; t < ref.size(); ++t)
    dist[t] = {(Xs.row(ref[t]) - q).squaredNorm(), ref[t]};
  int kk = std::min<int>(k, static_cast<int>(dist.size()));
  std::partial_sort(dist.begin(), dist.begin() + kk, dist.end());
  double sum = 0.0;
  for (int t = 0; t < kk; ++t) sum += y(dist[t].second);
  return sum / kk;
}

}  // namespace

Vector knn_predict(const Dataset& train, const Matrix& X_test,
                   const std::vector<int>& k_candidates,
                   const FoldPlan& folds) {
  if (k_candidates.empty()) throw UsageError("knn needs candidate k values");
  for (int k : k_candidates)
    if (k < 1 || k > train.n())
      throw UsageError("knn k must be in [1, n_train]");
  if (!train.has_response || train.y.size() != train.n())
    throw UsageError("knn needs training responses");
  if (X_test.cols() != train.p())
    throw DataError("knn test columns disagree with training columns");
  if (static_cast<int>(folds.assignments.size()) != train.n())
    throw UsageError("knn fold plan does not cover the training rows");

  auto [Xs, params] = standardize(train.X);
  Matrix Xts = apply_standardization(params, X_test);

  int best_k = k_candidates.front();
  double best_err = std::numeric_limits<double>::infinity();
  auto splits = cv_splits(folds);
  for (int k : k_candidates) {
    double err = 0.0;
    int count = 0;
    for (const auto& [fit_rows, eval_rows] : splits) {
      for (int row : eval_rows) {
        double pred = knn_mean(Xs, train.y, Xs.row(row), fit_rows, k);
        double r = train.y(row) - pred;
        err += r * r;
        ++count;
      }
    }
    err /= count;
    if (err < best_err) {
      best_err = err;
      best_k = k;
    }
  }

  std::vector<int> all(train.n());
  std::iota(all.begin(), all.end(), 0);
  Vector out(X_test.rows());
  for (int i = 0; i < X_test.rows(); ++i)
    out(i) = knn_mean(Xs, train.y, Xts.row(i), all, best_k);
  return out;
}

namespace {

const std::vector<std::string> kDriftArms = {"baseline", "refit",
                                             "no_adaptation", "attention"};

PipelineResult fit_attention(const Dataset& train, const Matrix& X_test,
                             const PipelineConfig& pc) {
  if (pc.approximate) return approximate_attention_predict(train, X_test, pc);
  if (pc.base_learner == BaseLearner::Lasso)
    return fit_predict_attention_lasso(train, X_test, pc);
  return fit_predict_attention_sl(train, X_test, pc);
}

std::vector<double> run_replication(const ExperimentConfig& config,
                                    const std::vector<std::string>& arms,
                                    const Dataset& full,
                                    std::uint64_t rep_seed) {
  if (config.source == ExperimentSource::Drift) {
    DriftData d = gen_drift(config.drift, rep_seed);
    GbtOptions opts;
    opts.num_rounds = config.pipeline.gbt_rounds;
    opts.learning_rate = config.pipeline.gbt_learning_rate;
    opts.max_leaves = config.pipeline.gbt_max_leaves;
    opts.min_node_size = config.pipeline.gbt_min_node_size;
    FoldPlan cv1, cv2;
    if (config.pipeline.gbt_cv_rounds) {
      cv1 = make_folds(d.d1.n(), FoldKind::KFold, config.pipeline.cv_folds,
                       derive_seed(rep_seed, 22));
      opts.folds = &cv1;
    }
    opts.seed = derive_seed(rep_seed, 21);
    TreeEnsemble stale = gbt_fit(d.d1.X, d.d1.y, opts);
    GbtOptions opts2 = opts;
    if (config.pipeline.gbt_cv_rounds) {
      cv2 = make_folds(d.d2.n(), FoldKind::KFold, config.pipeline.cv_folds,
                       derive_seed(rep_seed, 24));
      opts2.folds = &cv2;
    }
    opts2.seed = derive_seed(rep_seed, 23);
    TreeEnsemble fresh = gbt_fit(d.d2.X, d.d2.y, opts2);

    std::vector<double> out(4);
    out[0] = pse(d.d1_test.y, predict(stale, d.d1_test.X));
    out[1] = pse(d.d3.y, predict(fresh, d.d3.X));
    out[2] = pse(d.d3.y, predict(stale, d.d3.X));
    out[3] = pse(d.d3.y, drift_correct(stale, d.d2.X, d.d2.y, d.d3.X,
                                       config.drift_temperature));
    return out;
  }

  Dataset train, test;
  if (config.source == ExperimentSource::Setting) {
    SimSetting s = config.setting;
    s.seed = rep_seed;
    SettingData data = gen_setting(s);
    train = std::move(data.train);
    test = std::move(data.test);
  } else {
    FoldPlan split =
        make_split(full.n(), config.test_fraction, derive_seed(rep_seed, 1));
    train = subset_rows(full, split.fold_rows(0));
    test = subset_rows(full, split.fold_rows(1));
    impute_train_means(train, {&test});
  }
  if (!test.has_response || test.y.size() != test.n())
    throw DataError("benchmark test split has no responses");

  std::vector<double> out(arms.size());
  for (std::size_t m = 0; m < arms.size(); ++m) {
    const std::string& name = arms[m];
    if (name == "lasso") {
      FoldPlan folds = make_folds(train.n(), FoldKind::KFold,
                                  config.pipeline.cv_folds,
                                  derive_seed(rep_seed, 11));
      LassoCvResult base = lasso_cv(train.X, train.y, folds);
      out[m] = pse(test.y, predict(base.model, test.X));
    } else if (name == "attention" || name == "attention_adaptive") {
      PipelineConfig pc = config.pipeline;
      pc.seed = derive_seed(rep_seed, 12);
      pc.adaptive = name == "attention_adaptive";
      out[m] = pse(test.y, fit_attention(train, test.X, pc).y_blend);
    } else {
      FoldPlan folds = make_folds(train.n(), FoldKind::KFold,
                                  config.pipeline.cv_folds,
                                  derive_seed(rep_seed, 13));
      out[m] = pse(test.y,
                   knn_predict(train, test.X, config.knn_candidates, folds));
    }
  }
  return out;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::pair<double, double> mean_se(const std::vector<double>& v) {
  double n = static_cast<double>(v.size());
  double mean = std::accumulate(v.begin(), v.end(), 0.0) / n;
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / (n - 1.0)) / std::sqrt(n)};
}

}  // namespace

MetricReport run_experiment(const ExperimentConfig& config) {
  if (config.replications < 1)
    throw UsageError("replications must be positive");

  std::vector<std::string> arms;
  if (config.source == ExperimentSource::Drift) {
    arms = kDriftArms;
  } else {
    arms = config.models;
    if (arms.empty()) throw UsageError("no models requested");
    for (const std::string& name : arms) {
      if (name != "lasso" && name != "attention" &&
          name != "attention_adaptive" && name != "knn")
        throw UsageError("unknown model: " + name);
      if (std::count(arms.begin(), arms.end(), name) > 1)
        throw UsageError("duplicate model: " + name);
    }
  }

  Dataset full;
  if (config.source == ExperimentSource::Csv) {
    if (config.test_fraction <= 0.0 || config.test_fraction >= 1.0)
      throw UsageError("test_fraction must be in (0,1)");
    full = load_csv(config.csv_path, config.response_column);
  }

  const int R = config.replications;
  const int M = static_cast<int>(arms.size());
  Matrix pse_mat(R, M);

  parallel_for(R, config.threads, [&](std::size_t rep) {
    std::uint64_t rep_seed = derive_seed(config.seed, rep);
    std::string ctx = "replication " + std::to_string(rep) + " (seed " +
                      std::to_string(rep_seed) + "): ";
    try {
      std::vector<double> row = run_replication(config, arms, full, rep_seed);
      for (int m = 0; m < M; ++m) pse_mat(rep, m) = row[m];
    } catch (const UsageError& e) {
      throw UsageError(ctx + e.what());
    } catch (const DataError& e) {
      throw DataError(ctx + e.what());
    } catch (const NumericError& e) {
      throw NumericError(ctx + e.what());
    }
  });

  MetricReport report;
  report.replications = R;
  report.pse = pse_mat;
  auto lasso_it = std::find(arms.begin(), arms.end(), "lasso");
  int lasso_idx = lasso_it == arms.end()
                      ? -1
                      : static_cast<int>(lasso_it - arms.begin());
  report.has_improvement = lasso_idx >= 0;

  for (int m = 0; m < M; ++m) {
    MetricRow row;
    row.model = arms[m];
    std::vector<double> col(pse_mat.col(m).data(), pse_mat.col(m).data() + R);
    auto [mean, se] = mean_se(col);
    row.mean_pse = mean;
    row.se_pse = se;
    row.median_pse = median_of(col);
    if (lasso_idx >= 0) {
      std::vector<double> imp(R);
      for (int r = 0; r < R; ++r)
        imp[r] = relative_improvement(pse_mat(r, lasso_idx), pse_mat(r, m));
      auto [im, ise] = mean_se(imp);
      row.mean_improvement = im;
      row.se_improvement = ise;
    }
    report.rows.push_back(std::move(row));
  }
  return report;
}

std::string report_csv(const MetricReport& report) {
  std::string out =
      "model,mean_pse,se_pse,median_pse,mean_improvement,se_improvement\n";
  for (const MetricRow& r : report.rows) {
    out += r.model + "," + format_double(r.mean_pse) + "," +
           format_double(r.se_pse) + "," + format_double(r.median_pse);
    if (report.has_improvement)
      out += "," + format_double(r.mean_improvement) + "," +
             format_double(r.se_improvement);
    else
      out += ",,";
    out += "\n";
  }
  return out;
}

std::string report_text(const MetricReport& report) {
  std::ostringstream os;
  os << "replications: " << report.replications << "\n";
  os << std::left << std::setw(22) << "model" << std::setw(26)
     << "PSE mean (SE)" << std::setw(14) << "median";
  if (report.has_improvement) os << "improvement % (SE)";
  os << "\n";
  for (const MetricRow& r : report.rows) {
    std::string pse_cell =
        format_double(r.mean_pse) + " (" + format_double(r.se_pse) + ")";
    os << std::left << std::setw(22) << r.model << std::setw(26) << pse_cell
       << std::setw(14) << format_double(r.median_pse);
    if (report.has_improvement)
      os << format_double(r.mean_improvement) + " (" +
                format_double(r.se_improvement) + ")";
    os << "\n";
  }
  return os.str();
}

}  // namespace attnsl
