#include "core/linear.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace attnsl {

namespace {

std::atomic<std::uint64_t> g_weighted_fits{0};

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

// Weighted standardization workspace shared by lambda_max, the lasso, and the
// path driver. Columns with zero weighted variance are zeroed out and excluded
// from updates.
struct StdProblem {
  Matrix Xs;   // (x - mean)/sd, weighted moments
  Matrix WXs;  // wn .* Xs, cached for the gradient dot products
  Vector wn;   // weights rescaled to sum n
  Vector yc;   // y - weighted mean
  Vector xmean, xsd;
  std::vector<char> live;  // sd > 0
  double ymean = 0.0;
  bool any_live = false;
};

StdProblem build_std_problem(const Matrix& X, const Vector& y,
                             const Vector& w) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  StdProblem sp;
  sp.wn = normalize_weights(w);
  if (sp.wn.size() != n) throw DataError("weight length does not match rows");
  if (y.size() != n) throw DataError("response length does not match rows");
  sp.ymean = sp.wn.dot(y) / n;
  sp.yc = y.array() - sp.ymean;
  sp.xmean.resize(p);
  sp.xsd.resize(p);
  sp.live.assign(p, 0);
  sp.Xs.resize(n, p);
  sp.WXs.resize(n, p);
  for (int j = 0; j < p; ++j) {
    double m = sp.wn.dot(X.col(j)) / n;
    Vector centered = X.col(j).array() - m;
    double var = sp.wn.dot(centered.cwiseProduct(centered)) / n;
    // Relative floor so rounding residue on numerically constant columns
    // (e.g. all weight on one row) does not register as variance.
    double floor = 1e-12 * std::max(1.0, std::abs(m));
    double sd = var > floor * floor ? std::sqrt(var) : 0.0;
    sp.xmean(j) = m;
    if (sd > 0.0) {
      sp.xsd(j) = sd;
      sp.live[j] = 1;
      sp.any_live = true;
      sp.Xs.col(j) = centered / sd;
    } else {
      sp.xsd(j) = 1.0;
      sp.Xs.col(j).setZero();
    }
    sp.WXs.col(j) = sp.Xs.col(j).cwiseProduct(sp.wn);
  }
  return sp;
}

struct CdOutcome {
  bool converged = false;
  int sweeps = 0;
};

constexpr double kCdTol = 1e-7;
constexpr int kMaxSweeps = 10000;

// Coordinate descent on the standardized problem. beta is the standardized
// scale iterate (in/out). Full sweeps alternate with active-set cycling until
// a full sweep moves nothing.
CdOutcome coordinate_descent(const StdProblem& sp, double lambda, Vector& beta,
                             std::vector<double>* objective_trace) {
  const int n = static_cast<int>(sp.Xs.rows());
  const int p = static_cast<int>(sp.Xs.cols());
  Vector r = sp.yc - sp.Xs * beta;

  auto update = [&](int j) -> double {
    if (!sp.live[j]) return 0.0;
    double g = sp.WXs.col(j).dot(r) / n + beta(j);
    double nb = soft_threshold(g, lambda);
    double d = nb - beta(j);
    if (d != 0.0) {
      r -= d * sp.Xs.col(j);
      beta(j) = nb;
    }
    return std::abs(d);
  };
  auto record_objective = [&] {
    if (!objective_trace) return;
    double sse = sp.wn.dot(r.cwiseProduct(r));
    objective_trace->push_back(sse / (2.0 * n) +
                               lambda * beta.cwiseAbs().sum());
  };

  CdOutcome out;
  record_objective();
  while (out.sweeps < kMaxSweeps) {
    double dmax = 0.0;
    for (int j = 0; j < p; ++j) dmax = std::max(dmax, update(j));
    ++out.sweeps;
    record_objective();
    if (dmax < kCdTol) {
      out.converged = true;
      break;
    }
    while (out.sweeps < kMaxSweeps) {
      double dact = 0.0;
      for (int j = 0; j < p; ++j)
        if (beta(j) != 0.0) dact = std::max(dact, update(j));
      ++out.sweeps;
      record_objective();
      if (dact < kCdTol) break;
    }
  }
  return out;
}

LinearModel finish_lasso(const StdProblem& sp, const Vector& beta_std,
                         double lambda, bool converged) {
  const int p = static_cast<int>(sp.Xs.cols());
  LinearModel m;
  m.kind = "lasso";
  m.lambda = lambda;
  m.converged = converged;
  m.degenerate = !sp.any_live;
  m.coefficients.resize(p);
  double dot = 0.0;
  for (int j = 0; j < p; ++j) {
    m.coefficients(j) = sp.live[j] ? beta_std(j) / sp.xsd(j) : 0.0;
    dot += m.coefficients(j) * sp.xmean(j);
  }
  m.intercept = sp.ymean - dot;
  return m;
}

double fold_mse(const LinearModel& m, const Matrix& X, const Vector& y,
                const std::vector<int>& rows) {
  double acc = 0.0;
  for (int r : rows) {
    double pred = m.intercept + X.row(r).dot(m.coefficients);
    double e = y(r) - pred;
    acc += e * e;
  }
  return acc / rows.size();
}

Matrix rows_of(const Matrix& X, const std::vector<int>& rows) {
  Matrix out(rows.size(), X.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(i) = X.row(rows[i]);
  return out;
}

Vector entries_of(const Vector& v, const std::vector<int>& rows) {
  Vector out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out(i) = v(rows[i]);
  return out;
}

}  // namespace

Vector normalize_weights(const Vector& w) {
  const int n = static_cast<int>(w.size());
  if (n == 0) throw DataError("empty weight vector");
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = w(i);
    if (!std::isfinite(v) || v < 0.0)
      throw DataError("observation weights must be finite and nonnegative");
    sum += v;
  }
  if (sum <= 0.0) throw DataError("observation weights must not all be zero");
  return w * (static_cast<double>(n) / sum);
}

LinearModel ridge_fit(const Matrix& X, const Vector& y, double lambda) {
  if (lambda < 0.0) throw UsageError("ridge lambda must be nonnegative");
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  if (y.size() != n) throw DataError("response length does not match rows");
  auto [Xs, params] = standardize(X);
  double ymean = y.mean();
  Vector yc = y.array() - ymean;
  Matrix G = (Xs.transpose() * Xs) / n;
  Vector c = (Xs.transpose() * yc) / n;
  Eigen::SelfAdjointEigenSolver<Matrix> es(G);
  const Vector& ev = es.eigenvalues();
  if (lambda == 0.0) {
    double emax = std::max(ev.maxCoeff(), 0.0);
    if (ev.minCoeff() <= emax * 1e-12 || emax == 0.0)
      throw NumericError("singular standardized Gram matrix at lambda=0");
  }
  Vector d = (ev.array() + lambda).inverse();
  Vector beta_std =
      es.eigenvectors() * d.asDiagonal() * (es.eigenvectors().transpose() * c);
  LinearModel m;
  m.kind = "ridge";
  m.lambda = lambda;
  m.coefficients = beta_std.cwiseQuotient(params.sds);
  // Constant columns carry sd 1 and a zero standardized column: their
  // eigen-solution weight is pure lambda noise, so pin them to zero.
  for (int j = 0; j < p; ++j)
    if ((Xs.col(j).array() == 0.0).all()) m.coefficients(j) = 0.0;
  m.intercept = ymean - m.coefficients.dot(params.means);
  return m;
}

double ridge_cv_lambda(const Matrix& X, const Vector& y,
                       const FoldPlan& folds) {
  Vector ones = Vector::Ones(X.rows());
  double lmax = lambda_max(X, y, ones);
  LambdaPath path = make_lambda_path(lmax, static_cast<int>(X.rows()),
                                     static_cast<int>(X.cols()));
  auto splits = cv_splits(folds);
  Vector err = Vector::Zero(path.values.size());
  for (auto& [train_rows, eval_rows] : splits) {
    Matrix Xtr = rows_of(X, train_rows);
    Vector ytr = entries_of(y, train_rows);
    auto [Xs, params] = standardize(Xtr);
    double ymean = ytr.mean();
    Vector yc = ytr.array() - ymean;
    Matrix G = (Xs.transpose() * Xs) / Xtr.rows();
    Vector c = (Xs.transpose() * yc) / Xtr.rows();
    Eigen::SelfAdjointEigenSolver<Matrix> es(G);
    for (int li = 0; li < path.values.size(); ++li) {
      Vector d = (es.eigenvalues().array() + path.values(li)).inverse();
      Vector beta_std = es.eigenvectors() * d.asDiagonal() *
                        (es.eigenvectors().transpose() * c);
      Vector coef = beta_std.cwiseQuotient(params.sds);
      double icept = ymean - coef.dot(params.means);
      double acc = 0.0;
      for (int r : eval_rows) {
        double e = y(r) - (icept + X.row(r).dot(coef));
        acc += e * e;
      }
      err(li) += acc / eval_rows.size();
    }
  }
  int best = 0;
  for (int li = 1; li < err.size(); ++li)
    if (err(li) < err(best)) best = li;
  return path.values(best);
}

double lambda_max(const Matrix& X, const Vector& y, const Vector& w) {
  StdProblem sp = build_std_problem(X, y, w);
  const int n = static_cast<int>(X.rows());
  double best = 0.0;
  for (int j = 0; j < X.cols(); ++j)
    if (sp.live[j])
      best = std::max(best, std::abs(sp.WXs.col(j).dot(sp.yc) / n));
  return best;
}

LambdaPath make_lambda_path(double lmax, int n, int p, int count) {
  LambdaPath path;
  if (lmax <= 0.0) {
    path.values = Vector::Zero(1);
    return path;
  }
  double ratio = n < p ? 1e-2 : 1e-3;
  path.values.resize(count);
  for (int i = 0; i < count; ++i)
    path.values(i) = lmax * std::pow(ratio, static_cast<double>(i) / (count - 1));
  return path;
}

namespace {

LinearModel weighted_lasso_impl(const Matrix& X, const Vector& y,
                                const Vector& w, double lambda,
                                const Vector* warm_start,
                                std::vector<double>* trace) {
  if (lambda < 0.0) throw UsageError("lasso lambda must be nonnegative");
  if (X.hasNaN()) throw DataError("features contain missing values");
  StdProblem sp = build_std_problem(X, y, w);
  const int p = static_cast<int>(X.cols());
  Vector beta = Vector::Zero(p);
  if (warm_start) {
    if (warm_start->size() != p)
      throw DataError("warm start length does not match p");
    // Original-scale warm start mapped onto this fit's standardization.
    for (int j = 0; j < p; ++j)
      beta(j) = sp.live[j] ? (*warm_start)(j)*sp.xsd(j) : 0.0;
  }
  CdOutcome out = coordinate_descent(sp, lambda, beta, trace);
  g_weighted_fits.fetch_add(1, std::memory_order_relaxed);
  return finish_lasso(sp, beta, lambda, out.converged);
}

}  // namespace

LinearModel weighted_lasso_fit(const Matrix& X, const Vector& y,
                               const Vector& w, double lambda,
                               const Vector* warm_start) {
  return weighted_lasso_impl(X, y, w, lambda, warm_start, nullptr);
}

LinearModel weighted_lasso_fit_traced(const Matrix& X, const Vector& y,
                                      const Vector& w, double lambda,
                                      std::vector<double>& objective_trace) {
  objective_trace.clear();
  return weighted_lasso_impl(X, y, w, lambda, nullptr, &objective_trace);
}

LassoCvResult lasso_cv(const Matrix& X, const Vector& y, const FoldPlan& folds,
                       const std::optional<LambdaPath>& path_in) {
  const int n = static_cast<int>(X.rows());
  const int p = static_cast<int>(X.cols());
  Vector ones = Vector::Ones(n);
  LassoCvResult res;
  res.path = path_in ? *path_in
                     : make_lambda_path(lambda_max(X, y, ones), n, p);
  const int L = static_cast<int>(res.path.values.size());
  auto splits = cv_splits(folds);
  Matrix fold_err(splits.size(), L);
  for (std::size_t s = 0; s < splits.size(); ++s) {
    auto& [train_rows, eval_rows] = splits[s];
    Matrix Xtr = rows_of(X, train_rows);
    Vector ytr = entries_of(y, train_rows);
    StdProblem sp = build_std_problem(Xtr, ytr, Vector::Ones(Xtr.rows()));
    Vector beta = Vector::Zero(p);
    for (int li = 0; li < L; ++li) {
      coordinate_descent(sp, res.path.values(li), beta, nullptr);
      LinearModel m = finish_lasso(sp, beta, res.path.values(li), true);
      fold_err(s, li) = fold_mse(m, X, y, eval_rows);
    }
  }
  res.cv_mse = fold_err.colwise().mean();
  int best = 0;
  for (int li = 1; li < L; ++li)
    if (res.cv_mse(li) < res.cv_mse(best)) best = li;
  res.lambda_hat = res.path.values(best);

  // Refit on all rows, warm-started down the path head.
  StdProblem sp = build_std_problem(X, y, ones);
  Vector beta = Vector::Zero(p);
  CdOutcome out;
  for (int li = 0; li <= best; ++li)
    out = coordinate_descent(sp, res.path.values(li), beta, nullptr);
  res.model = finish_lasso(sp, beta, res.lambda_hat, out.converged);
  return res;
}

Vector predict(const LinearModel& model, const Matrix& X) {
  if (X.cols() != model.coefficients.size())
    throw DataError("feature count does not match model");
  return (X * model.coefficients).array() + model.intercept;
}

std::uint64_t weighted_fit_count() {
  return g_weighted_fits.load(std::memory_order_relaxed);
}

void reset_weighted_fit_count() {
  g_weighted_fits.store(0, std::memory_order_relaxed);
}

}  // namespace attnsl
