#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "core/dataset.hpp"
#include "core/linear.hpp"
#include "core/rng.hpp"
#include "test_util.hpp"

using namespace attnsl;

namespace {

// Mean-zero design with (1/n) X'X = I, so internal standardization is a
// no-op: orthogonalize a random matrix against the constant column.
Matrix orthonormal_design(Rng& rng, int n, int p) {
  Matrix A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = testutil::gaussian_matrix(rng, n, p);
  Eigen::HouseholderQR<Matrix> qr(A);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, p + 1);
  return Q.rightCols(p) * std::sqrt(static_cast<double>(n));
}

// Independent KKT verification on the standardized scale, recomputed from
// scratch with plain Eigen ops.
void check_kkt(const Matrix& X, const Vector& y, const Vector& w,
               double lambda, const LinearModel& m, double tol_active = 1e-6,
               double tol_inactive = 1e-6) {
  int n = static_cast<int>(X.rows());
  Vector wn = w * (n / w.sum());
  Vector resid = y - predict(m, X);
  for (int j = 0; j < X.cols(); ++j) {
    double mean = wn.dot(X.col(j)) / n;
    Vector cen = X.col(j).array() - mean;
    double sd = std::sqrt(wn.dot(cen.cwiseProduct(cen)) / n);
    if (sd <= 0.0) continue;
    Vector xs = cen / sd;
    double grad = wn.cwiseProduct(xs).dot(resid) / n;
    if (m.coefficients(j) != 0.0) {
      double s = m.coefficients(j) > 0 ? 1.0 : -1.0;
      CHECK(std::abs(grad - lambda * s) < tol_active);
    } else {
      CHECK(std::abs(grad) <= lambda + tol_inactive);
    }
  }
}

}  // namespace

TEST_CASE("ridge at huge lambda collapses to the mean") {
  Rng rng(1);
  Matrix X = testutil::gaussian_matrix(rng, 40, 5);
  Vector y = testutil::gaussian_vector(rng, 40) * 2.0;
  LinearModel m = ridge_fit(X, y, 1e12);
  CHECK(m.coefficients.cwiseAbs().maxCoeff() < 1e-6);
  CHECK(std::abs(m.intercept - y.mean()) < 1e-6);
}

TEST_CASE("ridge on orthonormal design at lambda zero") {
  Rng rng(2);
  int n = 50, p = 4;
  Matrix X = orthonormal_design(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  LinearModel m = ridge_fit(X, y, 0.0);
  Vector expected = X.transpose() * y / n;
  CHECK((m.coefficients - expected).cwiseAbs().maxCoeff() < 1e-10);
  // Residual orthogonality at lambda = 0.
  Vector r = y - predict(m, X);
  CHECK((X.transpose() * r).cwiseAbs().maxCoeff() / n < 1e-10);
}

// Oracle first: direct (Gram + lambda I) solve with an independent dense
// solver (FullPivLU), standardization recomputed by hand.
TEST_CASE("ridge matches independent normal-equations solve") {
  Rng rng(3);
  int n = 30, p = 5;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  X.col(2) *= 14.0;  // uneven scales to exercise the back-transform
  Vector y = testutil::gaussian_vector(rng, n);
  double lambda = 0.7;

  Vector mean(p), sd(p);
  Matrix Xs(n, p);
  for (int j = 0; j < p; ++j) {
    mean(j) = X.col(j).mean();
    Vector c = X.col(j).array() - mean(j);
    sd(j) = std::sqrt(c.squaredNorm() / n);
    Xs.col(j) = c / sd(j);
  }
  Vector yc = y.array() - y.mean();
  Matrix G = Xs.transpose() * Xs / n + lambda * Matrix::Identity(p, p);
  Vector beta_std = Eigen::FullPivLU<Matrix>(G).solve(Xs.transpose() * yc / n);
  Vector beta = beta_std.cwiseQuotient(sd);
  double icept = y.mean() - beta.dot(mean);

  LinearModel m = ridge_fit(X, y, lambda);
  CHECK((m.coefficients - beta).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(m.intercept - icept) < 1e-8);
}

TEST_CASE("ridge shrinkage is monotone in lambda") {
  Rng rng(4);
  Matrix X = testutil::gaussian_matrix(rng, 60, 6);
  Vector y = testutil::gaussian_vector(rng, 60);
  auto [Xs, params] = standardize(X);
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {0.0, 0.01, 0.1, 1.0, 10.0}) {
    LinearModel m = ridge_fit(X, y, lambda);
    double norm = m.coefficients.cwiseProduct(params.sds).norm();
    CHECK(norm <= prev + 1e-12);
    prev = norm;
  }
}

TEST_CASE("ridge rejects singular system at lambda zero") {
  Matrix X(4, 2);
  X << 1, 2, 2, 4, 3, 6, 4, 8;  // collinear
  Vector y(4);
  y << 1, 2, 3, 4;
  CHECK_THROWS_AS(ridge_fit(X, y, 0.0), NumericError);
}

TEST_CASE("lasso at lambda_max gives the null model") {
  Rng rng(5);
  int n = 25, p = 4;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Vector w = Vector::Ones(n);
  double lmax = lambda_max(X, y, w);
  for (double lambda : {lmax, 1.001 * lmax}) {
    LinearModel m = weighted_lasso_fit(X, y, w, lambda);
    CHECK(m.coefficients.cwiseAbs().maxCoeff() == 0.0);
    CHECK(std::abs(m.intercept - y.mean()) < 1e-12);
  }
  // Just below the threshold something must activate.
  LinearModel m2 = weighted_lasso_fit(X, y, w, 0.99 * lmax);
  CHECK(m2.coefficients.cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("weighted lambda_max null model with nonuniform weights") {
  Rng rng(6);
  int n = 30, p = 3;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.1, 2.0);
  double lmax = lambda_max(X, y, w);
  LinearModel m = weighted_lasso_fit(X, y, w, lmax);
  CHECK(m.coefficients.cwiseAbs().maxCoeff() == 0.0);
  double wmean = w.dot(y) / w.sum();
  CHECK(std::abs(m.intercept - wmean) < 1e-12);
}

TEST_CASE("lasso at lambda zero equals least squares") {
  Rng rng(7);
  int n = 50, p = 4;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Matrix A(n, p + 1);
  A.col(0).setOnes();
  A.rightCols(p) = X;
  Vector ols = A.colPivHouseholderQr().solve(y);
  LinearModel m = weighted_lasso_fit(X, y, Vector::Ones(n), 0.0);
  CHECK(std::abs(m.intercept - ols(0)) < 1e-6);
  CHECK((m.coefficients - ols.tail(p)).cwiseAbs().maxCoeff() < 1e-6);
}

// Oracle first: univariate closed form S(x'y/n, lambda) for a standardized
// predictor under uniform weights.
TEST_CASE("univariate lasso equals soft threshold") {
  Rng rng(8);
  int n = 40;
  Vector x = testutil::gaussian_vector(rng, n);
  x.array() -= x.mean();
  x /= std::sqrt(x.squaredNorm() / n);
  Vector y = 0.8 * x + testutil::gaussian_vector(rng, n);
  Vector yc = y.array() - y.mean();
  double rho = x.dot(yc) / n;
  for (double lambda : {0.0, 0.1, 0.3, std::abs(rho) * 0.999, std::abs(rho) * 2}) {
    double expect = 0.0;
    if (rho > lambda) expect = rho - lambda;
    else if (rho < -lambda) expect = rho + lambda;
    LinearModel m = weighted_lasso_fit(x, y, Vector::Ones(n), lambda);
    CHECK(std::abs(m.coefficients(0) - expect) < 1e-10);
  }
}

TEST_CASE("lambda_max trivia") {
  Rng rng(9);
  Matrix X = testutil::gaussian_matrix(rng, 20, 3);
  Vector w = Vector::Ones(20);
  CHECK(lambda_max(X, Vector::Constant(20, 3.0), w) == 0.0);

  // Single predictor exactly equal to y: weighted variance of y.
  Vector y = testutil::gaussian_vector(rng, 20);
  Matrix X1 = y;
  Vector wr(20);
  for (int i = 0; i < 20; ++i) wr(i) = rng.uniform(0.5, 1.5);
  Vector wn = wr * (20.0 / wr.sum());
  double ybar = wn.dot(y) / 20.0;
  double var = 0.0;
  for (int i = 0; i < 20; ++i) var += wn(i) * (y(i) - ybar) * (y(i) - ybar);
  var /= 20.0;
  CHECK(std::abs(lambda_max(X1, y, wr) - var / std::sqrt(var)) < 1e-12);
}

TEST_CASE("lambda path shape") {
  LambdaPath path = make_lambda_path(2.0, 100, 10);
  CHECK(path.values.size() == 100);
  CHECK(path.values(0) == 2.0);
  CHECK(path.values(99) == doctest::Approx(2e-3).epsilon(1e-12));
  for (int i = 1; i < 100; ++i) CHECK(path.values(i) < path.values(i - 1));
  LambdaPath wide = make_lambda_path(2.0, 5, 10);
  CHECK(wide.values(99) == doctest::Approx(2e-2).epsilon(1e-12));
}

TEST_CASE("KKT conditions hold on random weighted problems") {
  Rng rng(10);
  for (int rep = 0; rep < 40; ++rep) {
    int n = 20 + static_cast<int>(rng.uniform_int(60));
    int p = 2 + static_cast<int>(rng.uniform_int(12));
    Matrix X = testutil::gaussian_matrix(rng, n, p);
    Vector beta = Vector::Zero(p);
    for (int j = 0; j < std::min(p, 3); ++j) beta(j) = rng.uniform(-2, 2);
    Vector y = X * beta + testutil::gaussian_vector(rng, n);
    Vector w(n);
    for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.05, 3.0);
    double lmax = lambda_max(X, y, w);
    double lambda = lmax * std::pow(10.0, -rng.uniform(0.3, 2.5));
    LinearModel m = weighted_lasso_fit(X, y, w, lambda);
    CHECK(m.converged);
    check_kkt(X, y, w, lambda, m);
  }
}

TEST_CASE("weight scale invariance") {
  Rng rng(11);
  int n = 30, p = 5;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.1, 1.0);
  LinearModel a = weighted_lasso_fit(X, y, w, 0.05);
  LinearModel b = weighted_lasso_fit(X, y, Vector(w * 37.0), 0.05);
  CHECK((a.coefficients - b.coefficients).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(std::abs(a.intercept - b.intercept) < 1e-12);
}

TEST_CASE("zero weight equals row deletion") {
  Rng rng(12);
  int n = 30, p = 4;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Vector w = Vector::Ones(n);
  w(3) = 0.0;
  w(17) = 0.0;
  LinearModel zw = weighted_lasso_fit(X, y, w, 0.04);
  std::vector<int> keep;
  for (int i = 0; i < n; ++i)
    if (w(i) > 0) keep.push_back(i);
  Matrix Xd(keep.size(), p);
  Vector yd(keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) {
    Xd.row(i) = X.row(keep[i]);
    yd(i) = y(keep[i]);
  }
  LinearModel del = weighted_lasso_fit(Xd, yd, Vector::Ones(keep.size()), 0.04);
  CHECK((zw.coefficients - del.coefficients).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(std::abs(zw.intercept - del.intercept) < 1e-8);
}

TEST_CASE("objective is non-increasing across sweeps") {
  Rng rng(13);
  int n = 40, p = 8;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector beta = Vector::Zero(p);
  beta(0) = 2;
  beta(3) = -1;
  Vector y = X * beta + testutil::gaussian_vector(rng, n);
  Vector w(n);
  for (int i = 0; i < n; ++i) w(i) = rng.uniform(0.2, 2.0);
  std::vector<double> trace;
  weighted_lasso_fit_traced(X, y, w, 0.02, trace);
  REQUIRE(trace.size() >= 2);
  for (std::size_t i = 1; i < trace.size(); ++i)
    CHECK(trace[i] <= trace[i - 1] + 1e-12);
}

TEST_CASE("all weight on one row degenerates gracefully") {
  Rng rng(14);
  int n = 10, p = 3;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  Vector w = Vector::Zero(n);
  w(4) = 5.0;
  LinearModel m = weighted_lasso_fit(X, y, w, 0.1);
  CHECK(m.degenerate);
  CHECK(m.coefficients.cwiseAbs().maxCoeff() == 0.0);
  CHECK(std::abs(m.intercept - y(4)) < 1e-12);
}

TEST_CASE("weight validation") {
  Matrix X(3, 1);
  X << 1, 2, 3;
  Vector y(3);
  y << 1, 2, 3;
  CHECK_THROWS_AS(weighted_lasso_fit(X, y, Vector::Zero(3), 0.1), DataError);
  Vector w(3);
  w << 1, -0.5, 1;
  CHECK_THROWS_AS(weighted_lasso_fit(X, y, w, 0.1), DataError);
}

TEST_CASE("lasso_cv on pure noise stays near the path head") {
  Rng rng(15);
  int n = 60, p = 8;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = testutil::gaussian_vector(rng, n);
  FoldPlan folds = make_folds(n, FoldKind::KFold, 10, 3);
  LassoCvResult res = lasso_cv(X, y, folds);
  int idx = 0;
  for (int i = 0; i < res.path.values.size(); ++i)
    if (res.path.values(i) == res.lambda_hat) idx = i;
  CHECK(idx <= 30);  // near the head of a 100-point path
  CHECK(predict(res.model, X).array().abs().maxCoeff() <
        y.cwiseAbs().maxCoeff() * 2);
}

// Oracle: support recovery on a planted 2-feature signal.
TEST_CASE("lasso_cv recovers a strong planted support") {
  int hits = 0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(1000, seed));
    int n = 200, p = 10;
    Matrix X = testutil::gaussian_matrix(rng, n, p);
    Vector beta = Vector::Zero(p);
    beta(1) = 3.0;
    beta(6) = -2.5;
    Vector y = X * beta + testutil::gaussian_vector(rng, n);
    FoldPlan folds = make_folds(n, FoldKind::KFold, 10, derive_seed(2000, seed));
    LassoCvResult res = lasso_cv(X, y, folds);
    if (res.model.coefficients(1) != 0.0 && res.model.coefficients(6) != 0.0)
      ++hits;
  }
  CHECK(hits >= 95);
}

TEST_CASE("lasso_cv tie rule picks the largest lambda") {
  int n = 20;
  Matrix X(n, 2);
  Rng rng(16);
  X = testutil::gaussian_matrix(rng, n, 2);
  Vector y = Vector::Constant(n, 4.0);
  FoldPlan folds = make_folds(n, FoldKind::KFold, 5, 1);
  LassoCvResult res = lasso_cv(X, y, folds);
  CHECK(res.lambda_hat == res.path.values(0));
  CHECK(res.model.coefficients.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("expanding window cv evaluates only later folds") {
  Rng rng(17);
  int n = 50, p = 3;
  Matrix X = testutil::gaussian_matrix(rng, n, p);
  Vector y = X.col(0) * 2 + testutil::gaussian_vector(rng, n) * 0.3;
  FoldPlan folds = make_folds(n, FoldKind::ExpandingWindow, 5, 0);
  LassoCvResult res = lasso_cv(X, y, folds);
  CHECK(res.model.coefficients(0) != 0.0);
}

TEST_CASE("predict examples") {
  LinearModel null_model;
  null_model.kind = "lasso";
  null_model.intercept = 1.5;
  null_model.coefficients = Vector::Zero(3);
  Rng rng(18);
  Matrix X = testutil::gaussian_matrix(rng, 5, 3);
  Vector out = predict(null_model, X);
  CHECK((out.array() == 1.5).all());

  LinearModel m;
  m.kind = "lasso";
  m.intercept = 0.0;
  m.coefficients = Vector(2);
  m.coefficients << 1, 0;
  Matrix row(1, 2);
  row << 3, 7;
  CHECK(predict(m, row)(0) == 3.0);

  LinearModel r;
  r.kind = "ridge";
  r.intercept = 0.37;
  r.coefficients = testutil::gaussian_vector(rng, 6);
  Matrix Z = testutil::gaussian_matrix(rng, 9, 6);
  Vector got = predict(r, Z);
  for (int i = 0; i < 9; ++i) {
    double expect = r.intercept;
    for (int j = 0; j < 6; ++j) expect += Z(i, j) * r.coefficients(j);
    CHECK(std::abs(got(i) - expect) < 1e-12);
  }
  Matrix bad(2, 5);
  CHECK_THROWS_AS(predict(r, bad), DataError);
}

TEST_CASE("weighted fit counter counts public fits") {
  Rng rng(19);
  Matrix X = testutil::gaussian_matrix(rng, 15, 2);
  Vector y = testutil::gaussian_vector(rng, 15);
  reset_weighted_fit_count();
  weighted_lasso_fit(X, y, Vector::Ones(15), 0.1);
  weighted_lasso_fit(X, y, Vector::Ones(15), 0.2);
  CHECK(weighted_fit_count() == 2);
  FoldPlan folds = make_folds(15, FoldKind::KFold, 5, 0);
  lasso_cv(X, y, folds);  // path fits are not "weighted fits"
  CHECK(weighted_fit_count() == 2);
}
