#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <set>

#include "core/dataset.hpp"
#include "core/rng.hpp"
#include "test_util.hpp"

using namespace attnsl;

namespace {

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

}  // namespace

TEST_CASE("load_csv parses header and dimensions") {
  auto path = testutil::temp_path("basic.csv");
  write_file(path, "a,b,y\n1,2,3\n4,5,6\n7,8,9\n");
  Dataset ds = load_csv(path, "y");
  CHECK(ds.n() == 3);
  CHECK(ds.p() == 2);
  CHECK(ds.feature_names == std::vector<std::string>{"a", "b"});
  CHECK(ds.y(2) == 9.0);
  CHECK(ds.X(1, 0) == 4.0);
  CHECK_FALSE(ds.has_missing());
}

TEST_CASE("load_csv flags empty cells as missing") {
  auto path = testutil::temp_path("missing.csv");
  write_file(path, "a,b,y\n1,2,3\n,5,6\n");
  Dataset ds = load_csv(path, "y");
  CHECK(ds.has_missing());
  int missing = 0;
  for (int i = 0; i < ds.n(); ++i)
    for (int j = 0; j < ds.p(); ++j)
      if (std::isnan(ds.X(i, j))) ++missing;
  CHECK(missing == 1);
  CHECK(std::isnan(ds.X(1, 0)));
}

TEST_CASE("load_csv treats non-numeric feature cells as missing") {
  auto path = testutil::temp_path("nonnum.csv");
  write_file(path, "a,y\nfoo,1\n2,3\n");
  Dataset ds = load_csv(path, "y");
  CHECK(std::isnan(ds.X(0, 0)));
  CHECK(ds.X(1, 0) == 2.0);
}

TEST_CASE("load_csv error cases") {
  auto path = testutil::temp_path("err.csv");
  CHECK_THROWS_AS(load_csv("/nonexistent/nope.csv", "y"), DataError);
  write_file(path, "a,b\n1,2\n");
  CHECK_THROWS_AS(load_csv(path, "y"), DataError);
  write_file(path, "a,a,y\n1,2,3\n");
  CHECK_THROWS_AS(load_csv(path, "y"), DataError);
  write_file(path, "a,y\n1,\n");
  CHECK_THROWS_AS(load_csv(path, "y"), DataError);
  write_file(path, "a,y\n1,2,3\n");
  CHECK_THROWS_AS(load_csv(path, "y"), DataError);
}

// Oracle: a random table written by us must load back to exactly the same
// values, and a second write must produce byte-identical files.
TEST_CASE("csv round trip is bit identical") {
  Rng rng(42);
  Matrix X = testutil::gaussian_matrix(rng, 10, 4) * 17.3;
  Vector y = testutil::gaussian_vector(rng, 10);
  Dataset ds = testutil::make_dataset(X, y);
  auto p1 = testutil::temp_path("round1.csv");
  auto p2 = testutil::temp_path("round2.csv");
  write_csv(ds, p1);
  Dataset back = load_csv(p1, "y");
  REQUIRE(back.n() == ds.n());
  REQUIRE(back.p() == ds.p());
  for (int i = 0; i < ds.n(); ++i) {
    CHECK(back.y(i) == ds.y(i));
    for (int j = 0; j < ds.p(); ++j) CHECK(back.X(i, j) == ds.X(i, j));
  }
  write_csv(back, p2);
  std::ifstream f1(p1), f2(p2);
  std::string s1((std::istreambuf_iterator<char>(f1)), {});
  std::string s2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(s1 == s2);
}

TEST_CASE("impute_train_means basic") {
  Matrix X(3, 1);
  X << 1, std::nan(""), 3;
  Dataset ds = testutil::make_dataset(X, Vector::Zero(3));
  impute_train_means(ds);
  CHECK(ds.X(1, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("impute uses train means for test cells") {
  Matrix Xtr(3, 1), Xte(2, 1);
  Xtr << 1, 3, std::nan("");
  Xte << std::nan(""), 100;
  Dataset tr = testutil::make_dataset(Xtr, Vector::Zero(3));
  Dataset te = testutil::make_dataset(Xte, Vector::Zero(2));
  impute_train_means(tr, {&te});
  CHECK(te.X(0, 0) == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(te.X(1, 0) == 100.0);
  CHECK(tr.X(2, 0) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("impute leaves complete data unchanged and is idempotent") {
  Rng rng(7);
  Matrix X = testutil::gaussian_matrix(rng, 6, 3);
  X(2, 1) = std::nan("");
  Dataset ds = testutil::make_dataset(X, Vector::Zero(6));
  impute_train_means(ds);
  Matrix once = ds.X;
  impute_train_means(ds);
  CHECK((ds.X - once).cwiseAbs().maxCoeff() == 0.0);

  Matrix full = testutil::gaussian_matrix(rng, 4, 2);
  Dataset fds = testutil::make_dataset(full, Vector::Zero(4));
  impute_train_means(fds);
  CHECK((fds.X - full).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("impute rejects an entirely missing train column") {
  Matrix X(2, 1);
  X << std::nan(""), std::nan("");
  Dataset ds = testutil::make_dataset(X, Vector::Zero(2));
  CHECK_THROWS_AS(impute_train_means(ds), DataError);
}

TEST_CASE("k-fold sizes and partition") {
  FoldPlan plan = make_folds(10, FoldKind::KFold, 5, 3);
  std::vector<int> counts(5, 0);
  for (int a : plan.assignments) counts[a]++;
  for (int c : counts) CHECK(c == 2);

  FoldPlan p2 = make_folds(11, FoldKind::KFold, 3, 3);
  std::vector<int> c2(3, 0);
  for (int a : p2.assignments) c2[a]++;
  int mx = *std::max_element(c2.begin(), c2.end());
  int mn = *std::min_element(c2.begin(), c2.end());
  CHECK(mx - mn <= 1);
  CHECK(c2[0] + c2[1] + c2[2] == 11);
}

TEST_CASE("expanding window folds are contiguous and nested") {
  FoldPlan plan = make_folds(10, FoldKind::ExpandingWindow, 5, 0);
  // Fold 2 (0-based) trains on rows of folds 0-1 only.
  std::vector<int> train;
  for (int i = 0; i < 10; ++i)
    if (plan.assignments[i] < 2) train.push_back(i);
  CHECK(train == std::vector<int>{0, 1, 2, 3});
  for (int i = 1; i < 10; ++i)
    CHECK(plan.assignments[i] >= plan.assignments[i - 1]);
}

TEST_CASE("fold determinism and error cases") {
  FoldPlan a = make_folds(20, FoldKind::KFold, 4, 99);
  FoldPlan b = make_folds(20, FoldKind::KFold, 4, 99);
  CHECK(a.assignments == b.assignments);
  FoldPlan c = make_folds(20, FoldKind::KFold, 4, 100);
  CHECK(a.assignments != c.assignments);
  CHECK_THROWS_AS(make_folds(3, FoldKind::KFold, 5, 0), UsageError);
  CHECK_THROWS_AS(make_folds(3, FoldKind::KFold, 1, 0), UsageError);
}

TEST_CASE("make_split respects fraction") {
  FoldPlan plan = make_split(100, 0.25, 5);
  int test = 0;
  for (int a : plan.assignments) test += a;
  CHECK(test == 25);
}

TEST_CASE("standardize two-point example") {
  Matrix X(2, 1);
  X << 0, 2;
  auto [Xs, params] = standardize(X);
  CHECK(params.means(0) == 1.0);
  CHECK(params.sds(0) == 1.0);  // denominator n: sqrt(((0-1)^2+(2-1)^2)/2)
  CHECK(Xs(0, 0) == -1.0);
  CHECK(Xs(1, 0) == 1.0);
}

TEST_CASE("standardize constant column") {
  Matrix X(3, 1);
  X << 5, 5, 5;
  auto [Xs, params] = standardize(X);
  CHECK(params.sds(0) == 1.0);
  CHECK(Xs.cwiseAbs().maxCoeff() == 0.0);
}

// Oracle: invert the transform manually and compare with the input.
TEST_CASE("standardize inverse recovers input") {
  Rng rng(11);
  Matrix X = testutil::gaussian_matrix(rng, 20, 4) * 3.5;
  X.array() += 2.0;
  auto [Xs, params] = standardize(X);
  for (int j = 0; j < 4; ++j) {
    CHECK(std::abs(Xs.col(j).mean()) < 1e-12);
    double sd = std::sqrt(Xs.col(j).squaredNorm() / 20.0);
    CHECK(std::abs(sd - 1.0) < 1e-10);
    for (int i = 0; i < 20; ++i) {
      double inv = Xs(i, j) * params.sds(j) + params.means(j);
      CHECK(std::abs(inv - X(i, j)) < 1e-12);
    }
  }
  Matrix Xs2 = apply_standardization(params, X);
  CHECK((Xs2 - Xs).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("fold plan csv export") {
  FoldPlan plan = make_folds(4, FoldKind::KFold, 2, 1);
  auto path = testutil::temp_path("folds.csv");
  write_folds_csv(plan, {"a", "b", "c", "d"}, path);
  csv::Table t = csv::read_table(path);
  CHECK(t.header == std::vector<std::string>{"row_id", "fold"});
  CHECK(t.rows.size() == 4);
  CHECK(t.rows[0][0] == "a");
}

TEST_CASE("subset and column selection") {
  Rng rng(3);
  Dataset ds = testutil::make_dataset(testutil::gaussian_matrix(rng, 5, 3),
                                      testutil::gaussian_vector(rng, 5));
  Dataset sub = subset_rows(ds, {4, 0});
  CHECK(sub.n() == 2);
  CHECK(sub.X(0, 1) == ds.X(4, 1));
  CHECK(sub.y(1) == ds.y(0));
  CHECK(sub.row_ids[0] == "4");
  Dataset cols = select_columns(ds, {"x3", "x1"});
  CHECK(cols.X(2, 0) == ds.X(2, 2));
  CHECK(cols.X(2, 1) == ds.X(2, 0));
  CHECK_THROWS_AS(select_columns(ds, {"nope"}), DataError);
}
