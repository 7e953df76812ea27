#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include "core/errors.hpp"

namespace attnsl {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Missing cells are NaN until imputation; everything downstream of
// impute_train_means requires fully numeric features.
struct Dataset {
  Matrix X;  // n x p
  Vector y;  // empty when the file had no response column requested
  std::vector<std::string> feature_names;
  std::string response_name = "y";
  std::vector<std::string> row_ids;
  bool has_response = false;

  int n() const { return static_cast<int>(X.rows()); }
  int p() const { return static_cast<int>(X.cols()); }
  bool has_missing() const { return X.hasNaN(); }
  void validate() const;
};

struct StandardizationParams {
  Vector means;
  Vector sds;  // constant columns recorded as 1
};

enum class FoldKind { RandomSplit, KFold, ExpandingWindow };

struct FoldPlan {
  FoldKind kind = FoldKind::KFold;
  int k = 0;
  std::uint64_t seed = 0;
  std::vector<int> assignments;  // fold id per row; RandomSplit: 0=train, 1=test

  std::vector<int> fold_rows(int fold) const;
  std::vector<int> rows_not_in(int fold) const;
};

Dataset load_csv(const std::string& path,
                 const std::optional<std::string>& response_column);
void write_csv(const Dataset& ds, const std::string& path);

// Fills missing cells in `train` and every dataset in `others` with the
// train-column means. Mutates in place.
void impute_train_means(Dataset& train, std::vector<Dataset*> others = {});

FoldPlan make_folds(int n, FoldKind kind, int k, std::uint64_t seed);
// Random split with an explicit test fraction (assignments 0=train, 1=test).
FoldPlan make_split(int n, double test_fraction, std::uint64_t seed);

// (train rows, eval rows) pairs for cross-validation. k-fold: each fold held
// out once. Expanding-window: folds 1..k-1 evaluated against all earlier
// folds. RandomSplit plans are rejected.
std::vector<std::pair<std::vector<int>, std::vector<int>>> cv_splits(
    const FoldPlan& folds);

std::pair<Matrix, StandardizationParams> standardize(const Matrix& X);
Matrix apply_standardization(const StandardizationParams& params,
                             const Matrix& X);

Dataset subset_rows(const Dataset& ds, const std::vector<int>& rows);
Dataset select_columns(const Dataset& ds,
                       const std::vector<std::string>& names);

void write_folds_csv(const FoldPlan& plan,
                     const std::vector<std::string>& row_ids,
                     const std::string& path);

// Shortest round-trip decimal rendering, used for every CSV/report number so
// outputs are byte-identical across runs.
std::string format_double(double v);

namespace csv {
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
Table read_table(const std::string& path);
void write_table(const Table& t, const std::string& path);
}  // namespace csv

}  // namespace attnsl
