#include "core/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "core/rng.hpp"

namespace attnsl {

void Dataset::validate() const {
  if (has_response && y.size() != X.rows())
    throw DataError("response length does not match feature rows");
  if (static_cast<int>(feature_names.size()) != p())
    throw DataError("feature_names length does not match p");
  if (static_cast<int>(row_ids.size()) != n())
    throw DataError("row_ids length does not match n");
}

std::vector<int> FoldPlan::fold_rows(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(assignments.size()); ++i)
    if (assignments[i] == fold) out.push_back(i);
  return out;
}

std::vector<int> FoldPlan::rows_not_in(int fold) const {
  std::vector<int> out;
  for (int i = 0; i < static_cast<int>(assignments.size()); ++i)
    if (assignments[i] != fold) out.push_back(i);
  return out;
}

std::string format_double(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  while (b < e && (*b == ' ' || *b == '\t')) ++b;
  while (e > b && (e[-1] == ' ' || e[-1] == '\t')) --e;
  if (b == e) return false;
  auto res = std::from_chars(b, e, out);
  return res.ec == std::errc() && res.ptr == e;
}

}  // namespace

namespace csv {

Table read_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open file: " + path);
  Table t;
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty file: " + path);
  t.header = split_line(line);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (fields.size() != t.header.size())
      throw DataError("row with " + std::to_string(fields.size()) +
                      " fields, expected " + std::to_string(t.header.size()) +
                      " in " + path);
    t.rows.push_back(std::move(fields));
  }
  return t;
}

void write_table(const Table& t, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write file: " + path);
  for (std::size_t j = 0; j < t.header.size(); ++j)
    out << (j ? "," : "") << t.header[j];
  out << "\n";
  for (const auto& row : t.rows) {
    for (std::size_t j = 0; j < row.size(); ++j)
      out << (j ? "," : "") << row[j];
    out << "\n";
  }
}

}  // namespace csv

Dataset load_csv(const std::string& path,
                 const std::optional<std::string>& response_column) {
  csv::Table t = csv::read_table(path);
  std::set<std::string> seen;
  for (const auto& name : t.header)
    if (!seen.insert(name).second)
      throw DataError("duplicate column name: " + name);

  int resp_idx = -1;
  if (response_column) {
    for (std::size_t j = 0; j < t.header.size(); ++j)
      if (t.header[j] == *response_column) resp_idx = static_cast<int>(j);
    if (resp_idx < 0)
      throw DataError("response column not found: " + *response_column);
  }

  int n = static_cast<int>(t.rows.size());
  int p = static_cast<int>(t.header.size()) - (resp_idx >= 0 ? 1 : 0);
  Dataset ds;
  ds.X.resize(n, p);
  ds.has_response = resp_idx >= 0;
  if (ds.has_response) {
    ds.y.resize(n);
    ds.response_name = *response_column;
  }
  for (std::size_t j = 0; j < t.header.size(); ++j)
    if (static_cast<int>(j) != resp_idx) ds.feature_names.push_back(t.header[j]);

  for (int i = 0; i < n; ++i) {
    int fj = 0;
    for (std::size_t j = 0; j < t.header.size(); ++j) {
      double v;
      bool ok = parse_double(t.rows[i][j], v);
      if (static_cast<int>(j) == resp_idx) {
        if (!ok)
          throw DataError("non-numeric response cell at row " +
                          std::to_string(i + 1));
        ds.y(i) = v;
      } else {
        ds.X(i, fj++) = ok ? v : std::numeric_limits<double>::quiet_NaN();
      }
    }
    ds.row_ids.push_back(std::to_string(i));
  }
  ds.validate();
  return ds;
}

void write_csv(const Dataset& ds, const std::string& path) {
  csv::Table t;
  t.header = ds.feature_names;
  if (ds.has_response) t.header.push_back(ds.response_name);
  t.rows.reserve(ds.n());
  for (int i = 0; i < ds.n(); ++i) {
    std::vector<std::string> row;
    row.reserve(t.header.size());
    for (int j = 0; j < ds.p(); ++j) row.push_back(format_double(ds.X(i, j)));
    if (ds.has_response) row.push_back(format_double(ds.y(i)));
    t.rows.push_back(std::move(row));
  }
  csv::write_table(t, path);
}

void impute_train_means(Dataset& train, std::vector<Dataset*> others) {
  int p = train.p();
  Vector means(p);
  for (int j = 0; j < p; ++j) {
    double sum = 0;
    int cnt = 0;
    for (int i = 0; i < train.n(); ++i) {
      double v = train.X(i, j);
      if (!std::isnan(v)) {
        sum += v;
        ++cnt;
      }
    }
    if (cnt == 0)
      throw DataError("feature column entirely missing in train: " +
                      train.feature_names[j]);
    means(j) = sum / cnt;
  }
  auto fill = [&](Dataset& ds) {
    if (ds.p() != p) throw DataError("column count mismatch in imputation");
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < ds.n(); ++i)
        if (std::isnan(ds.X(i, j))) ds.X(i, j) = means(j);
  };
  fill(train);
  for (Dataset* other : others) fill(*other);
}

FoldPlan make_folds(int n, FoldKind kind, int k, std::uint64_t seed) {
  if (k < 2) throw UsageError("fold count must be at least 2");
  if (k > n) throw UsageError("fold count exceeds row count");
  FoldPlan plan;
  plan.kind = kind;
  plan.k = k;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  switch (kind) {
    case FoldKind::KFold: {
      std::vector<int> perm(n);
      for (int i = 0; i < n; ++i) perm[i] = i;
      Rng rng(seed);
      rng.shuffle(perm);
      for (int pos = 0; pos < n; ++pos) plan.assignments[perm[pos]] = pos % k;
      break;
    }
    case FoldKind::ExpandingWindow: {
      // Contiguous in row order; first (n mod k) blocks take the extra row.
      int base = n / k, extra = n % k, row = 0;
      for (int f = 0; f < k; ++f) {
        int size = base + (f < extra ? 1 : 0);
        for (int s = 0; s < size; ++s) plan.assignments[row++] = f;
      }
      break;
    }
    case FoldKind::RandomSplit: {
      FoldPlan sp = make_split(n, 0.5, seed);
      plan.assignments = std::move(sp.assignments);
      plan.k = 2;
      break;
    }
  }
  return plan;
}

std::vector<std::pair<std::vector<int>, std::vector<int>>> cv_splits(
    const FoldPlan& folds) {
  if (folds.kind == FoldKind::RandomSplit)
    throw UsageError("cross-validation requires k-fold or expanding-window");
  std::vector<std::pair<std::vector<int>, std::vector<int>>> out;
  const int n = static_cast<int>(folds.assignments.size());
  if (folds.kind == FoldKind::KFold) {
    for (int f = 0; f < folds.k; ++f)
      out.push_back({folds.rows_not_in(f), folds.fold_rows(f)});
  } else {
    for (int f = 1; f < folds.k; ++f) {
      std::vector<int> train, eval;
      for (int i = 0; i < n; ++i) {
        if (folds.assignments[i] < f) train.push_back(i);
        if (folds.assignments[i] == f) eval.push_back(i);
      }
      out.push_back({std::move(train), std::move(eval)});
    }
  }
  return out;
}

FoldPlan make_split(int n, double test_fraction, std::uint64_t seed) {
  if (n < 2) throw UsageError("need at least 2 rows to split");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw UsageError("test fraction must be in (0,1)");
  int n_test = static_cast<int>(std::lround(n * test_fraction));
  n_test = std::clamp(n_test, 1, n - 1);
  std::vector<int> perm(n);
  for (int i = 0; i < n; ++i) perm[i] = i;
  Rng rng(seed);
  rng.shuffle(perm);
  FoldPlan plan;
  plan.kind = FoldKind::RandomSplit;
  plan.k = 2;
  plan.seed = seed;
  plan.assignments.assign(n, 0);
  for (int t = 0; t < n_test; ++t) plan.assignments[perm[t]] = 1;
  return plan;
}

std::pair<Matrix, StandardizationParams> standardize(const Matrix& X) {
  int n = static_cast<int>(X.rows());
  int p = static_cast<int>(X.cols());
  StandardizationParams params;
  params.means.resize(p);
  params.sds.resize(p);
  Matrix out(n, p);
  for (int j = 0; j < p; ++j) {
    double mean = X.col(j).mean();
    double var = (X.col(j).array() - mean).square().sum() / n;
    double sd = std::sqrt(var);
    if (sd <= 0.0) sd = 1.0;
    params.means(j) = mean;
    params.sds(j) = sd;
    out.col(j) = (X.col(j).array() - mean) / sd;
  }
  return {std::move(out), std::move(params)};
}

Matrix apply_standardization(const StandardizationParams& params,
                             const Matrix& X) {
  if (X.cols() != params.means.size())
    throw DataError("column count mismatch in standardization");
  Matrix out(X.rows(), X.cols());
  for (int j = 0; j < X.cols(); ++j)
    out.col(j) = (X.col(j).array() - params.means(j)) / params.sds(j);
  return out;
}

Dataset subset_rows(const Dataset& ds, const std::vector<int>& rows) {
  Dataset out;
  out.X.resize(rows.size(), ds.p());
  out.feature_names = ds.feature_names;
  out.response_name = ds.response_name;
  out.has_response = ds.has_response;
  if (ds.has_response) out.y.resize(rows.size());
  out.row_ids.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.X.row(i) = ds.X.row(rows[i]);
    if (ds.has_response) out.y(i) = ds.y(rows[i]);
    out.row_ids.push_back(ds.row_ids[rows[i]]);
  }
  return out;
}

Dataset select_columns(const Dataset& ds,
                       const std::vector<std::string>& names) {
  Dataset out;
  out.X.resize(ds.n(), names.size());
  out.y = ds.y;
  out.has_response = ds.has_response;
  out.response_name = ds.response_name;
  out.row_ids = ds.row_ids;
  out.feature_names = names;
  for (std::size_t j = 0; j < names.size(); ++j) {
    auto it = std::find(ds.feature_names.begin(), ds.feature_names.end(),
                        names[j]);
    if (it == ds.feature_names.end())
      throw DataError("unknown column: " + names[j]);
    out.X.col(j) = ds.X.col(it - ds.feature_names.begin());
  }
  return out;
}

void write_folds_csv(const FoldPlan& plan,
                     const std::vector<std::string>& row_ids,
                     const std::string& path) {
  csv::Table t;
  t.header = {"row_id", "fold"};
  for (std::size_t i = 0; i < plan.assignments.size(); ++i)
    t.rows.push_back({row_ids.empty() ? std::to_string(i) : row_ids[i],
                      std::to_string(plan.assignments[i])});
  csv::write_table(t, path);
}

}  // namespace attnsl
