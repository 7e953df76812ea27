#include "core/context.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>

#include "core/errors.hpp"

namespace attnsl {

namespace {

void check_lag_spec(const Dataset& data, const LagSpec& spec) {
  if (spec.max_lag < 0) throw UsageError("max_lag must be nonnegative");
  if (spec.similarity_lag < 0 || spec.similarity_lag > spec.max_lag)
    throw UsageError("similarity_lag must lie in [0, max_lag]");
  if (spec.max_lag >= data.n())
    throw DataError("max_lag must be smaller than the number of rows");
  if (spec.max_lag > 0 && spec.include_response_lags && !data.has_response)
    throw DataError("response lags requested but data has no response");
}

long long integral_coord(double v, const char* what) {
  double r = std::round(v);
  if (!(std::abs(v - r) < 1e-9))
    throw DataError(std::string(what) + " coordinates must be integers");
  return static_cast<long long>(r);
}

}  // namespace

std::pair<Dataset, int> lag_features(const Dataset& data, const LagSpec& spec) {
  check_lag_spec(data, spec);
  const int L = spec.max_lag;
  if (L == 0) return {data, 0};
  const int n = data.n();
  const int p = data.p();
  const bool resp = spec.include_response_lags && data.has_response;
  const int p_out = p + p * L + (resp ? L : 0);
  const int n_out = n - L;

  Dataset out;
  out.has_response = data.has_response;
  out.response_name = data.response_name;
  out.feature_names = data.feature_names;
  for (int v = 0; v < p; ++v)
    for (int k = 1; k <= L; ++k)
      out.feature_names.push_back(data.feature_names[v] + "_lag" +
                                  std::to_string(k));
  if (resp)
    for (int k = 1; k <= L; ++k)
      out.feature_names.push_back(data.response_name + "_lag" +
                                  std::to_string(k));

  out.X.resize(n_out, p_out);
  if (data.has_response) out.y.resize(n_out);
  for (int i = 0; i < n_out; ++i) {
    int t = i + L;
    for (int v = 0; v < p; ++v) {
      out.X(i, v) = data.X(t, v);
      for (int k = 1; k <= L; ++k) out.X(i, p + v * L + (k - 1)) = data.X(t - k, v);
    }
    if (resp)
      for (int k = 1; k <= L; ++k) out.X(i, p + p * L + (k - 1)) = data.y(t - k);
    if (data.has_response) out.y(i) = data.y(t);
    if (!data.row_ids.empty()) out.row_ids.push_back(data.row_ids[t]);
  }
  return {out, L};
}

std::vector<std::string> similarity_feature_names(const Dataset& original,
                                                  const LagSpec& spec) {
  if (spec.similarity_lag < 0 || spec.similarity_lag > spec.max_lag)
    throw UsageError("similarity_lag must lie in [0, max_lag]");
  std::vector<std::string> names = original.feature_names;
  for (const std::string& v : original.feature_names)
    for (int k = 1; k <= spec.similarity_lag; ++k)
      names.push_back(v + "_lag" + std::to_string(k));
  if (spec.include_response_lags && original.has_response)
    for (int k = 1; k <= spec.similarity_lag; ++k)
      names.push_back(original.response_name + "_lag" + std::to_string(k));
  return names;
}

Dataset neighbor_features(const Dataset& pixels, const NeighborSpec& spec) {
  if (spec.neighborhood != 8)
    throw UsageError("only the 8-neighbor (3x3) adjacency is supported");
  if (spec.grid_rows < 1 || spec.grid_cols < 1)
    throw UsageError("grid shape must be positive");

  auto find_col = [&](const std::string& name) {
    auto it = std::find(pixels.feature_names.begin(),
                        pixels.feature_names.end(), name);
    if (it == pixels.feature_names.end())
      throw DataError("pixel data needs a '" + name + "' column");
    return static_cast<int>(it - pixels.feature_names.begin());
  };
  const int c_img = find_col("image_id");
  const int c_row = find_col("row");
  const int c_col = find_col("col");

  std::vector<int> value_cols;
  for (int j = 0; j < pixels.p(); ++j)
    if (j != c_img && j != c_row && j != c_col) value_cols.push_back(j);

  const int n = pixels.n();
  std::map<std::tuple<long long, long long, long long>, int> index;
  std::vector<std::tuple<long long, long long, long long>> coords(n);
  for (int i = 0; i < n; ++i) {
    long long img = integral_coord(pixels.X(i, c_img), "image_id");
    long long r = integral_coord(pixels.X(i, c_row), "row");
    long long c = integral_coord(pixels.X(i, c_col), "col");
    if (r < 0 || r >= spec.grid_rows || c < 0 || c >= spec.grid_cols)
      throw DataError("pixel coordinates outside the grid");
    coords[i] = {img, r, c};
    if (!index.emplace(coords[i], i).second)
      throw DataError("duplicate pixel coordinate");
  }

  static constexpr int kOffsets[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                                         {0, 1},   {1, -1}, {1, 0},  {1, 1}};
  static constexpr const char* kNames[8] = {"nw", "n",  "ne", "w",
                                            "e",  "sw", "s",  "se"};

  Dataset out = pixels;
  const int nv = static_cast<int>(value_cols.size());
  const int p_extra =
      spec.aggregation == NeighborAggregation::Raw ? 8 * nv : 2 * nv;
  const int base = pixels.p();
  out.X.conservativeResize(n, base + p_extra);

  if (spec.aggregation == NeighborAggregation::Raw) {
    for (int d = 0; d < 8; ++d)
      for (int j : value_cols)
        out.feature_names.push_back(pixels.feature_names[j] + "_" + kNames[d]);
    for (int i = 0; i < n; ++i) {
      auto [img, r, c] = coords[i];
      for (int d = 0; d < 8; ++d) {
        auto it = index.find({img, r + kOffsets[d][0], c + kOffsets[d][1]});
        // Missing neighbor falls back to the pixel's own value.
        int src = it == index.end() ? i : it->second;
        for (int v = 0; v < nv; ++v)
          out.X(i, base + d * nv + v) = pixels.X(src, value_cols[v]);
      }
    }
  } else {
    for (int j : value_cols) {
      out.feature_names.push_back(pixels.feature_names[j] + "_nbr_mean");
      out.feature_names.push_back(pixels.feature_names[j] + "_nbr_sd");
    }
    for (int i = 0; i < n; ++i) {
      auto [img, r, c] = coords[i];
      std::vector<int> nbrs;
      for (auto& off : kOffsets) {
        auto it = index.find({img, r + off[0], c + off[1]});
        if (it != index.end()) nbrs.push_back(it->second);
      }
      for (int v = 0; v < nv; ++v) {
        double mean, sd = 0.0;
        if (nbrs.empty()) {
          mean = pixels.X(i, value_cols[v]);
        } else {
          mean = 0.0;
          for (int nb : nbrs) mean += pixels.X(nb, value_cols[v]);
          mean /= nbrs.size();
          for (int nb : nbrs) {
            double d = pixels.X(nb, value_cols[v]) - mean;
            sd += d * d;
          }
          sd = std::sqrt(sd / nbrs.size());
        }
        out.X(i, base + 2 * v) = mean;
        out.X(i, base + 2 * v + 1) = sd;
      }
    }
  }
  return out;
}

}  // namespace attnsl
