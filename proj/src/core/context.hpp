#pragma once

#include <string>
#include <utility>
#include <vector>

#include "core/dataset.hpp"

namespace attnsl {

struct LagSpec {
  int max_lag = 0;
  bool include_response_lags = true;
  // Lags fed to the proximity model; regression still sees the originals.
  int similarity_lag = 0;
};

enum class NeighborAggregation { Raw, MeanSd };

struct NeighborSpec {
  int neighborhood = 8;  // 3x3 adjacency is the only supported shape
  NeighborAggregation aggregation = NeighborAggregation::MeanSd;
  int grid_rows = 0;
  int grid_cols = 0;
};

// Appends var_lag1..var_lagL per column (and response lags when flagged),
// dropping the first max_lag rows. Returns the transformed data and the
// dropped-row count.
std::pair<Dataset, int> lag_features(const Dataset& data, const LagSpec& spec);

// Column names in the lagged output that define similarity: the original
// features plus lags up to similarity_lag.
std::vector<std::string> similarity_feature_names(const Dataset& original,
                                                  const LagSpec& spec);

// Requires feature columns image_id, row, col; appends neighbor aggregates
// for the remaining features. Neighbors never cross image_id.
Dataset neighbor_features(const Dataset& pixels, const NeighborSpec& spec);

}  // namespace attnsl
