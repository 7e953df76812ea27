#pragma once

#include <string>
#include <vector>

#include "core/dataset.hpp"
#include "core/pipeline.hpp"

namespace attnsl {

// Blended per-point lasso coefficients, intercept first.
struct CoefficientMatrix {
  Matrix values;  // n_test x (1 + p)
  std::vector<std::string> names;
};

CoefficientMatrix blended_coefficients(const PipelineResult& result);

// One agglomeration step. Cluster ids: 0..n-1 are leaves, n+t is the
// cluster created by merge t.
struct Merge {
  int left = -1;
  int right = -1;
  double height = 0.0;  // minimax radius of the merged cluster
  int prototype = -1;   // point index
};

struct Dendrogram {
  int n = 0;
  std::vector<Merge> merges;  // n-1 entries in merge order
  std::vector<int> leaf_order;
  // Minimax linkage does not guarantee non-decreasing heights; inversions
  // are recorded as-is and flagged here.
  bool monotone = true;
};

enum class Distance { Euclidean };

Dendrogram protoclust(const Matrix& points,
                      Distance distance = Distance::Euclidean);

struct ClusterAssignment {
  int k = 0;
  std::vector<int> labels;      // one per point, 0..k-1
  std::vector<int> prototypes;  // one point index per cluster
};

// Applies the first n-k merges. Clusters are numbered by their smallest
// member index.
ClusterAssignment cut_clusters(const Dendrogram& dendrogram, int k);

struct ClusterSummary {
  int cluster = 0;
  int size = 0;
  int prototype = 0;  // point index into the test set
  Vector mean_coefficients;
  double pse_base = 0.0;
  double pse_blend = 0.0;
};

// Per-cluster means of the clustered vectors (blended coefficients for
// lasso pipelines, normalized importances for boosted ones) plus
// within-cluster PSE for the baseline and blended predictions.
std::vector<ClusterSummary> cluster_summary(const ClusterAssignment& assignment,
                                            const PipelineResult& result,
                                            const Vector& y_test);

// Per-point share of ensemble split gain by feature; rows sum to 1.
Matrix cluster_importances(const PipelineResult& result);

void write_heatmap_csv(const std::string& path, const Dendrogram& dendrogram,
                       const ClusterAssignment& assignment,
                       const CoefficientMatrix& coefficients,
                       const std::vector<std::string>& row_ids);

void write_dendrogram_json(const std::string& path,
                           const Dendrogram& dendrogram);

void write_summary_csv(const std::string& path,
                       const std::vector<ClusterSummary>& summaries,
                       const std::vector<std::string>& coefficient_names,
                       const std::vector<std::string>& row_ids);

}  // namespace attnsl
