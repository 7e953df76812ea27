#include "core/interpret.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <utility>

#include "json.hpp"

namespace attnsl {

CoefficientMatrix blended_coefficients(const PipelineResult& result) {
  if (result.blended_coefficients.rows() == 0)
    throw UsageError(
        "result has no blended coefficients; boosted pipelines expose "
        "cluster_importances instead");
  if (!result.blended_coefficients.allFinite())
    throw NumericError("blended coefficients are not finite");
  CoefficientMatrix out;
  out.values = result.blended_coefficients;
  out.names = result.coefficient_names;
  return out;
}

namespace {

struct ActiveCluster {
  int id;
  std::vector<int> members;  // sorted point indices
};

// Minimax radius and its prototype; ties go to the lowest point index.
std::pair<double, int> minimax_prototype(const Matrix& D,
                                         const std::vector<int>& members) {
  double best = std::numeric_limits<double>::infinity();
  int proto = -1;
  for (int c : members) {
    double radius = 0.0;
    for (int x : members) radius = std::max(radius, D(c, x));
    if (radius < best) {
      best = radius;
      proto = c;
    }
  }
  return {best, proto};
}

}  // namespace

Dendrogram protoclust(const Matrix& points, Distance) {
  const int n = static_cast<int>(points.rows());
  if (n < 2) throw UsageError("protoclust needs at least two points");
  if (!points.allFinite())
    throw DataError("protoclust input has non-finite values");

  Matrix D(n, n);
  for (int i = 0; i < n; ++i) {
    D(i, i) = 0.0;
    for (int j = i + 1; j < n; ++j) {
      double d = (points.row(i) - points.row(j)).norm();
      D(i, j) = d;
      D(j, i) = d;
    }
  }

  std::vector<ActiveCluster> active(n);
  for (int i = 0; i < n; ++i) active[i] = {i, {i}};

  Dendrogram out;
  out.n = n;
  out.merges.reserve(n - 1);

  std::vector<int> candidate;
  std::vector<int> winner;
  for (int step = 0; step < n - 1; ++step) {
    double best_d = std::numeric_limits<double>::infinity();
    std::size_t bi = 0, bj = 0;
    int best_proto = -1, best_lo = -1, best_hi = -1;
    for (std::size_t i = 0; i < active.size(); ++i) {
      for (std::size_t j = i + 1; j < active.size(); ++j) {
        candidate.clear();
        std::merge(active[i].members.begin(), active[i].members.end(),
                   active[j].members.begin(), active[j].members.end(),
                   std::back_inserter(candidate));
        auto [d, proto] = minimax_prototype(D, candidate);
        int lo = std::min(active[i].members.front(), active[j].members.front());
        int hi = std::max(active[i].members.front(), active[j].members.front());
        bool better =
            d < best_d ||
            (d == best_d &&
             (lo < best_lo || (lo == best_lo && hi < best_hi)));
        if (better) {
          best_d = d;
          bi = i;
          bj = j;
          best_proto = proto;
          best_lo = lo;
          best_hi = hi;
          winner = candidate;
        }
      }
    }

    // Left child is the cluster with the smaller smallest member.
    ActiveCluster& a = active[bi];
    ActiveCluster& b = active[bj];
    bool a_first = a.members.front() < b.members.front();
    Merge m;
    m.left = a_first ? a.id : b.id;
    m.right = a_first ? b.id : a.id;
    m.height = best_d;
    m.prototype = best_proto;
    out.merges.push_back(m);

    a.id = n + step;
    a.members = winner;
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
  }

  for (std::size_t t = 1; t < out.merges.size(); ++t)
    if (out.merges[t].height < out.merges[t - 1].height) out.monotone = false;

  std::vector<int> stack{n + (n - 2)};
  while (!stack.empty()) {
    int id = stack.back();
    stack.pop_back();
    if (id < n) {
      out.leaf_order.push_back(id);
      continue;
    }
    const Merge& m = out.merges[id - n];
    stack.push_back(m.right);
    stack.push_back(m.left);
  }
  return out;
}

ClusterAssignment cut_clusters(const Dendrogram& dendrogram, int k) {
  const int n = dendrogram.n;
  if (n < 1 || static_cast<int>(dendrogram.merges.size()) != n - 1)
    throw UsageError("malformed dendrogram");
  if (k < 1 || k > n)
    throw UsageError("cluster count must be between 1 and the point count");

  std::vector<std::vector<int>> members(static_cast<std::size_t>(2 * n - 1));
  std::vector<char> alive(members.size(), 0);
  for (int i = 0; i < n; ++i) {
    members[i] = {i};
    alive[i] = 1;
  }
  for (int t = 0; t < n - k; ++t) {
    const Merge& m = dendrogram.merges[t];
    if (m.left < 0 || m.right < 0 || m.left == m.right ||
        m.left >= static_cast<int>(members.size()) ||
        m.right >= static_cast<int>(members.size()) || !alive[m.left] ||
        !alive[m.right])
      throw UsageError("malformed dendrogram");
    std::merge(members[m.left].begin(), members[m.left].end(),
               members[m.right].begin(), members[m.right].end(),
               std::back_inserter(members[n + t]));
    alive[m.left] = 0;
    alive[m.right] = 0;
    alive[n + t] = 1;
  }

  std::vector<int> roots;
  for (std::size_t id = 0; id < members.size(); ++id)
    if (alive[id]) roots.push_back(static_cast<int>(id));
  std::sort(roots.begin(), roots.end(), [&](int a, int b) {
    return members[a].front() < members[b].front();
  });

  ClusterAssignment out;
  out.k = k;
  out.labels.assign(n, -1);
  out.prototypes.reserve(roots.size());
  for (std::size_t c = 0; c < roots.size(); ++c) {
    int id = roots[c];
    out.prototypes.push_back(id < n ? id : dendrogram.merges[id - n].prototype);
    for (int point : members[id]) out.labels[point] = static_cast<int>(c);
  }
  return out;
}

Matrix cluster_importances(const PipelineResult& result) {
  if (result.point_importances.rows() == 0)
    throw UsageError(
        "result has no per-point ensembles; run the boosted pipeline without "
        "approximation");
  if (!result.point_importances.allFinite() ||
      (result.point_importances.array() < 0.0).any())
    throw NumericError("split gains must be finite and non-negative");
  Matrix out = result.point_importances;
  for (int i = 0; i < out.rows(); ++i) {
    double total = out.row(i).sum();
    if (total > 0.0)
      out.row(i) /= total;
    else
      out.row(i).setConstant(1.0 / out.cols());  // ensemble made no splits
  }
  return out;
}

std::vector<ClusterSummary> cluster_summary(const ClusterAssignment& assignment,
                                            const PipelineResult& result,
                                            const Vector& y_test) {
  const int n = static_cast<int>(assignment.labels.size());
  if (assignment.k < 1 ||
      static_cast<int>(assignment.prototypes.size()) != assignment.k)
    throw UsageError("malformed cluster assignment");
  if (result.y_base.size() != n || result.y_blend.size() != n ||
      y_test.size() != n)
    throw DataError("assignment, predictions, and y_test sizes disagree");

  Matrix vectors = result.blended_coefficients.rows() > 0
                       ? result.blended_coefficients
                       : cluster_importances(result);
  if (vectors.rows() != n)
    throw DataError("coefficient rows do not match the assignment");

  std::vector<ClusterSummary> out(static_cast<std::size_t>(assignment.k));
  for (int c = 0; c < assignment.k; ++c) {
    out[c].cluster = c;
    out[c].prototype = assignment.prototypes[c];
    out[c].mean_coefficients = Vector::Zero(vectors.cols());
  }
  std::vector<double> sse_base(assignment.k, 0.0), sse_blend(assignment.k, 0.0);
  for (int i = 0; i < n; ++i) {
    int c = assignment.labels[i];
    if (c < 0 || c >= assignment.k)
      throw UsageError("cluster label out of range");
    out[c].size += 1;
    out[c].mean_coefficients += vectors.row(i).transpose();
    double eb = y_test(i) - result.y_base(i);
    double ea = y_test(i) - result.y_blend(i);
    sse_base[c] += eb * eb;
    sse_blend[c] += ea * ea;
  }
  for (int c = 0; c < assignment.k; ++c) {
    if (out[c].size == 0) throw UsageError("empty cluster in assignment");
    out[c].mean_coefficients /= out[c].size;
    out[c].pse_base = sse_base[c] / out[c].size;
    out[c].pse_blend = sse_blend[c] / out[c].size;
  }
  return out;
}

void write_heatmap_csv(const std::string& path, const Dendrogram& dendrogram,
                       const ClusterAssignment& assignment,
                       const CoefficientMatrix& coefficients,
                       const std::vector<std::string>& row_ids) {
  const int n = dendrogram.n;
  if (static_cast<int>(assignment.labels.size()) != n ||
      coefficients.values.rows() != n ||
      static_cast<int>(row_ids.size()) != n)
    throw DataError("heatmap inputs disagree on the point count");
  if (static_cast<int>(coefficients.names.size()) != coefficients.values.cols())
    throw DataError("coefficient names do not match the matrix");
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "cluster,row_id,feature,value\n";
  for (int idx : dendrogram.leaf_order) {
    if (idx < 0 || idx >= n) throw UsageError("malformed dendrogram");
    for (int j = 0; j < coefficients.values.cols(); ++j)
      out << assignment.labels[idx] + 1 << ',' << row_ids[idx] << ','
          << coefficients.names[j] << ','
          << format_double(coefficients.values(idx, j)) << '\n';
  }
}

void write_dendrogram_json(const std::string& path,
                           const Dendrogram& dendrogram) {
  nlohmann::ordered_json doc;
  doc["n"] = dendrogram.n;
  doc["monotone"] = dendrogram.monotone;
  doc["leaf_order"] = dendrogram.leaf_order;
  doc["merges"] = nlohmann::ordered_json::array();
  for (const Merge& m : dendrogram.merges) {
    nlohmann::ordered_json rec;
    rec["left"] = m.left;
    rec["right"] = m.right;
    rec["height"] = m.height;
    rec["prototype"] = m.prototype;
    doc["merges"].push_back(std::move(rec));
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void write_summary_csv(const std::string& path,
                       const std::vector<ClusterSummary>& summaries,
                       const std::vector<std::string>& coefficient_names,
                       const std::vector<std::string>& row_ids) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << "cluster,size,prototype,pse_base,pse_blend";
  for (const std::string& nm : coefficient_names) out << ",mean_" << nm;
  out << '\n';
  for (const ClusterSummary& s : summaries) {
    if (s.prototype < 0 || s.prototype >= static_cast<int>(row_ids.size()))
      throw DataError("prototype index outside the row id list");
    if (s.mean_coefficients.size() !=
        static_cast<int>(coefficient_names.size()))
      throw DataError("coefficient names do not match the summary");
    out << s.cluster + 1 << ',' << s.size << ',' << row_ids[s.prototype] << ','
        << format_double(s.pse_base) << ',' << format_double(s.pse_blend);
    for (int j = 0; j < s.mean_coefficients.size(); ++j)
      out << ',' << format_double(s.mean_coefficients(j));
    out << '\n';
  }
}

}  // namespace attnsl
