#include "core/model_io.hpp"

#include <fstream>
#include <set>

#include "json.hpp"

namespace attnsl {

namespace {

using nlohmann::ordered_json;

ordered_json parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  ordered_json doc;
  try {
    doc = ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(path + ": " + e.what());
  }
  if (!doc.is_object()) throw DataError(path + ": expected a JSON object");
  return doc;
}

void write_file(const std::string& path, const ordered_json& doc) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

void require_keys(const ordered_json& doc, const std::set<std::string>& keys,
                  const std::string& path) {
  for (const std::string& k : keys)
    if (!doc.contains(k)) throw DataError(path + ": missing key " + k);
  for (const auto& item : doc.items())
    if (!keys.count(item.key()))
      throw DataError(path + ": unknown key " + item.key());
}

Vector to_vector(const ordered_json& arr) {
  Vector v(arr.size());
  for (std::size_t i = 0; i < arr.size(); ++i) v(i) = arr[i].get<double>();
  return v;
}

ordered_json from_vector(const Vector& v) {
  ordered_json arr = ordered_json::array();
  for (int i = 0; i < v.size(); ++i) arr.push_back(v(i));
  return arr;
}

}  // namespace

void save_model_json(const std::string& path, const LinearModel& model) {
  ordered_json doc;
  doc["kind"] = model.kind;
  doc["lambda"] = model.lambda;
  doc["intercept"] = model.intercept;
  doc["coefficients"] = from_vector(model.coefficients);
  doc["feature_names"] = model.feature_names;
  write_file(path, doc);
}

LinearModel load_linear_model(const std::string& path) {
  ordered_json doc = parse_file(path);
  require_keys(doc, {"kind", "lambda", "intercept", "coefficients",
                     "feature_names"},
               path);
  LinearModel model;
  model.kind = doc["kind"].get<std::string>();
  if (model.kind != "lasso" && model.kind != "ridge")
    throw DataError(path + ": not a linear model (kind " + model.kind + ")");
  model.lambda = doc["lambda"].get<double>();
  model.intercept = doc["intercept"].get<double>();
  model.coefficients = to_vector(doc["coefficients"]);
  model.feature_names = doc["feature_names"].get<std::vector<std::string>>();
  if (static_cast<int>(model.feature_names.size()) !=
      model.coefficients.size())
    throw DataError(path + ": coefficient and name counts differ");
  return model;
}

void save_model_json(const std::string& path, const TreeEnsemble& ensemble) {
  ordered_json doc;
  doc["kind"] = ensemble.kind;
  doc["learning_rate"] = ensemble.learning_rate;
  doc["init_value"] = ensemble.init_value;
  doc["seed"] = ensemble.seed;
  doc["p"] = ensemble.p;
  doc["feature_names"] = ensemble.feature_names;
  doc["feature_gain"] = from_vector(ensemble.feature_gain);
  ordered_json trees = ordered_json::array();
  for (const RegressionTree& tree : ensemble.trees) {
    ordered_json nodes = ordered_json::array();
    for (const TreeNode& nd : tree.nodes) {
      ordered_json rec;
      rec["feature"] = nd.feature;
      rec["threshold"] = nd.threshold;
      rec["left"] = nd.left;
      rec["right"] = nd.right;
      rec["value"] = nd.value;
      rec["rows_begin"] = nd.rows_begin;
      rec["rows_end"] = nd.rows_end;
      nodes.push_back(std::move(rec));
    }
    ordered_json t;
    t["nodes"] = std::move(nodes);
    t["leaf_rows"] = tree.leaf_rows;
    t["leaf_values"] = tree.leaf_values;
    trees.push_back(std::move(t));
  }
  doc["trees"] = std::move(trees);
  write_file(path, doc);
}

TreeEnsemble load_ensemble(const std::string& path) {
  ordered_json doc = parse_file(path);
  require_keys(doc,
               {"kind", "learning_rate", "init_value", "seed", "p",
                "feature_names", "feature_gain", "trees"},
               path);
  TreeEnsemble ens;
  ens.kind = doc["kind"].get<std::string>();
  if (ens.kind != "forest" && ens.kind != "boosted")
    throw DataError(path + ": not a tree ensemble (kind " + ens.kind + ")");
  ens.learning_rate = doc["learning_rate"].get<double>();
  ens.init_value = doc["init_value"].get<double>();
  ens.seed = doc["seed"].get<std::uint64_t>();
  ens.p = doc["p"].get<int>();
  if (ens.p < 1) throw DataError(path + ": feature count must be positive");
  ens.feature_names = doc["feature_names"].get<std::vector<std::string>>();
  ens.feature_gain = to_vector(doc["feature_gain"]);
  for (const ordered_json& t : doc["trees"]) {
    require_keys(t, {"nodes", "leaf_rows", "leaf_values"}, path);
    RegressionTree tree;
    tree.leaf_rows = t["leaf_rows"].get<std::vector<int>>();
    tree.leaf_values = t["leaf_values"].get<std::vector<double>>();
    if (tree.leaf_rows.size() != tree.leaf_values.size())
      throw DataError(path + ": leaf row and value counts differ");
    const int n_nodes = static_cast<int>(t["nodes"].size());
    const int n_leaf = static_cast<int>(tree.leaf_rows.size());
    for (const ordered_json& rec : t["nodes"]) {
      require_keys(rec,
                   {"feature", "threshold", "left", "right", "value",
                    "rows_begin", "rows_end"},
                   path);
      TreeNode nd;
      nd.feature = rec["feature"].get<int>();
      nd.threshold = rec["threshold"].get<double>();
      nd.left = rec["left"].get<int>();
      nd.right = rec["right"].get<int>();
      nd.value = rec["value"].get<double>();
      nd.rows_begin = rec["rows_begin"].get<int>();
      nd.rows_end = rec["rows_end"].get<int>();
      if (nd.feature >= ens.p)
        throw DataError(path + ": split feature outside feature count");
      if (nd.feature >= 0 &&
          (nd.left < 0 || nd.left >= n_nodes || nd.right < 0 ||
           nd.right >= n_nodes))
        throw DataError(path + ": child index outside node array");
      if (nd.feature < 0 &&
          (nd.rows_begin < 0 || nd.rows_end < nd.rows_begin ||
           nd.rows_end > n_leaf))
        throw DataError(path + ": leaf range outside leaf arrays");
      tree.nodes.push_back(nd);
    }
    if (tree.nodes.empty()) throw DataError(path + ": tree with no nodes");
    ens.trees.push_back(std::move(tree));
  }
  if (ens.trees.empty()) throw DataError(path + ": ensemble with no trees");
  return ens;
}

std::string model_kind(const std::string& path) {
  ordered_json doc = parse_file(path);
  if (!doc.contains("kind")) throw DataError(path + ": missing key kind");
  return doc["kind"].get<std::string>();
}

}  // namespace attnsl
