#pragma once

#include <string>

#include "core/linear.hpp"
#include "core/trees.hpp"

namespace attnsl {

// {kind, lambda, intercept, coefficients:[...], feature_names:[...]}
void save_model_json(const std::string& path, const LinearModel& model);
LinearModel load_linear_model(const std::string& path);

// {kind, learning_rate, init_value, seed, p, feature_names, feature_gain,
//  trees:[{nodes:[...], leaf_rows:[...], leaf_values:[...]}]}
void save_model_json(const std::string& path, const TreeEnsemble& ensemble);
TreeEnsemble load_ensemble(const std::string& path);

// The stored kind tag, for dispatching between the loaders.
std::string model_kind(const std::string& path);

}  // namespace attnsl
