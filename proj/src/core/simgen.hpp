#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "core/dataset.hpp"
#include "core/linear.hpp"

namespace attnsl {

// Heterogeneous regression settings 1-4. p depends on the setting;
// default_setting fills it in.
struct SimSetting {
  int id = 1;
  int n = 300;
  int p = 30;
  double target_snr = 2.5;
  std::uint64_t seed = 0;
};

SimSetting default_setting(int id, std::uint64_t seed = 0);

struct SettingData {
  Dataset train;
  Dataset test;
  Matrix beta_train;  // n x p true per-row coefficients
  Matrix beta_test;
  double sigma = 0.0;
};

SettingData gen_setting(const SimSetting& setting);

// Per-row coefficient maps, exposed so the recipes are testable directly.
// z in [-1,1] for setting 1, [0,1] for settings 2 and 4.
Vector setting1_coefficients(double z, int p);
Vector setting2_coefficients(double z, int p);
std::array<double, 3> setting4_memberships(double z);
Vector setting4_coefficients(double z, int p);

// Two-cluster linear mixture.
struct MixtureSpec {
  std::array<double, 2> pi{0.5, 0.5};
  Vector beta1;
  Vector beta2;
  Vector mu1;
  Vector mu2;
  Matrix Sigma;  // shared within-cluster covariance
  double sigma_noise = 1.0;

  int p() const { return static_cast<int>(beta1.size()); }
  double delta() const { return (beta1 - beta2).norm(); }
};

struct MixtureData {
  Dataset data;
  std::vector<int> labels;  // 1 or 2
};

MixtureData gen_mixture(const MixtureSpec& spec, int n, std::uint64_t seed);

// Longitudinal drift: three waves with a growing share of population B,
// which shifts features 6-10 by +2.
struct DriftScenario {
  int p = 50;
  int num_nonzero = 20;
  double coef_magnitude = 2.0;
  std::array<double, 3> mix_b{0.10, 0.90, 0.95};
  double shift = 2.0;
  double sigma = 36.0;
  int n_train = 300;
  int n_test = 200;
};

struct DriftData {
  Dataset d1;       // original training wave
  Dataset d2;       // recent wave used for correction / refit
  Dataset d3;       // prediction wave
  Dataset d1_test;  // held-out time-1 rows for the no-drift reference arm
  Vector beta;
};

DriftData gen_drift(const DriftScenario& scenario, std::uint64_t seed);

// Noiseless drift response: x'beta + x1^2 - x3^2 + (x4 + x5)^2.
double drift_signal(const Vector& x, const Vector& beta);

// Population minimizer of the unpenalized mixture risk, in terms of the
// per-cluster second moments Sigma + mu_k mu_k'.
Vector mixture_beta_star(const MixtureSpec& spec);

// Monte-Carlo comparison of ridge-diagonal attention at m=1 against the
// plain lasso, both scored on noiseless cluster-1 signal.
struct TheoryReport {
  double W1 = 0.0;  // mean attention mass on cluster-1 training points
  double W2 = 0.0;
  double mse_lasso = 0.0;
  double mse_att = 0.0;
  double ratio = 0.0;            // mse_att / mse_lasso
  double predicted_ratio = 0.0;  // (W2 / pi2)^2
  bool separable = true;         // ridge-weighted separability held
  Vector beta_star;
  Vector lasso_coef;
};

TheoryReport theory_check(const MixtureSpec& spec, int n, std::uint64_t seed,
                          double temperature);

}  // namespace attnsl
