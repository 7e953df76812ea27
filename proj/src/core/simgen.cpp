#include "core/simgen.hpp"

#include <Eigen/Cholesky>
#include <cmath>
#include <string>

#include "core/attention.hpp"
#include "core/errors.hpp"
#include "core/rng.hpp"

namespace attnsl {

namespace {

std::vector<std::string> feature_names(int p) {
  std::vector<std::string> names(p);
  for (int j = 0; j < p; ++j) names[j] = "x" + std::to_string(j + 1);
  return names;
}

Dataset make_dataset(Matrix X, Vector y, const std::string& prefix) {
  Dataset ds;
  ds.X = std::move(X);
  ds.y = std::move(y);
  ds.feature_names = feature_names(ds.p());
  ds.has_response = true;
  ds.row_ids.resize(ds.n());
  for (int i = 0; i < ds.n(); ++i)
    ds.row_ids[i] = prefix + std::to_string(i + 1);
  return ds;
}

double population_variance(const Vector& v) {
  double mean = v.mean();
  return (v.array() - mean).square().sum() / static_cast<double>(v.size());
}

}  // namespace

SimSetting default_setting(int id, std::uint64_t seed) {
  if (id < 1 || id > 4) throw UsageError("setting id must be 1..4");
  SimSetting s;
  s.id = id;
  s.p = (id == 2) ? 100 : 30;
  s.seed = seed;
  return s;
}

Vector setting1_coefficients(double z, int p) {
  // z = -1 maps to beta0, z = +1 to beta1, linear in between.
  double w = (z + 1.0) / 2.0;
  Vector beta = Vector::Zero(p);
  for (int j = 0; j < 4; ++j) beta(j) = (1.0 - w) * 3.0 + w * (-2.0);
  return beta;
}

Vector setting2_coefficients(double z, int p) {
  static const double b0[6] = {3, 2, 1, 0, 0, 0};
  static const double b1[6] = {-1, 0, 1, 2, 3, 2};
  Vector beta = Vector::Zero(p);
  for (int j = 0; j < 6; ++j) beta(j) = (1.0 - z) * b0[j] + z * b1[j];
  return beta;
}

std::array<double, 3> setting4_memberships(double z) {
  static const double centers[3] = {0.2, 0.5, 0.8};
  const double sd = 0.15;
  std::array<double, 3> w{};
  double total = 0.0;
  for (int k = 0; k < 3; ++k) {
    double u = (z - centers[k]) / sd;
    w[k] = std::exp(-0.5 * u * u);
    total += w[k];
  }
  for (int k = 0; k < 3; ++k) w[k] /= total;
  return w;
}

Vector setting4_coefficients(double z, int p) {
  static const double b1[4] = {3, 3, 2, 1};
  static const double b2[4] = {-2, 1, 3, 2};
  static const double b3[4] = {1, -2, -1, 3};
  auto w = setting4_memberships(z);
  Vector beta = Vector::Zero(p);
  for (int j = 0; j < 4; ++j)
    beta(j) = w[0] * b1[j] + w[1] * b2[j] + w[2] * b3[j];
  return beta;
}

SettingData gen_setting(const SimSetting& setting) {
  if (setting.id < 1 || setting.id > 4)
    throw UsageError("setting id must be 1..4");
  if (setting.n < 2) throw UsageError("setting n must be at least 2");
  if (setting.target_snr <= 0.0)
    throw UsageError("target_snr must be positive");
  int min_p = setting.id == 2 ? 6 : (setting.id == 3 ? 18 : 4);
  if (setting.p < min_p)
    throw UsageError("setting " + std::to_string(setting.id) +
                     " needs p >= " + std::to_string(min_p));

  const int n = setting.n;
  const int N = 2 * n;
  const int p = setting.p;
  Rng rng(setting.seed);

  Matrix X(N, p);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < p; ++j) X(i, j) = rng.normal();

  Matrix beta(N, p);
  beta.setZero();

  switch (setting.id) {
    case 1: {
      for (int i = 0; i < N; ++i) {
        double z = rng.uniform(-1.0, 1.0);
        beta.row(i) = setting1_coefficients(z, p).transpose();
        for (int j = 0; j < 4; ++j) X(i, j) += z;
      }
      break;
    }
    case 2: {
      for (int i = 0; i < N; ++i) {
        double z = rng.uniform();
        beta.row(i) = setting2_coefficients(z, p).transpose();
        for (int j = 0; j < 6; ++j) X(i, j) += z;
      }
      break;
    }
    case 3: {
      std::vector<bool> minority(N);
      for (int i = 0; i < N; ++i) minority[i] = rng.uniform() < 0.2;
      Vector coef(8);
      for (int j = 0; j < 8; ++j) coef(j) = rng.normal();
      // Spurious shifts: 10 of the noise features, one shared shift vector,
      // applied to a random half of all rows.
      std::vector<int> spurious = rng.sample_without_replacement(p - 8, 10);
      for (int& f : spurious) f += 8;
      Vector shift_values(10);
      for (int k = 0; k < 10; ++k) shift_values(k) = rng.normal();
      for (int i = 0; i < N; ++i) {
        if (minority[i]) {
          for (int j = 0; j < 4; ++j) beta(i, 4 + j) = coef(4 + j);
          for (int j = 0; j < 8; ++j) X(i, j) += 2.0;
        } else {
          for (int j = 0; j < 4; ++j) beta(i, j) = coef(j);
        }
        if (rng.uniform() < 0.5)
          for (int k = 0; k < 10; ++k) X(i, spurious[k]) += shift_values(k);
      }
      break;
    }
    case 4: {
      for (int i = 0; i < N; ++i) {
        double z = rng.uniform();
        beta.row(i) = setting4_coefficients(z, p).transpose();
        for (int j = 0; j < 4; ++j) X(i, j) += z;
      }
      break;
    }
  }

  Vector signal(N);
  for (int i = 0; i < N; ++i) signal(i) = X.row(i).dot(beta.row(i));
  double sigma = std::sqrt(population_variance(signal) / setting.target_snr);

  Vector y(N);
  for (int i = 0; i < N; ++i) y(i) = signal(i) + sigma * rng.normal();

  SettingData out;
  out.train = make_dataset(X.topRows(n), y.head(n), "tr");
  out.test = make_dataset(X.bottomRows(n), y.tail(n), "te");
  out.beta_train = beta.topRows(n);
  out.beta_test = beta.bottomRows(n);
  out.sigma = sigma;
  return out;
}

namespace {

void validate_mixture(const MixtureSpec& spec) {
  int p = spec.p();
  if (p < 1) throw UsageError("mixture spec needs at least one feature");
  if (spec.beta2.size() != p || spec.mu1.size() != p || spec.mu2.size() != p)
    throw UsageError("mixture spec dimensions disagree");
  if (spec.Sigma.rows() != p || spec.Sigma.cols() != p)
    throw UsageError("Sigma must be p x p");
  if (spec.pi[0] < 0.0 || spec.pi[1] < 0.0 ||
      std::abs(spec.pi[0] + spec.pi[1] - 1.0) > 1e-9)
    throw UsageError("mixture proportions must be nonnegative and sum to 1");
  if (spec.sigma_noise < 0.0) throw UsageError("sigma_noise must be >= 0");
  if (!spec.Sigma.isApprox(spec.Sigma.transpose(), 1e-10))
    throw DataError("Sigma must be symmetric");
}

Matrix mixture_chol(const MixtureSpec& spec) {
  Eigen::LLT<Matrix> llt(spec.Sigma);
  if (llt.info() != Eigen::Success)
    throw DataError("Sigma must be positive definite");
  return llt.matrixL();
}

}  // namespace

MixtureData gen_mixture(const MixtureSpec& spec, int n, std::uint64_t seed) {
  validate_mixture(spec);
  if (n < 1) throw UsageError("n must be positive");
  Matrix L = mixture_chol(spec);
  const int p = spec.p();
  Rng rng(seed);

  std::vector<int> labels(n);
  for (int i = 0; i < n; ++i) labels[i] = rng.uniform() < spec.pi[0] ? 1 : 2;

  Matrix X(n, p);
  Vector z(p);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < p; ++j) z(j) = rng.normal();
    const Vector& mu = labels[i] == 1 ? spec.mu1 : spec.mu2;
    X.row(i) = (mu + L * z).transpose();
  }

  Vector y(n);
  for (int i = 0; i < n; ++i) {
    const Vector& beta = labels[i] == 1 ? spec.beta1 : spec.beta2;
    y(i) = X.row(i).dot(beta) + spec.sigma_noise * rng.normal();
  }

  MixtureData out;
  out.data = make_dataset(std::move(X), std::move(y), "m");
  out.labels = std::move(labels);
  return out;
}

double drift_signal(const Vector& x, const Vector& beta) {
  return x.dot(beta) + x(0) * x(0) - x(2) * x(2) +
         (x(3) + x(4)) * (x(3) + x(4));
}

DriftData gen_drift(const DriftScenario& scenario, std::uint64_t seed) {
  if (scenario.p < 10) throw UsageError("drift scenario needs p >= 10");
  if (scenario.num_nonzero < 0 || scenario.num_nonzero > scenario.p)
    throw UsageError("num_nonzero out of range");
  if (scenario.n_train < 1 || scenario.n_test < 1)
    throw UsageError("drift sample sizes must be positive");
  for (double f : scenario.mix_b)
    if (f < 0.0 || f > 1.0) throw UsageError("mix_b fractions must be in [0,1]");
  if (scenario.sigma < 0.0) throw UsageError("sigma must be >= 0");

  const int p = scenario.p;
  Rng rng(seed);

  Vector beta = Vector::Zero(p);
  std::vector<int> support =
      rng.sample_without_replacement(p, scenario.num_nonzero);
  for (int j : support)
    beta(j) = rng.uniform() < 0.5 ? scenario.coef_magnitude
                                  : -scenario.coef_magnitude;

  auto gen_wave = [&](int n, double frac_b, const std::string& prefix) {
    std::vector<bool> is_b(n);
    for (int i = 0; i < n; ++i) is_b[i] = rng.uniform() < frac_b;
    Matrix X(n, p);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < p; ++j) X(i, j) = rng.normal();
      if (is_b[i])
        for (int j = 5; j < 10; ++j) X(i, j) += scenario.shift;
    }
    Vector y(n);
    for (int i = 0; i < n; ++i)
      y(i) = drift_signal(X.row(i), beta) + scenario.sigma * rng.normal();
    return make_dataset(std::move(X), std::move(y), prefix);
  };

  DriftData out;
  out.d1 = gen_wave(scenario.n_train, scenario.mix_b[0], "d1_");
  out.d2 = gen_wave(scenario.n_train, scenario.mix_b[1], "d2_");
  out.d3 = gen_wave(scenario.n_test, scenario.mix_b[2], "d3_");
  out.d1_test = gen_wave(scenario.n_test, scenario.mix_b[0], "d1t_");
  out.beta = std::move(beta);
  return out;
}

Vector mixture_beta_star(const MixtureSpec& spec) {
  validate_mixture(spec);
  Matrix M1 = spec.Sigma + spec.mu1 * spec.mu1.transpose();
  Matrix M2 = spec.Sigma + spec.mu2 * spec.mu2.transpose();
  Matrix A = spec.pi[0] * M1 + spec.pi[1] * M2;
  Vector b = spec.pi[0] * (M1 * spec.beta1) + spec.pi[1] * (M2 * spec.beta2);
  return A.ldlt().solve(b);
}

TheoryReport theory_check(const MixtureSpec& spec, int n, std::uint64_t seed,
                          double temperature) {
  validate_mixture(spec);
  if (n < 20) throw UsageError("theory_check needs n >= 20");
  if (temperature <= 0.0) throw UsageError("temperature must be positive");

  const int p = spec.p();
  const int n_test = 200;
  MixtureData train = gen_mixture(spec, n, derive_seed(seed, 1));

  // Cluster-1 test points with their noiseless responses as truth.
  Matrix L = mixture_chol(spec);
  Rng test_rng(derive_seed(seed, 2));
  Matrix X_test(n_test, p);
  Vector z(p);
  for (int i = 0; i < n_test; ++i) {
    for (int j = 0; j < p; ++j) z(j) = test_rng.normal();
    X_test.row(i) = (spec.mu1 + L * z).transpose();
  }
  Vector truth = X_test * spec.beta1;

  auto [Xs, params] = standardize(train.data.X);
  FoldPlan ridge_folds =
      make_folds(n, FoldKind::KFold, 10, derive_seed(seed, 3));
  double ridge_lambda = ridge_cv_lambda(train.data.X, train.data.y, ridge_folds);
  LinearModel ridge = ridge_fit(train.data.X, train.data.y, ridge_lambda);
  DiagonalAttention diag = diagonal_from_ridge(ridge, params);

  TheoryReport report;
  Vector mu1_std =
      ((spec.mu1 - params.means).array() / params.sds.array()).matrix();
  Vector mu2_std =
      ((spec.mu2 - params.means).array() / params.sds.array()).matrix();
  Vector d = diag.diag;
  double s11 = mu1_std.dot(d.asDiagonal() * mu1_std);
  double s22 = mu2_std.dot(d.asDiagonal() * mu2_std);
  double s12 = mu1_std.dot(d.asDiagonal() * mu2_std);
  report.separable = s11 > s12 && s22 > s12;

  Matrix Xs_test = apply_standardization(params, X_test);
  Matrix scores(n_test, n);
  for (int i = 0; i < n_test; ++i)
    scores.row(i) = ridge_diag_scores(Xs_test.row(i), Xs, diag);
  AttentionMatrix attn = softmax_rows(scores, temperature);

  double w1_total = 0.0;
  for (int i = 0; i < n_test; ++i)
    for (int j = 0; j < n; ++j)
      if (train.labels[j] == 1) w1_total += attn.weights(i, j);
  report.W1 = w1_total / n_test;
  report.W2 = 1.0 - report.W1;

  FoldPlan lasso_folds =
      make_folds(n, FoldKind::KFold, 10, derive_seed(seed, 4));
  LassoCvResult base = lasso_cv(train.data.X, train.data.y, lasso_folds);
  Vector pred_lasso = predict(base.model, X_test);

  double se_lasso = 0.0, se_att = 0.0;
  for (int i = 0; i < n_test; ++i) {
    LinearModel local =
        weighted_lasso_fit(train.data.X, train.data.y,
                           attn.weights.row(i).transpose(), base.lambda_hat,
                           &base.model.coefficients);
    double pred = local.intercept + X_test.row(i).dot(local.coefficients);
    se_att += (pred - truth(i)) * (pred - truth(i));
    se_lasso += (pred_lasso(i) - truth(i)) * (pred_lasso(i) - truth(i));
  }
  report.mse_lasso = se_lasso / n_test;
  report.mse_att = se_att / n_test;
  report.ratio = report.mse_att / report.mse_lasso;
  double pi2 = spec.pi[1];
  report.predicted_ratio = pi2 > 0.0 ? (report.W2 / pi2) * (report.W2 / pi2)
                                     : 0.0;
  report.beta_star = mixture_beta_star(spec);
  report.lasso_coef = base.model.coefficients;
  return report;
}

}  // namespace attnsl
