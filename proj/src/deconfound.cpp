// Copyright 2026 The Deconfound Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "deconfound/deconfound.hpp"

#include <cmath>
#include <limits>
#include <numeric>
#include <utility>

#include "deconfound/error.hpp"
#include "deconfound/parallel.hpp"
#include "deconfound/rng.hpp"

namespace deconfound {
namespace {

double Lookup(const NamedValues& values, const std::string& name,
              const Item& item, const char* kind) {
  auto it = values.find(name);
  if (it == values.end()) {
    throw ConfigError("item '" + item.id + "' lacks " + kind + " '" + name +
                      "'");
  }
  return it->second;
}

struct LeastSquares {
  Eigen::VectorXd beta;
  Eigen::VectorXd fitted;
  Eigen::MatrixXd gram_inverse;  // (X^T X)^-1
};

// Column-pivoted QR solve; throws NumericalError when X lacks full column
// rank.
LeastSquares SolveLeastSquares(const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& y, const char* what) {
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < x.cols()) {
    throw NumericalError(std::string(what) +
                         ": design matrix is rank deficient (collinear or "
                         "constant columns)");
  }
  LeastSquares out;
  out.beta = qr.solve(y);
  out.fitted = x * out.beta;
  const Eigen::Index p = x.cols();
  Eigen::MatrixXd gram = x.transpose() * x;
  out.gram_inverse = gram.ldlt().solve(Eigen::MatrixXd::Identity(p, p));
  return out;
}

}  // namespace

std::string_view MethodName(Method method) {
  switch (method) {
    case Method::kOls:
      return "ols";
    case Method::kIv2sls:
      return "iv2sls";
    case Method::kDml:
      return "dml";
  }
  return "ols";
}

std::optional<Method> ParseMethod(std::string_view name) {
  if (name == "ols") return Method::kOls;
  if (name == "iv" || name == "iv2sls") return Method::kIv2sls;
  if (name == "dml") return Method::kDml;
  return std::nullopt;
}

DeconfoundFit FitOls(const Dataset& dataset,
                     std::span<const std::string> confounders) {
  if (confounders.empty()) throw ConfigError("ols: no confounders named");
  const auto train = dataset.ItemsIn(Split::kTrain);
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto k = static_cast<Eigen::Index>(confounders.size());
  if (n < k + 2) {
    throw NumericalError("ols: need at least " + std::to_string(k + 2) +
                         " training items, have " + std::to_string(n));
  }
  Eigen::MatrixXd x(n, k + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Item& item = *train[i];
    x(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < k; ++j) {
      x(i, j + 1) = Lookup(item.confounders, confounders[j], item, "confounder");
    }
    y(i) = item.outcome;
  }
  LeastSquares ls = SolveLeastSquares(x, y, "ols");
  const double rss = (y - ls.fitted).squaredNorm();
  const double sigma2 = rss / static_cast<double>(n - k - 1);

  DeconfoundFit fit;
  fit.method = Method::kOls;
  fit.intercept = ls.beta(0);
  fit.n_used = static_cast<int>(n);
  for (Eigen::Index j = 0; j < k; ++j) {
    fit.alpha[confounders[j]] = ls.beta(j + 1);
    fit.std_error[confounders[j]] =
        std::sqrt(std::max(0.0, sigma2 * ls.gram_inverse(j + 1, j + 1)));
  }
  return fit;
}

DeconfoundFit FitIv2sls(const Dataset& dataset, const std::string& confounder,
                        std::span<const std::string> instruments) {
  if (instruments.empty()) throw ConfigError("iv2sls: no instruments named");
  const auto train = dataset.ItemsIn(Split::kTrain);
  const auto n = static_cast<Eigen::Index>(train.size());
  const auto q = static_cast<Eigen::Index>(instruments.size());
  if (n < q + 2) {
    throw NumericalError("iv2sls: need at least " + std::to_string(q + 2) +
                         " training items, have " + std::to_string(n));
  }
  Eigen::MatrixXd z(n, q + 1);
  Eigen::VectorXd c(n), y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Item& item = *train[i];
    z(i, 0) = 1.0;
    for (Eigen::Index j = 0; j < q; ++j) {
      // The confounder itself may serve as its own instrument.
      const NamedValues& source = item.instruments.contains(instruments[j])
                                      ? item.instruments
                                      : item.confounders;
      z(i, j + 1) = Lookup(source, instruments[j], item, "instrument");
    }
    c(i) = Lookup(item.confounders, confounder, item, "confounder");
    y(i) = item.outcome;
  }
  for (Eigen::Index j = 1; j <= q; ++j) {
    const double mean = z.col(j).mean();
    if ((z.col(j).array() - mean).square().sum() <= 0.0) {
      throw NumericalError("iv2sls: degenerate instrument '" +
                           instruments[j - 1] + "' has zero variance");
    }
  }

  // Stage 1: confounder on instruments.
  LeastSquares first = SolveLeastSquares(z, c, "iv2sls first stage");
  const double c_mean = c.mean();
  const double tss = (c.array() - c_mean).square().sum();
  const double rss1 = (c - first.fitted).squaredNorm();
  double f_stat = std::numeric_limits<double>::infinity();
  if (rss1 > 0.0) {
    f_stat = ((tss - rss1) / static_cast<double>(q)) /
             (rss1 / static_cast<double>(n - q - 1));
  }

  // Stage 2: outcome on projected confounder.
  Eigen::MatrixXd xhat(n, 2);
  xhat.col(0).setOnes();
  xhat.col(1) = first.fitted;
  LeastSquares second = SolveLeastSquares(xhat, y, "iv2sls second stage");
  const double intercept = second.beta(0);
  const double slope = second.beta(1);
  const Eigen::VectorXd resid = y.array() - intercept - slope * c.array();
  const double sigma2 = resid.squaredNorm() / static_cast<double>(n - 2);

  DeconfoundFit fit;
  fit.method = Method::kIv2sls;
  fit.intercept = intercept;
  fit.alpha[confounder] = slope;
  fit.std_error[confounder] =
      std::sqrt(std::max(0.0, sigma2 * second.gram_inverse(1, 1)));
  fit.first_stage_f = f_stat;
  fit.weak_instrument = f_stat < kWeakInstrumentF;
  fit.n_used = static_cast<int>(n);
  return fit;
}

DmlResiduals CrossFitResiduals(const Dataset& dataset,
                               const std::string& confounder, int folds,
                               const FitOptions& opts) {
  if (folds < 2) throw ConfigError("dml: folds must be >= 2");
  const auto train = dataset.ItemsIn(Split::kTrain);
  const auto n = static_cast<Eigen::Index>(train.size());
  if (n < 2 * folds) {
    throw NumericalError("dml: need at least " + std::to_string(2 * folds) +
                         " training items for " + std::to_string(folds) +
                         " folds, have " + std::to_string(n));
  }
  const Eigen::MatrixXd x = EmbeddingMatrix(train);
  const Eigen::VectorXd y = OutcomeVector(train);
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    c(i) = Lookup(train[i]->confounders, confounder, *train[i], "confounder");
  }

  // Seeded Fisher-Yates; fold = position mod K.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  CounterRng rng(opts.seed, streams::kFolds, 0);
  for (std::size_t i = perm.size(); i > 1; --i) {
    std::swap(perm[i - 1], perm[rng.Below(i)]);
  }
  DmlResiduals out;
  out.fold.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    out.fold[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % folds);
  }
  out.outcome_residual.resize(n);
  out.confounder_residual.resize(n);

  ParallelFor(static_cast<std::size_t>(folds), [&](std::size_t k) {
    std::vector<Eigen::Index> in, out_rows;
    for (Eigen::Index i = 0; i < n; ++i) {
      (out.fold[i] == static_cast<int>(k) ? out_rows : in).push_back(i);
    }
    if (out_rows.size() < 2) {
      throw NumericalError("dml: fold " + std::to_string(k) + " has " +
                           std::to_string(out_rows.size()) +
                           " items; need at least 2");
    }
    const Eigen::MatrixXd x_in = x(in, Eigen::all);
    const RewardModel ell = FitRidge(x_in, y(in), opts);
    const RewardModel m = FitRidge(x_in, c(in), opts);
    Eigen::Map<const Eigen::VectorXd> w_ell(ell.weights.data(), x.cols());
    Eigen::Map<const Eigen::VectorXd> w_m(m.weights.data(), x.cols());
    for (Eigen::Index i : out_rows) {
      out.outcome_residual(i) = y(i) - (x.row(i).dot(w_ell) + ell.bias);
      out.confounder_residual(i) = c(i) - (x.row(i).dot(w_m) + m.bias);
    }
  });
  return out;
}

DeconfoundFit FitDml(const Dataset& dataset, const std::string& confounder,
                     int folds, const FitOptions& opts) {
  const DmlResiduals r = CrossFitResiduals(dataset, confounder, folds, opts);
  const Eigen::VectorXd& yt = r.outcome_residual;
  const Eigen::VectorXd& ct = r.confounder_residual;
  const double denom = ct.squaredNorm();
  if (!(denom > 0.0)) {
    throw NumericalError("dml: confounder is fully explained by the features");
  }
  const double alpha = ct.dot(yt) / denom;
  const Eigen::VectorXd u = yt - alpha * ct;
  const double meat = (ct.array().square() * u.array().square()).sum();

  DeconfoundFit fit;
  fit.method = Method::kDml;
  fit.alpha[confounder] = alpha;
  fit.std_error[confounder] = std::sqrt(meat) / denom;
  fit.folds = folds;
  fit.n_used = static_cast<int>(yt.size());
  return fit;
}

Dataset Residualize(const Dataset& dataset, const DeconfoundFit& fit) {
  std::vector<std::string> missing;
  for (const Item& item : dataset.items) {
    for (const auto& [name, a] : fit.alpha) {
      if (!item.confounders.contains(name)) {
        missing.push_back(item.id);
        break;
      }
    }
  }
  if (!missing.empty()) {
    std::string msg = "residualize: " + std::to_string(missing.size()) +
                      " item(s) lack a fitted confounder:";
    for (std::size_t i = 0; i < missing.size() && i < 20; ++i) {
      msg += " " + missing[i];
    }
    if (missing.size() > 20) msg += " ...";
    throw ConfigError(msg);
  }
  Dataset out = dataset;
  for (Item& item : out.items) {
    double shift = 0.0;
    for (const auto& [name, a] : fit.alpha) shift += a * item.confounders.at(name);
    item.outcome -= shift;
  }
  return out;
}

}  // namespace deconfound
