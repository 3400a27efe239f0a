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

#include "deconfound/reward.hpp"

#include <algorithm>
#include <cmath>

#include "deconfound/error.hpp"

namespace deconfound {
namespace {

// log(1 + exp(z)) without overflow.
double Softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double Sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  double e = std::exp(z);
  return e / (1.0 + e);
}

void RequireFinite(const Eigen::Ref<const Eigen::MatrixXd>& m,
                   const char* what) {
  if (!m.allFinite()) {
    throw ConfigError(std::string(what) + " contains NaN or Inf");
  }
}

}  // namespace

std::string_view HeadName(Head head) {
  return head == Head::kPairwise ? "pairwise" : "regression";
}

std::optional<Head> ParseHead(std::string_view name) {
  if (name == "regression") return Head::kRegression;
  if (name == "pairwise") return Head::kPairwise;
  return std::nullopt;
}

void CheckOptions(const FitOptions& opts) {
  if (!(opts.lambda >= 0.0) || !std::isfinite(opts.lambda)) {
    throw ConfigError("fit.lambda: must be finite and >= 0");
  }
  if (!(opts.tol > 0.0)) throw ConfigError("fit.tol: must be > 0");
  if (!(opts.learning_rate > 0.0)) {
    throw ConfigError("fit.learning_rate: must be > 0");
  }
  if (opts.max_iters < 0) throw ConfigError("fit.max_iters: must be >= 0");
}

RewardModel FitRidge(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y,
                     const FitOptions& opts, const ExtraColumns* extra) {
  CheckOptions(opts);
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const Eigen::Index k = extra ? extra->values.cols() : 0;
  if (n < 1) throw ConfigError("ridge: need at least one row");
  if (y.size() != n) throw ConfigError("ridge: outcome length mismatch");
  if (extra && (extra->values.rows() != n ||
                static_cast<Eigen::Index>(extra->names.size()) != k)) {
    throw ConfigError("ridge: extra column shape mismatch");
  }
  RequireFinite(x, "embedding matrix");
  RequireFinite(y, "outcome vector");
  if (extra) RequireFinite(extra->values, "confounder columns");

  const bool penalized_intercept = opts.fit_intercept && opts.intercept_penalized;
  const bool centered = opts.fit_intercept && !opts.intercept_penalized;
  const Eigen::Index p = d + k + (penalized_intercept ? 1 : 0);

  Eigen::MatrixXd z(n, p);
  z.leftCols(d) = x;
  if (k > 0) z.middleCols(d, k) = extra->values;
  if (penalized_intercept) z.col(p - 1).setOnes();

  Eigen::RowVectorXd z_mean = Eigen::RowVectorXd::Zero(p);
  double y_mean = 0.0;
  Eigen::VectorXd yc = y;
  if (centered) {
    z_mean = z.colwise().mean();
    y_mean = y.mean();
    z.rowwise() -= z_mean;
    yc.array() -= y_mean;
  }

  const double inv_n = 1.0 / static_cast<double>(n);
  Eigen::MatrixXd a = (z.transpose() * z) * inv_n;
  Eigen::VectorXd rhs = (z.transpose() * yc) * inv_n;
  for (Eigen::Index j = 0; j < d; ++j) a(j, j) += opts.lambda;
  if (penalized_intercept) a(p - 1, p - 1) += opts.lambda;

  Eigen::LLT<Eigen::MatrixXd> llt(a);
  if (llt.info() != Eigen::Success || !(llt.rcond() > 1e-13)) {
    throw NumericalError(
        "ridge: rank-deficient system (regularized Gram matrix is singular; "
        "use lambda > 0 or drop collinear columns)");
  }
  Eigen::VectorXd beta = llt.solve(rhs);

  RewardModel model;
  model.head = Head::kRegression;
  model.lambda = opts.lambda;
  model.weights.assign(beta.data(), beta.data() + d);
  if (k > 0) {
    NamedValues coeffs;
    for (Eigen::Index j = 0; j < k; ++j) coeffs[extra->names[j]] = beta(d + j);
    model.confounder_coeffs = std::move(coeffs);
  }
  if (penalized_intercept) {
    model.bias = beta(p - 1);
  } else if (centered) {
    model.bias = y_mean - z_mean.dot(beta);
  }
  return model;
}

double RidgeObjective(const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      const RewardModel& model, const ExtraColumns* extra) {
  Eigen::Map<const Eigen::VectorXd> w(model.weights.data(),
                                      static_cast<Eigen::Index>(model.weights.size()));
  Eigen::VectorXd pred = x * w;
  pred.array() += model.bias;
  if (extra && model.confounder_coeffs) {
    for (std::size_t j = 0; j < extra->names.size(); ++j) {
      pred += model.confounder_coeffs->at(extra->names[j]) *
              extra->values.col(static_cast<Eigen::Index>(j));
    }
  }
  return (y - pred).squaredNorm() / static_cast<double>(x.rows()) +
         model.lambda * w.squaredNorm();
}

Eigen::MatrixXd EmbeddingMatrix(std::span<const Item* const> items) {
  const Eigen::Index d =
      items.empty() ? 0 : static_cast<Eigen::Index>(items.front()->embedding.size());
  Eigen::MatrixXd x(static_cast<Eigen::Index>(items.size()), d);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (static_cast<Eigen::Index>(items[i]->embedding.size()) != d) {
      throw ConfigError("item '" + items[i]->id + "': embedding length " +
                        std::to_string(items[i]->embedding.size()) +
                        " differs from " + std::to_string(d));
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      x(static_cast<Eigen::Index>(i), j) = items[i]->embedding[j];
    }
  }
  return x;
}

Eigen::VectorXd OutcomeVector(std::span<const Item* const> items) {
  Eigen::VectorXd y(static_cast<Eigen::Index>(items.size()));
  for (std::size_t i = 0; i < items.size(); ++i) {
    y(static_cast<Eigen::Index>(i)) = items[i]->outcome;
  }
  return y;
}

Eigen::MatrixXd PairDifferences(const Dataset& dataset,
                                std::span<const PreferencePair> pairs) {
  const auto index = dataset.IndexById();
  auto lookup = [&](const std::string& id) -> const Item& {
    auto it = index.find(id);
    if (it == index.end()) {
      throw ConfigError("pair references unknown item '" + id + "'");
    }
    return dataset.items[it->second];
  };
  Eigen::Index d = pairs.empty()
                       ? 0
                       : static_cast<Eigen::Index>(
                             lookup(pairs.front().winner_id).embedding.size());
  Eigen::MatrixXd diffs(static_cast<Eigen::Index>(pairs.size()), d);
  for (std::size_t r = 0; r < pairs.size(); ++r) {
    const Item& w = lookup(pairs[r].winner_id);
    const Item& l = lookup(pairs[r].loser_id);
    if (static_cast<Eigen::Index>(w.embedding.size()) != d ||
        static_cast<Eigen::Index>(l.embedding.size()) != d) {
      throw ConfigError("pair " + std::to_string(r) +
                        ": embedding dimension mismatch");
    }
    for (Eigen::Index j = 0; j < d; ++j) {
      diffs(static_cast<Eigen::Index>(r), j) = w.embedding[j] - l.embedding[j];
    }
  }
  return diffs;
}

BtEvaluation BtLossAndGradient(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                               const Eigen::Ref<const Eigen::VectorXd>& w,
                               double lambda) {
  BtEvaluation out;
  out.gradient = 2.0 * lambda * w;
  out.loss = lambda * w.squaredNorm();
  const Eigen::Index m = diffs.rows();
  if (m == 0) return out;
  const Eigen::VectorXd margin = diffs * w;
  Eigen::VectorXd weight(m);
  double sum = 0.0;
  for (Eigen::Index r = 0; r < m; ++r) {
    sum += Softplus(-margin(r));
    weight(r) = Sigmoid(-margin(r));
  }
  const double inv_m = 1.0 / static_cast<double>(m);
  out.loss += sum * inv_m;
  out.gradient -= (diffs.transpose() * weight) * inv_m;
  return out;
}

double BtSafeStep(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                  double lambda) {
  double top = 0.0;
  if (diffs.rows() > 0 && diffs.cols() > 0) {
    Eigen::MatrixXd gram = diffs.transpose() * diffs;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram,
                                                       Eigen::EigenvaluesOnly);
    top = eig.eigenvalues().maxCoeff() / (4.0 * static_cast<double>(diffs.rows()));
  }
  const double lipschitz = top + 2.0 * lambda;
  return lipschitz > 0.0 ? 1.0 / lipschitz : 1.0;
}

RewardModel FitPairwiseBt(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                          const FitOptions& opts) {
  CheckOptions(opts);
  if (diffs.rows() == 0) throw ConfigError("pairwise fit: empty pair set");
  RequireFinite(diffs, "pair differences");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(diffs.cols());
  for (int iter = 0; iter <= opts.max_iters; ++iter) {
    BtEvaluation eval = BtLossAndGradient(diffs, w, opts.lambda);
    if (!std::isfinite(eval.loss) || !eval.gradient.allFinite()) {
      throw NumericalError("pairwise fit diverged at iteration " +
                           std::to_string(iter) +
                           " (non-finite loss; lower the learning rate)");
    }
    if (eval.gradient.norm() < opts.tol || iter == opts.max_iters) break;
    w -= opts.learning_rate * eval.gradient;
  }
  RewardModel model;
  model.head = Head::kPairwise;
  model.lambda = opts.lambda;
  model.bias = 0.0;
  model.weights.assign(w.data(), w.data() + w.size());
  return model;
}

RewardModel FitPairwiseBt(const Dataset& dataset,
                          std::span<const PreferencePair> pairs,
                          const FitOptions& opts) {
  if (pairs.empty()) throw ConfigError("pairwise fit: empty pair set");
  return FitPairwiseBt(PairDifferences(dataset, pairs), opts);
}

double GradCheck(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                 const Eigen::Ref<const Eigen::VectorXd>& w, double lambda,
                 double step) {
  if (w.size() == 0 || (diffs.rows() == 0 && lambda == 0.0)) return 0.0;
  const Eigen::VectorXd analytic = BtLossAndGradient(diffs, w, lambda).gradient;
  double worst = 0.0;
  Eigen::VectorXd probe = w;
  for (Eigen::Index j = 0; j < w.size(); ++j) {
    probe(j) = w(j) + step;
    const double up = BtLossAndGradient(diffs, probe, lambda).loss;
    probe(j) = w(j) - step;
    const double down = BtLossAndGradient(diffs, probe, lambda).loss;
    probe(j) = w(j);
    const double numeric = (up - down) / (2.0 * step);
    const double scale = std::max({std::abs(analytic(j)), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic(j) - numeric) / scale);
  }
  return worst;
}

double Predict(const RewardModel& model, const Item& item) {
  if (item.embedding.size() != model.weights.size()) {
    throw ConfigError("predict: item '" + item.id + "' has embedding length " +
                      std::to_string(item.embedding.size()) + ", model expects " +
                      std::to_string(model.weights.size()));
  }
  double score = model.bias;
  for (std::size_t j = 0; j < model.weights.size(); ++j) {
    score += model.weights[j] * item.embedding[j];
  }
  if (model.confounder_coeffs) {
    for (const auto& [name, coeff] : *model.confounder_coeffs) {
      auto it = item.confounders.find(name);
      if (it == item.confounders.end()) {
        throw ConfigError("predict: item '" + item.id +
                          "' lacks confounder '" + name + "'");
      }
      score += coeff * it->second;
    }
  }
  return score;
}

}  // namespace deconfound
