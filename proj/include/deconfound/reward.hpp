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

// Linear reward heads over frozen embeddings.
//
// Both heads use the same penalty convention: lambda * ||w||^2 is added to
// the *mean* loss over rows (or pairs), never to the sum.

#ifndef DECONFOUND_REWARD_HPP_
#define DECONFOUND_REWARD_HPP_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deconfound/model.hpp"

namespace deconfound {

enum class Head { kRegression, kPairwise };

std::string_view HeadName(Head head);
std::optional<Head> ParseHead(std::string_view name);

struct RewardModel {
  std::vector<double> weights;
  double bias = 0.0;
  // Coefficients of confounder values fed straight into the head. Present
  // only for models fitted with extra columns.
  std::optional<NamedValues> confounder_coeffs;
  double lambda = 0.0;
  Head head = Head::kRegression;
};

struct FitOptions {
  double lambda = 0.0;
  int max_iters = 5000;
  double tol = 1e-8;
  double learning_rate = 1.0;
  bool intercept_penalized = false;
  bool fit_intercept = true;
  std::uint64_t seed = 0;
};

// Throws ConfigError for lambda < 0, non-positive tol or learning rate.
void CheckOptions(const FitOptions& opts);

// Confounder columns appended to the design matrix. Their coefficients are
// not penalized and land in RewardModel::confounder_coeffs.
struct ExtraColumns {
  std::vector<std::string> names;
  Eigen::MatrixXd values;  // rows x names.size()
};

// Minimizes (1/n) sum (y - w.x - b)^2 + lambda ||w||^2 in closed form
// (Cholesky on the regularized Gram matrix). Throws NumericalError when the
// system is singular, ConfigError on non-finite input.
RewardModel FitRidge(const Eigen::Ref<const Eigen::MatrixXd>& x,
                     const Eigen::Ref<const Eigen::VectorXd>& y,
                     const FitOptions& opts,
                     const ExtraColumns* extra = nullptr);

// Ridge objective of `model` on (x, y, extra); used by optimality checks.
double RidgeObjective(const Eigen::Ref<const Eigen::MatrixXd>& x,
                      const Eigen::Ref<const Eigen::VectorXd>& y,
                      const RewardModel& model,
                      const ExtraColumns* extra = nullptr);

// Stacks item embeddings row-wise.
Eigen::MatrixXd EmbeddingMatrix(std::span<const Item* const> items);
Eigen::VectorXd OutcomeVector(std::span<const Item* const> items);

// Rows are x_winner - x_loser. Throws ConfigError on unknown ids.
Eigen::MatrixXd PairDifferences(const Dataset& dataset,
                                std::span<const PreferencePair> pairs);

struct BtEvaluation {
  double loss = 0.0;
  Eigen::VectorXd gradient;
};

// -(1/m) sum log sigmoid(D w) + lambda ||w||^2 and its gradient.
BtEvaluation BtLossAndGradient(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                               const Eigen::Ref<const Eigen::VectorXd>& w,
                               double lambda);

// 1 / L, where L = lambda_max(D^T D) / (4m) + 2 lambda bounds the curvature.
double BtSafeStep(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                  double lambda);

// Full-batch gradient descent from zero. Stops when ||grad|| < tol or after
// max_iters. The bias cancels in score differences and stays 0.
RewardModel FitPairwiseBt(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                          const FitOptions& opts);
RewardModel FitPairwiseBt(const Dataset& dataset,
                          std::span<const PreferencePair> pairs,
                          const FitOptions& opts);

// Max relative discrepancy between the analytic BT gradient and central
// finite differences with the given step. 0 for an empty problem.
double GradCheck(const Eigen::Ref<const Eigen::MatrixXd>& diffs,
                 const Eigen::Ref<const Eigen::VectorXd>& w, double lambda,
                 double step = 1e-5);

double Predict(const RewardModel& model, const Item& item);

}  // namespace deconfound

#endif  // DECONFOUND_REWARD_HPP_
