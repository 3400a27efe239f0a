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

// Estimation and removal of linear confounder effects.
//
// For an outcome y = g(text, features) + alpha * c + noise, each estimator
// returns alpha-hat for the named confounders using the training split only.
// Residualize() then subtracts alpha-hat * c from every outcome so that reward
// models trained afterwards see only the remaining (causal) structure.

#ifndef DECONFOUND_DECONFOUND_HPP_
#define DECONFOUND_DECONFOUND_HPP_

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "deconfound/model.hpp"
#include "deconfound/reward.hpp"

namespace deconfound {

enum class Method { kOls, kIv2sls, kDml };

std::string_view MethodName(Method method);
std::optional<Method> ParseMethod(std::string_view name);  // also "iv"

struct DeconfoundFit {
  Method method = Method::kOls;
  NamedValues alpha;
  NamedValues std_error;
  double intercept = 0.0;  // reported, never subtracted
  std::optional<double> first_stage_f;  // kIv2sls only
  bool weak_instrument = false;         // first_stage_f < 10
  std::optional<int> folds;             // kDml only
  int n_used = 0;
};

inline constexpr double kWeakInstrumentF = 10.0;

// y on the named confounders plus intercept, homoskedastic standard errors.
DeconfoundFit FitOls(const Dataset& dataset,
                     std::span<const std::string> confounders);

// Two-stage least squares for one endogenous confounder. Standard errors use
// residuals computed with the observed confounder, not its projection.
DeconfoundFit FitIv2sls(const Dataset& dataset, const std::string& confounder,
                        std::span<const std::string> instruments);

// Cross-fitted residuals of the partially linear model.
struct DmlResiduals {
  std::vector<int> fold;  // fold id per training row
  Eigen::VectorXd outcome_residual;
  Eigen::VectorXd confounder_residual;
};

// K-fold cross-fitting: ridge nuisance fits for E[y|x] and E[c|x] on each
// fold's complement, evaluated on the held-out fold. Folds are a seeded
// permutation of the training rows (opts.seed).
DmlResiduals CrossFitResiduals(const Dataset& dataset,
                               const std::string& confounder, int folds,
                               const FitOptions& opts);

// alpha = sum(c~ y~) / sum(c~^2) with a heteroskedasticity-robust stderr.
DeconfoundFit FitDml(const Dataset& dataset, const std::string& confounder,
                     int folds, const FitOptions& opts);

// outcome' = outcome - sum_c alpha_c * c for every item; the intercept is
// left in place. Throws ConfigError listing items that lack a confounder.
Dataset Residualize(const Dataset& dataset, const DeconfoundFit& fit);

}  // namespace deconfound

#endif  // DECONFOUND_DECONFOUND_HPP_
