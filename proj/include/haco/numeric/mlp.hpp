// Copyright 2026 The haco-copilot Authors
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

#ifndef HACO__NUMERIC__MLP_HPP_
#define HACO__NUMERIC__MLP_HPP_

#include <Eigen/Core>

#include <cstddef>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace haco::numeric
{

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class Activation { kRelu, kTanh };

class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class NonFiniteError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

struct Layer
{
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Dense multilayer perceptron parameters. The hidden activation applies to
/// every layer except the last, which is linear.
struct ParamSet
{
  std::vector<Layer> layers;
  Activation activation = Activation::kRelu;

  Eigen::Index input_dim() const;
  Eigen::Index output_dim() const;
  std::size_t parameter_count() const;
  bool all_finite() const;

  /// Same shapes, all entries zero.
  ParamSet zeros_like() const;
  void set_zero();

  /// Throws ShapeError unless consecutive layer dimensions chain.
  void validate() const;
};

bool same_shape(const ParamSet & a, const ParamSet & b);

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) initialisation for every weight and bias.
ParamSet make_mlp(std::span<const int> sizes, Activation activation, std::mt19937_64 & rng);

std::vector<double> flatten(const ParamSet & params);
void unflatten(std::span<const double> values, ParamSet & params);

/// Per-layer intermediates needed by backward(). Columns are batch samples.
struct ForwardTrace
{
  std::vector<Matrix> inputs;       // input to layer i
  std::vector<Matrix> pre_activations;
};

Matrix forward(const ParamSet & params, const Matrix & input);
Vector forward(const ParamSet & params, const Vector & input);
Matrix forward(const ParamSet & params, const Matrix & input, ForwardTrace & trace);

/// Backpropagates `output_grad` (dLoss/dOutput, out x batch) through the
/// network, accumulating parameter gradients into `grads` (which must share
/// the shape of `params`). Returns dLoss/dInput.
Matrix backward(
  const ParamSet & params, const ForwardTrace & trace, const Matrix & output_grad,
  ParamSet & grads);

/// Throws NonFiniteError naming `where` when any entry is NaN or infinite.
void require_finite(const Matrix & m, const std::string & where);
void require_finite(const ParamSet & p, const std::string & where);

}  // namespace haco::numeric

#endif  // HACO__NUMERIC__MLP_HPP_
