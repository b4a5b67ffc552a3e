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

#include "haco/numeric/mlp.hpp"

#include <cmath>
#include <sstream>

namespace haco::numeric
{

Eigen::Index ParamSet::input_dim() const
{
  return layers.empty() ? 0 : layers.front().weight.cols();
}

Eigen::Index ParamSet::output_dim() const
{
  return layers.empty() ? 0 : layers.back().weight.rows();
}

std::size_t ParamSet::parameter_count() const
{
  std::size_t n = 0;
  for (const auto & layer : layers) {
    n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  }
  return n;
}

bool ParamSet::all_finite() const
{
  for (const auto & layer : layers) {
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) {
      return false;
    }
  }
  return true;
}

ParamSet ParamSet::zeros_like() const
{
  ParamSet out;
  out.activation = activation;
  out.layers.reserve(layers.size());
  for (const auto & layer : layers) {
    out.layers.push_back(
      {Matrix::Zero(layer.weight.rows(), layer.weight.cols()), Vector::Zero(layer.bias.size())});
  }
  return out;
}

void ParamSet::set_zero()
{
  for (auto & layer : layers) {
    layer.weight.setZero();
    layer.bias.setZero();
  }
}

void ParamSet::validate() const
{
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto & layer = layers[i];
    if (layer.bias.size() != layer.weight.rows()) {
      std::ostringstream msg;
      msg << "layer " << i << ": bias has " << layer.bias.size() << " entries but weight has "
          << layer.weight.rows() << " rows";
      throw ShapeError(msg.str());
    }
    if (i > 0 && layers[i - 1].weight.rows() != layer.weight.cols()) {
      std::ostringstream msg;
      msg << "layer " << i << " expects " << layer.weight.cols() << " inputs but layer " << i - 1
          << " produces " << layers[i - 1].weight.rows();
      throw ShapeError(msg.str());
    }
  }
}

bool same_shape(const ParamSet & a, const ParamSet & b)
{
  if (a.layers.size() != b.layers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < a.layers.size(); ++i) {
    if (
      a.layers[i].weight.rows() != b.layers[i].weight.rows() ||
      a.layers[i].weight.cols() != b.layers[i].weight.cols() ||
      a.layers[i].bias.size() != b.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

ParamSet make_mlp(std::span<const int> sizes, Activation activation, std::mt19937_64 & rng)
{
  if (sizes.size() < 2) {
    throw ShapeError("make_mlp needs at least input and output sizes");
  }
  ParamSet params;
  params.activation = activation;
  for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
    const int fan_in = sizes[i];
    const int fan_out = sizes[i + 1];
    if (fan_in <= 0 || fan_out <= 0) {
      throw ShapeError("make_mlp: layer sizes must be positive");
    }
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    Layer layer{Matrix(fan_out, fan_in), Vector(fan_out)};
    for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) {
      for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
        layer.weight(r, c) = dist(rng);
      }
    }
    for (Eigen::Index r = 0; r < layer.bias.size(); ++r) {
      layer.bias(r) = dist(rng);
    }
    params.layers.push_back(std::move(layer));
  }
  return params;
}

std::vector<double> flatten(const ParamSet & params)
{
  std::vector<double> out;
  out.reserve(params.parameter_count());
  for (const auto & layer : params.layers) {
    out.insert(out.end(), layer.weight.data(), layer.weight.data() + layer.weight.size());
    out.insert(out.end(), layer.bias.data(), layer.bias.data() + layer.bias.size());
  }
  return out;
}

void unflatten(std::span<const double> values, ParamSet & params)
{
  if (values.size() != params.parameter_count()) {
    std::ostringstream msg;
    msg << "unflatten: got " << values.size() << " values for " << params.parameter_count()
        << " parameters";
    throw ShapeError(msg.str());
  }
  std::size_t offset = 0;
  for (auto & layer : params.layers) {
    std::copy_n(values.data() + offset, layer.weight.size(), layer.weight.data());
    offset += static_cast<std::size_t>(layer.weight.size());
    std::copy_n(values.data() + offset, layer.bias.size(), layer.bias.data());
    offset += static_cast<std::size_t>(layer.bias.size());
  }
}

namespace
{

void check_input(const ParamSet & params, Eigen::Index rows)
{
  if (params.layers.empty()) {
    throw ShapeError("forward: network has no layers");
  }
  if (rows != params.input_dim()) {
    std::ostringstream msg;
    msg << "forward: input has " << rows << " rows, first layer expects " << params.input_dim();
    throw ShapeError(msg.str());
  }
}

void activate(Activation activation, Matrix & m)
{
  if (activation == Activation::kRelu) {
    m = m.cwiseMax(0.0);
  } else {
    m = m.array().tanh().matrix();
  }
}

}  // namespace

Matrix forward(const ParamSet & params, const Matrix & input)
{
  check_input(params, input.rows());
  Matrix x = input;
  const std::size_t last = params.layers.size() - 1;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto & layer = params.layers[i];
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    if (i != last) {
      activate(params.activation, z);
    }
    x = std::move(z);
  }
  return x;
}

Vector forward(const ParamSet & params, const Vector & input)
{
  const Matrix in = input;
  return forward(params, in).col(0);
}

Matrix forward(const ParamSet & params, const Matrix & input, ForwardTrace & trace)
{
  check_input(params, input.rows());
  const std::size_t n = params.layers.size();
  trace.inputs.resize(n);
  trace.pre_activations.resize(n);
  Matrix x = input;
  for (std::size_t i = 0; i < n; ++i) {
    const auto & layer = params.layers[i];
    Matrix z = layer.weight * x;
    z.colwise() += layer.bias;
    trace.inputs[i] = std::move(x);
    trace.pre_activations[i] = z;
    if (i + 1 != n) {
      activate(params.activation, z);
    }
    x = std::move(z);
  }
  return x;
}

Matrix backward(
  const ParamSet & params, const ForwardTrace & trace, const Matrix & output_grad,
  ParamSet & grads)
{
  const std::size_t n = params.layers.size();
  if (trace.inputs.size() != n || !same_shape(params, grads)) {
    throw ShapeError("backward: trace or gradient shape does not match parameters");
  }
  if (output_grad.rows() != params.output_dim() || output_grad.cols() != trace.inputs[0].cols()) {
    std::ostringstream msg;
    msg << "backward: output gradient is " << output_grad.rows() << "x" << output_grad.cols()
        << ", expected " << params.output_dim() << "x" << trace.inputs[0].cols();
    throw ShapeError(msg.str());
  }
  Matrix delta = output_grad;
  for (std::size_t k = n; k-- > 0;) {
    if (k + 1 != n) {
      const Matrix & z = trace.pre_activations[k];
      if (params.activation == Activation::kRelu) {
        delta = delta.cwiseProduct((z.array() > 0.0).cast<double>().matrix());
      } else {
        delta = delta.cwiseProduct((1.0 - z.array().tanh().square()).matrix());
      }
    }
    grads.layers[k].weight.noalias() += delta * trace.inputs[k].transpose();
    grads.layers[k].bias += delta.rowwise().sum();
    Matrix upstream = params.layers[k].weight.transpose() * delta;
    delta = std::move(upstream);
  }
  return delta;
}

void require_finite(const Matrix & m, const std::string & where)
{
  if (!m.allFinite()) {
    throw NonFiniteError("non-finite value in " + where);
  }
}

void require_finite(const ParamSet & p, const std::string & where)
{
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    if (!p.layers[i].weight.allFinite() || !p.layers[i].bias.allFinite()) {
      throw NonFiniteError("non-finite value in " + where + " (layer " + std::to_string(i) + ")");
    }
  }
}

}  // namespace haco::numeric
