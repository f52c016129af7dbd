/*
 * Copyright 2026 The flea-sim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include "flea/rng.hpp"
#include "flea/types.hpp"

#include <cmath>
#include <string>
#include <utility>
#include <vector>

namespace flea {

enum class Activation { kLinear, kTanh, kRelu };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::kLinear: return "linear";
    case Activation::kTanh: return "tanh";
    case Activation::kRelu: return "relu";
  }
  return "linear";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "linear") return Activation::kLinear;
  if (s == "tanh") return Activation::kTanh;
  if (s == "relu") return Activation::kRelu;
  throw ConfigError("unknown activation '" + s + "' (expected linear, tanh or relu)");
}

template <class Scalar>
struct DenseLayer {
  Mat<Scalar> weight;  // out x in
  Vec<Scalar> bias;    // out
  Activation activation = Activation::kLinear;

  Eigen::Index in_width() const { return weight.cols(); }
  Eigen::Index out_width() const { return weight.rows(); }
};

/// Feed-forward network cut at `split_index`: layers [0, split) form the
/// front half that produces shared activations, layers [split, L) the back
/// half that produces logits. The same type carries gradients.
template <class Scalar>
class ModelParams {
 public:
  ModelParams() = default;
  ModelParams(std::vector<DenseLayer<Scalar>> layers, int split_index)
      : layers_(std::move(layers)), split_index_(split_index) {
    validate();
  }

  const std::vector<DenseLayer<Scalar>>& layers() const { return layers_; }
  std::vector<DenseLayer<Scalar>>& layers() { return layers_; }
  const DenseLayer<Scalar>& layer(int i) const { return layers_[static_cast<std::size_t>(i)]; }
  DenseLayer<Scalar>& layer(int i) { return layers_[static_cast<std::size_t>(i)]; }

  int num_layers() const { return static_cast<int>(layers_.size()); }
  int split_index() const { return split_index_; }
  Eigen::Index input_width() const { return layers_.front().in_width(); }
  Eigen::Index feature_width() const { return layer(split_index_).in_width(); }
  Eigen::Index num_classes() const { return layers_.back().out_width(); }

  Eigen::Index num_parameters() const {
    Eigen::Index n = 0;
    for (const auto& l : layers_) n += l.weight.size() + l.bias.size();
    return n;
  }

  bool same_shape(const ModelParams& o) const {
    if (o.num_layers() != num_layers() || o.split_index_ != split_index_) return false;
    for (int i = 0; i < num_layers(); ++i) {
      if (layer(i).weight.rows() != o.layer(i).weight.rows() ||
          layer(i).weight.cols() != o.layer(i).weight.cols())
        return false;
    }
    return true;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  ModelParams zeros_like() const {
    ModelParams z = *this;
    for (auto& l : z.layers_) {
      l.weight.setZero();
      l.bias.setZero();
    }
    return z;
  }

  Vec<Scalar> to_flat() const {
    Vec<Scalar> flat(num_parameters());
    Eigen::Index at = 0;
    for (const auto& l : layers_) {
      flat.segment(at, l.weight.size()) = l.weight.reshaped();
      at += l.weight.size();
      flat.segment(at, l.bias.size()) = l.bias;
      at += l.bias.size();
    }
    return flat;
  }

  void assign_flat(const Vec<Scalar>& flat) {
    if (flat.size() != num_parameters())
      throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) +
                       " entries, model expects " + std::to_string(num_parameters()));
    Eigen::Index at = 0;
    for (auto& l : layers_) {
      l.weight.reshaped() = flat.segment(at, l.weight.size());
      at += l.weight.size();
      l.bias = flat.segment(at, l.bias.size());
      at += l.bias.size();
    }
  }

  ModelParams& operator+=(const ModelParams& o) {
    for (int i = 0; i < num_layers(); ++i) {
      layer(i).weight += o.layer(i).weight;
      layer(i).bias += o.layer(i).bias;
    }
    return *this;
  }

  ModelParams& operator*=(Scalar s) {
    for (auto& l : layers_) {
      l.weight *= s;
      l.bias *= s;
    }
    return *this;
  }

  /// this += s * o
  void axpy(Scalar s, const ModelParams& o) {
    for (int i = 0; i < num_layers(); ++i) {
      layer(i).weight.noalias() += s * o.layer(i).weight;
      layer(i).bias.noalias() += s * o.layer(i).bias;
    }
  }

  template <class Other>
  ModelParams<Other> cast() const {
    std::vector<DenseLayer<Other>> out;
    out.reserve(layers_.size());
    for (const auto& l : layers_)
      out.push_back({l.weight.template cast<Other>(), l.bias.template cast<Other>(), l.activation});
    return ModelParams<Other>(std::move(out), split_index_);
  }

  void validate() const {
    const int n = num_layers();
    if (n < 2) throw ShapeError("model needs at least two layers, got " + std::to_string(n));
    if (split_index_ < 1 || split_index_ > n - 1)
      throw ShapeError("split index " + std::to_string(split_index_) + " outside [1, " +
                       std::to_string(n - 1) + "]");
    for (int i = 0; i < n; ++i) {
      const auto& l = layer(i);
      if (l.bias.size() != l.weight.rows())
        throw ShapeError("layer " + std::to_string(i) + " bias length " +
                         std::to_string(l.bias.size()) + " != weight rows " +
                         std::to_string(l.weight.rows()));
      if (i + 1 < n && l.out_width() != layer(i + 1).in_width())
        throw ShapeError("layer " + std::to_string(i) + " outputs " +
                         std::to_string(l.out_width()) + " but layer " + std::to_string(i + 1) +
                         " expects " + std::to_string(layer(i + 1).in_width()));
    }
  }

 private:
  std::vector<DenseLayer<Scalar>> layers_;
  int split_index_ = 1;
};

template <class Scalar>
bool operator==(const ModelParams<Scalar>& a, const ModelParams<Scalar>& b) {
  if (!a.same_shape(b)) return false;
  for (int i = 0; i < a.num_layers(); ++i) {
    if (a.layer(i).activation != b.layer(i).activation) return false;
    if (a.layer(i).weight != b.layer(i).weight || a.layer(i).bias != b.layer(i).bias)
      return false;
  }
  return true;
}

/// Architecture description: widths[0] is the input width, widths.back() the
/// number of classes. Hidden layers use `hidden`, the output layer is linear.
struct Architecture {
  std::vector<int> widths;
  Activation hidden = Activation::kTanh;
  int split_index = 1;

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
};

/// Glorot-uniform weights, zero biases.
template <class Scalar = Real>
ModelParams<Scalar> init_model(const Architecture& arch, Rng& rng) {
  if (arch.widths.size() < 3)
    throw ShapeError("architecture needs input, at least one hidden and an output width");
  std::vector<DenseLayer<Scalar>> layers;
  const int n = arch.num_layers();
  for (int i = 0; i < n; ++i) {
    const int in = arch.widths[static_cast<std::size_t>(i)];
    const int out = arch.widths[static_cast<std::size_t>(i + 1)];
    if (in < 1 || out < 1) throw ShapeError("layer widths must be positive");
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    DenseLayer<Scalar> l;
    l.weight.resize(out, in);
    for (Eigen::Index c = 0; c < l.weight.cols(); ++c)
      for (Eigen::Index r = 0; r < l.weight.rows(); ++r) l.weight(r, c) = static_cast<Scalar>(u(rng));
    l.bias = Vec<Scalar>::Zero(out);
    l.activation = (i == n - 1) ? Activation::kLinear : arch.hidden;
    layers.push_back(std::move(l));
  }
  return ModelParams<Scalar>(std::move(layers), arch.split_index);
}

// ---------------------------------------------------------------------------
// Forward / backward over contiguous layer ranges. Rows are samples.

template <class Scalar>
void apply_activation(Activation a, Mat<Scalar>& z) {
  switch (a) {
    case Activation::kLinear: break;
    case Activation::kTanh: z = z.array().tanh().matrix(); break;
    case Activation::kRelu: z = z.cwiseMax(Scalar(0)); break;
  }
}

// d(act)/dz expressed through the activation output.
template <class Scalar>
void scale_by_activation_derivative(Activation a, const Mat<Scalar>& out, Mat<Scalar>& grad) {
  switch (a) {
    case Activation::kLinear: break;
    case Activation::kTanh: grad.array() *= (Scalar(1) - out.array().square()); break;
    case Activation::kRelu: grad.array() *= (out.array() > Scalar(0)).template cast<Scalar>(); break;
  }
}

/// Per-layer inputs and outputs recorded by a forward pass, needed by backward.
template <class Scalar>
struct ForwardTrace {
  int begin = 0;
  std::vector<Mat<Scalar>> inputs;
  std::vector<Mat<Scalar>> outputs;
};

template <class Scalar>
Mat<Scalar> forward_range(const ModelParams<Scalar>& model, const Mat<Scalar>& input, int begin,
                          int end, ForwardTrace<Scalar>* trace = nullptr) {
  if (begin < end && input.cols() != model.layer(begin).in_width())
    throw ShapeError("layer " + std::to_string(begin) + " expects width " +
                     std::to_string(model.layer(begin).in_width()) + ", got input " +
                     dims_str(input.rows(), input.cols()));
  if (trace) {
    trace->begin = begin;
    trace->inputs.clear();
    trace->outputs.clear();
  }
  Mat<Scalar> a = input;
  for (int i = begin; i < end; ++i) {
    const auto& l = model.layer(i);
    Mat<Scalar> z = a * l.weight.transpose();
    z.rowwise() += l.bias.transpose();
    apply_activation(l.activation, z);
    if (trace) {
      trace->inputs.push_back(std::move(a));
      trace->outputs.push_back(z);
    }
    a = std::move(z);
  }
  return a;
}

/// Back-propagates `grad_out` (dL/d output of layer end-1) through the traced
/// range. Parameter gradients are accumulated into `grads` when non-null;
/// returns dL/d input of the first traced layer.
template <class Scalar>
Mat<Scalar> backward_range(const ModelParams<Scalar>& model, const ForwardTrace<Scalar>& trace,
                           Mat<Scalar> grad_out, ModelParams<Scalar>* grads) {
  const int count = static_cast<int>(trace.outputs.size());
  for (int k = count - 1; k >= 0; --k) {
    const int i = trace.begin + k;
    const auto& l = model.layer(i);
    scale_by_activation_derivative(l.activation, trace.outputs[static_cast<std::size_t>(k)],
                                   grad_out);
    if (grads) {
      grads->layer(i).weight.noalias() +=
          grad_out.transpose() * trace.inputs[static_cast<std::size_t>(k)];
      grads->layer(i).bias.noalias() += grad_out.colwise().sum().transpose();
    }
    grad_out = grad_out * l.weight;
  }
  return grad_out;
}

/// Activations at the split layer for every input row.
template <class Scalar>
Mat<Scalar> forward_front(const ModelParams<Scalar>& model, const Mat<Scalar>& inputs) {
  if (inputs.cols() != model.input_width())
    throw ShapeError("forward_front: input is " + dims_str(inputs.rows(), inputs.cols()) +
                     " but model input width is " + std::to_string(model.input_width()));
  return forward_range(model, inputs, 0, model.split_index());
}

/// Logits (no softmax) from split-layer activations.
template <class Scalar>
Mat<Scalar> forward_back(const ModelParams<Scalar>& model, const Mat<Scalar>& activations) {
  if (activations.cols() != model.feature_width())
    throw ShapeError("forward_back: activations are " +
                     dims_str(activations.rows(), activations.cols()) +
                     " but split-layer width is " + std::to_string(model.feature_width()));
  return forward_range(model, activations, model.split_index(), model.num_layers());
}

template <class Scalar>
Mat<Scalar> forward_full(const ModelParams<Scalar>& model, const Mat<Scalar>& inputs) {
  if (inputs.cols() != model.input_width())
    throw ShapeError("forward: input is " + dims_str(inputs.rows(), inputs.cols()) +
                     " but model input width is " + std::to_string(model.input_width()));
  return forward_range(model, inputs, 0, model.num_layers());
}

}  // namespace flea
