#include "churnemb/netcore.hpp"

#include "churnemb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>

namespace churnemb {

DenseStack::DenseStack(const std::vector<int>& dims) {
  if (dims.size() < 2) throw ConfigError("a dense stack needs at least one layer");
  for (std::size_t k = 1; k < dims.size(); ++k) {
    if (dims[k - 1] < 1 || dims[k] < 1) throw ConfigError("layer widths must be positive");
    layers.push_back({Eigen::MatrixXd::Zero(dims[k], dims[k - 1]),
                      Eigen::VectorXd::Zero(dims[k])});
  }
}

DenseStack DenseStack::glorot(const std::vector<int>& dims, Rng& rng) {
  DenseStack s(dims);
  for (auto& layer : s.layers) {
    const double limit =
        std::sqrt(6.0 / static_cast<double>(layer.weight.rows() + layer.weight.cols()));
    for (Eigen::Index i = 0; i < layer.weight.size(); ++i) {
      layer.weight.data()[i] = uniform_real(rng, -limit, limit);
    }
  }
  return s;
}

int DenseStack::input_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols());
}

int DenseStack::output_dim() const {
  return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows());
}

std::vector<int> DenseStack::dims() const {
  std::vector<int> d;
  if (layers.empty()) return d;
  d.push_back(input_dim());
  for (const auto& l : layers) d.push_back(static_cast<int>(l.weight.rows()));
  return d;
}

std::size_t DenseStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += l.weight.size() + l.bias.size();
  return n;
}

ForwardCache forward(const DenseStack& stack, const Eigen::Ref<const Eigen::MatrixXd>& input) {
  if (input.rows() != stack.input_dim()) {
    throw DimensionError("stack input has " + std::to_string(input.rows()) +
                         " rows, expected " + std::to_string(stack.input_dim()));
  }
  ForwardCache cache;
  cache.activations.reserve(stack.layers.size() + 1);
  cache.activations.emplace_back(input);
  for (const auto& layer : stack.layers) {
    Eigen::MatrixXd h = layer.weight * cache.activations.back();
    h.colwise() += layer.bias;
    cache.activations.emplace_back(h.cwiseMax(0.0));
  }
  return cache;
}

Eigen::VectorXd forward_one(const DenseStack& stack,
                            const Eigen::Ref<const Eigen::VectorXd>& input) {
  const Eigen::MatrixXd in = input;
  return forward(stack, in).output().col(0);
}

Eigen::MatrixXd backward_accumulate(const DenseStack& stack, const ForwardCache& cache,
                                    const Eigen::Ref<const Eigen::MatrixXd>& output_gradient,
                                    DenseStack& grads) {
  if (cache.activations.size() != stack.layers.size() + 1) {
    throw DimensionError("forward cache does not match stack depth");
  }
  if (output_gradient.rows() != cache.output().rows() ||
      output_gradient.cols() != cache.output().cols()) {
    throw DimensionError("output gradient shape does not match forward output");
  }
  if (grads.layers.size() != stack.layers.size()) {
    throw DimensionError("gradient accumulator does not match stack depth");
  }
  Eigen::MatrixXd delta = output_gradient;
  for (int k = stack.depth() - 1; k >= 0; --k) {
    const auto& out = cache.activations[k + 1];
    // ReLU derivative; taken as 0 at the kink.
    delta = (out.array() > 0.0).select(delta, 0.0);
    grads.layers[k].weight.noalias() += delta * cache.activations[k].transpose();
    grads.layers[k].bias += delta.rowwise().sum();
    delta = stack.layers[k].weight.transpose() * delta;
  }
  return delta;
}

BackwardResult backward(const DenseStack& stack, const ForwardCache& cache,
                        const Eigen::Ref<const Eigen::MatrixXd>& output_gradient) {
  BackwardResult r{DenseStack(stack.dims()), {}};
  r.input = backward_accumulate(stack, cache, output_gradient, r.params);
  return r;
}

std::vector<std::span<double>> parameter_blocks(DenseStack& stack) {
  std::vector<std::span<double>> out;
  for (auto& l : stack.layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

AdamState::AdamState(const std::vector<std::size_t>& block_sizes, AdamOptions options)
    : options_(options) {
  for (auto n : block_sizes) {
    m_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
    v_.push_back(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(n)));
  }
}

void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<double>> grads, AdamState& state, double lr,
               std::span<const SparseBlock> sparse) {
  if (params.size() != grads.size() || params.size() != state.m_.size()) {
    throw DimensionError("adam_step: parameter, gradient and state block counts differ");
  }
  std::vector<const std::vector<std::size_t>*> only(params.size(), nullptr);
  for (const auto& s : sparse) {
    if (s.block >= params.size()) throw DimensionError("adam_step: sparse block out of range");
    for (auto i : s.indices) {
      if (i >= params[s.block].size()) throw DimensionError("adam_step: sparse index out of range");
    }
    only[s.block] = &s.indices;
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (params[b].size() != grads[b].size() ||
        params[b].size() != static_cast<std::size_t>(state.m_[b].size())) {
      throw DimensionError("adam_step: block " + std::to_string(b) + " shape mismatch");
    }
    auto finite = [&](std::size_t i) {
      if (!std::isfinite(grads[b][i])) throw DivergenceError("non-finite gradient in Adam step");
    };
    if (only[b]) {
      for (auto i : *only[b]) finite(i);
    } else {
      for (std::size_t i = 0; i < grads[b].size(); ++i) finite(i);
    }
  }
  const auto& o = state.options_;
  ++state.step_;
  const double c1 = 1.0 - std::pow(o.beta1, static_cast<double>(state.step_));
  const double c2 = 1.0 - std::pow(o.beta2, static_cast<double>(state.step_));
  for (std::size_t b = 0; b < params.size(); ++b) {
    auto& m = state.m_[b];
    auto& v = state.v_[b];
    auto update = [&](std::size_t i) {
      const double g = grads[b][i];
      const auto ii = static_cast<Eigen::Index>(i);
      m[ii] = o.beta1 * m[ii] + (1.0 - o.beta1) * g;
      v[ii] = o.beta2 * v[ii] + (1.0 - o.beta2) * g * g;
      const double mhat = m[ii] / c1;
      const double vhat = v[ii] / c2;
      params[b][i] -= lr * mhat / (std::sqrt(vhat) + o.epsilon);
    };
    if (only[b]) {
      for (auto i : *only[b]) update(i);
    } else {
      for (std::size_t i = 0; i < params[b].size(); ++i) update(i);
    }
  }
}

double lr_at_epoch(const LrSchedule& schedule, int epoch) {
  if (epoch < 0) throw ContractViolation("epoch index must be >= 0");
  return schedule.eta0 / (1.0 + static_cast<double>(epoch) / 2.0);
}

std::vector<double> numeric_gradient(const std::function<double()>& loss,
                                     std::span<double> params, double h) {
  std::vector<double> g(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = loss();
    params[i] = keep - h;
    const double down = loss();
    params[i] = keep;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

double max_relative_error(std::span<const double> a, std::span<const double> b, double floor) {
  if (a.size() != b.size()) throw DimensionError("max_relative_error: length mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), floor});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

void write_matrix(std::ostream& out, const Eigen::MatrixXd& m) {
  out << m.rows() << ' ' << m.cols() << '\n';
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      out << (c ? " " : "") << m(r, c);
    }
    out << '\n';
  }
}

Eigen::MatrixXd read_matrix(std::istream& in) {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;
  if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
    throw ParseError("bad matrix header in checkpoint");
  }
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(in >> m(r, c))) throw ParseError("truncated matrix in checkpoint");
    }
  }
  return m;
}

}  // namespace churnemb
