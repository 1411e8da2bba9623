#pragma once

#include "churnemb/rng.hpp"

#include <Eigen/Dense>

#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

namespace churnemb {

// h = relu(W x + b). W is fan_out x fan_in.
struct DenseLayer {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
};

// A chain of ReLU layers. dims = {input, hidden_1, ..., output}.
class DenseStack {
 public:
  DenseStack() = default;
  // Zero-initialized stack with the given layer widths.
  explicit DenseStack(const std::vector<int>& dims);
  // Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
  static DenseStack glorot(const std::vector<int>& dims, Rng& rng);

  int input_dim() const;
  int output_dim() const;
  int depth() const { return static_cast<int>(layers.size()); }
  std::vector<int> dims() const;
  std::size_t parameter_count() const;

  std::vector<DenseLayer> layers;
};

// Activations of every layer for a batch laid out one example per column.
// activations[0] is the input, activations[k] the output of layer k.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;
  const Eigen::MatrixXd& output() const { return activations.back(); }
};

ForwardCache forward(const DenseStack& stack, const Eigen::Ref<const Eigen::MatrixXd>& input);
// Single example.
Eigen::VectorXd forward_one(const DenseStack& stack, const Eigen::Ref<const Eigen::VectorXd>& input);

struct BackwardResult {
  DenseStack params;  // gradient with the same shapes as the stack
  Eigen::MatrixXd input;
};

// Gradients of sum(output_gradient .* output) through the stack.
BackwardResult backward(const DenseStack& stack, const ForwardCache& cache,
                        const Eigen::Ref<const Eigen::MatrixXd>& output_gradient);

// Same as backward() but adds parameter gradients into `grads` (already shaped
// like the stack) and returns the input gradient.
Eigen::MatrixXd backward_accumulate(const DenseStack& stack, const ForwardCache& cache,
                                    const Eigen::Ref<const Eigen::MatrixXd>& output_gradient,
                                    DenseStack& grads);

// Flat views over every parameter block, weights then bias per layer.
std::vector<std::span<double>> parameter_blocks(DenseStack& stack);

struct AdamOptions {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Restricts an update of one block to the listed flat indices; other entries
// keep their values and moments (lazy Adam, for embedding tables of which a
// batch touches a few rows).
struct SparseBlock {
  std::size_t block = 0;
  std::vector<std::size_t> indices;
};

class AdamState {
 public:
  AdamState() = default;
  AdamState(const std::vector<std::size_t>& block_sizes, AdamOptions options = {});

  long step() const { return step_; }
  const AdamOptions& options() const { return options_; }

  friend void adam_step(std::span<const std::span<double>> params,
                        std::span<const std::span<double>> grads, AdamState& state,
                        double lr, std::span<const SparseBlock> sparse);

 private:
  AdamOptions options_;
  long step_ = 0;
  std::vector<Eigen::VectorXd> m_;
  std::vector<Eigen::VectorXd> v_;
};

// One bias-corrected Adam update. Throws DivergenceError on a non-finite
// gradient, leaving params and state untouched.
void adam_step(std::span<const std::span<double>> params,
               std::span<const std::span<double>> grads, AdamState& state, double lr,
               std::span<const SparseBlock> sparse = {});

struct LrSchedule {
  double eta0 = 0.017;
};

// eta0 / (1 + k/2).
double lr_at_epoch(const LrSchedule& schedule, int epoch);

// Central-difference gradient of `loss` w.r.t. every value in `params`, which
// `loss` must read. Values are restored afterwards.
std::vector<double> numeric_gradient(const std::function<double()>& loss,
                                     std::span<double> params, double h = 1e-5);

// max_i |a_i - b_i| / max(|a_i|, |b_i|, floor).
double max_relative_error(std::span<const double> a, std::span<const double> b,
                          double floor = 1e-6);

// Plain-text matrix block: "rows cols" then row-major values at full precision.
void write_matrix(std::ostream& out, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix(std::istream& in);

}  // namespace churnemb
