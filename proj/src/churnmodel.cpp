#include "churnemb/churnmodel.hpp"

#include "churnemb/errors.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>

namespace churnemb {

void ModelDims::validate() const {
  if (d < 1 || m < 1 || l_p < 1 || l_n < 1 || pred_hidden < 1 || vocab < 0) {
    throw ConfigError("model dimensions must be positive");
  }
}

namespace {

std::vector<int> chain(int in, int width, int depth) {
  std::vector<int> dims{in};
  for (int k = 0; k < depth; ++k) dims.push_back(width);
  return dims;
}

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, Rng& rng) {
  dims.validate();
  ModelParams p;
  p.embed = DenseStack::glorot(chain(dims.d, dims.m, dims.l_p), rng);
  p.pred = DenseStack::glorot(chain(dims.m, dims.pred_hidden, dims.l_n), rng);
  const double ws_limit = std::sqrt(6.0 / (dims.pred_hidden + 1.0));
  p.w_s.resize(dims.pred_hidden);
  for (Eigen::Index i = 0; i < p.w_s.size(); ++i) p.w_s[i] = uniform_real(rng, -ws_limit, ws_limit);
  p.ctx.resize(dims.vocab, dims.m);
  const double ctx_limit = std::sqrt(6.0 / (dims.vocab + dims.m));
  for (Eigen::Index i = 0; i < p.ctx.size(); ++i) {
    p.ctx.data()[i] = uniform_real(rng, -ctx_limit, ctx_limit);
  }
  return p;
}

ModelParams ModelParams::zeros_like() const {
  ModelParams z;
  z.embed = DenseStack(embed.dims());
  z.pred = DenseStack(pred.dims());
  z.w_s = Eigen::VectorXd::Zero(w_s.size());
  z.ctx = ContextTable::Zero(ctx.rows(), ctx.cols());
  return z;
}

ModelDims ModelParams::dims() const {
  ModelDims d;
  d.d = embed.input_dim();
  d.m = embed.output_dim();
  d.l_p = embed.depth();
  d.l_n = pred.depth();
  d.pred_hidden = pred.output_dim();
  d.vocab = static_cast<int>(ctx.rows());
  return d;
}

std::vector<std::span<double>> ModelParams::blocks() {
  auto out = parameter_blocks(embed);
  for (auto b : parameter_blocks(pred)) out.push_back(b);
  out.emplace_back(w_s.data(), static_cast<std::size_t>(w_s.size()));
  out.emplace_back(ctx.data(), static_cast<std::size_t>(ctx.size()));
  return out;
}

std::vector<std::size_t> ModelParams::block_sizes() const {
  std::vector<std::size_t> out;
  for (const auto* s : {&embed, &pred}) {
    for (const auto& l : s->layers) {
      out.push_back(static_cast<std::size_t>(l.weight.size()));
      out.push_back(static_cast<std::size_t>(l.bias.size()));
    }
  }
  out.push_back(static_cast<std::size_t>(w_s.size()));
  out.push_back(static_cast<std::size_t>(ctx.size()));
  return out;
}

void LossWeights::validate() const {
  if (alpha < 0 || beta < 0 || gamma < 0) throw ConfigError("loss weights must be >= 0");
  for (double l : lambda) {
    if (l < 0) throw ConfigError("regularization weights must be >= 0");
  }
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

Eigen::VectorXd embed_edge(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& z) {
  return forward_one(params.embed, z);
}

double predict_churn(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& z) {
  const Eigen::VectorXd h = forward_one(params.pred, embed_edge(params, z));
  return sigmoid(h.dot(params.w_s));
}

Eigen::VectorXd predict_churn_batch(const ModelParams& params,
                                    const Eigen::Ref<const Eigen::MatrixXd>& z) {
  const auto e = forward(params.embed, z);
  const auto h = forward(params.pred, e.output());
  Eigen::VectorXd s = h.output().transpose() * params.w_s;
  for (Eigen::Index i = 0; i < s.size(); ++i) s[i] = sigmoid(s[i]);
  return s;
}

namespace {

void check_example(const ModelParams& params, const TrainingExample& ex) {
  const int d = params.embed.input_dim();
  if (ex.z.size() != d) {
    throw DimensionError("example z has length " + std::to_string(ex.z.size()) +
                         ", model expects " + std::to_string(d));
  }
  if (ex.in_d) {
    if (!ex.z_next || ex.z_next->size() != d) {
      throw ContractViolation("in_d example lacks z_next");
    }
    if (ex.delta_hinge == 0 && (!ex.z_tuv || ex.z_tuv->size() != d)) {
      throw ContractViolation("censored in_d example lacks z_tuv");
    }
  }
}

// One pass of a set of z columns through g and f.
struct Pass {
  std::vector<int> owner;
  ForwardCache embed;
  ForwardCache pred;
  Eigen::VectorXd f;

  bool empty() const { return owner.empty(); }
  const Eigen::MatrixXd& embedding() const { return embed.output(); }
};

Pass run_pass(const ModelParams& params, const Eigen::MatrixXd& z, std::vector<int> owner) {
  Pass p;
  p.owner = std::move(owner);
  if (p.owner.empty()) return p;
  p.embed = forward(params.embed, z);
  p.pred = forward(params.pred, p.embed.output());
  p.f = p.pred.output().transpose() * params.w_s;
  for (Eigen::Index i = 0; i < p.f.size(); ++i) p.f[i] = sigmoid(p.f[i]);
  return p;
}

struct Passes {
  Pass current;               // z^(i) for every example
  Pass next;                  // z^(i+1) for in_d examples
  Pass reference;             // z^(t_uv) for censored in_d examples
  std::vector<int> next_col;  // example -> column in `next`, or -1
  std::vector<int> ref_col;
};

Passes run_passes(const ModelParams& params, std::span<const TrainingExample> batch) {
  const int d = params.embed.input_dim();
  const int n = static_cast<int>(batch.size());
  Passes out;
  out.next_col.assign(n, -1);
  out.ref_col.assign(n, -1);
  std::vector<int> cur_owner;
  std::vector<int> next_owner;
  std::vector<int> ref_owner;
  for (int b = 0; b < n; ++b) {
    check_example(params, batch[b]);
    cur_owner.push_back(b);
    if (batch[b].in_d) {
      out.next_col[b] = static_cast<int>(next_owner.size());
      next_owner.push_back(b);
      if (batch[b].delta_hinge == 0) {
        out.ref_col[b] = static_cast<int>(ref_owner.size());
        ref_owner.push_back(b);
      }
    }
  }
  Eigen::MatrixXd z0(d, n);
  for (int b = 0; b < n; ++b) z0.col(b) = batch[b].z;
  Eigen::MatrixXd z1(d, static_cast<Eigen::Index>(next_owner.size()));
  for (std::size_t j = 0; j < next_owner.size(); ++j) {
    z1.col(static_cast<Eigen::Index>(j)) = *batch[next_owner[j]].z_next;
  }
  Eigen::MatrixXd z2(d, static_cast<Eigen::Index>(ref_owner.size()));
  for (std::size_t j = 0; j < ref_owner.size(); ++j) {
    z2.col(static_cast<Eigen::Index>(j)) = *batch[ref_owner[j]].z_tuv;
  }
  out.current = run_pass(params, z0, std::move(cur_owner));
  out.next = run_pass(params, z1, std::move(next_owner));
  out.reference = run_pass(params, z2, std::move(ref_owner));
  return out;
}

void check_ids(const ModelParams& params, int ctx_id, std::span<const int> negatives) {
  const auto v = params.ctx.rows();
  if (ctx_id < 0 || ctx_id >= v) {
    throw RangeError("context id " + std::to_string(ctx_id) + " outside vocabulary of " +
                     std::to_string(v));
  }
  for (int id : negatives) {
    if (id < 0 || id >= v) throw RangeError("negative id " + std::to_string(id) + " out of range");
  }
}

// log-likelihood of one context and its gradient w.r.t. the embedding (de) and
// the touched ctx rows (accumulated into dctx with factor `scale`).
double context_term(const ModelParams& params, const Eigen::Ref<const Eigen::VectorXd>& e,
                    int ctx_id, std::span<const int> negatives, ContextMode mode,
                    double scale, Eigen::VectorXd* de, ContextTable* dctx) {
  check_ids(params, ctx_id, negatives);
  if (mode == ContextMode::FullSoftmax) {
    if (params.ctx.rows() > kFullSoftmaxLimit) {
      throw ContractViolation("full softmax mode is limited to vocabularies of " +
                              std::to_string(kFullSoftmaxLimit));
    }
    const Eigen::VectorXd scores = params.ctx * e;
    const double mx = scores.maxCoeff();
    const Eigen::ArrayXd ex = (scores.array() - mx).exp();
    const double z = ex.sum();
    const double ll = scores[ctx_id] - mx - std::log(z);
    if (de || dctx) {
      Eigen::VectorXd prob = ex.matrix() / z;
      // d(ll)/d(scores) = onehot - prob
      Eigen::VectorXd ds = -prob;
      ds[ctx_id] += 1.0;
      if (de) *de += scale * (params.ctx.transpose() * ds);
      if (dctx) *dctx += scale * ds * e.transpose();
    }
    return ll;
  }
  const double sc = params.ctx.row(ctx_id).dot(e);
  double ll = log_sigmoid(sc);
  if (de || dctx) {
    const double g = 1.0 - sigmoid(sc);  // d log sigma(s) / ds
    if (de) *de += scale * g * params.ctx.row(ctx_id).transpose();
    if (dctx) dctx->row(ctx_id) += scale * g * e.transpose();
  }
  for (int id : negatives) {
    const double sn = params.ctx.row(id).dot(e);
    ll += log_sigmoid(-sn);
    if (de || dctx) {
      const double g = -sigmoid(sn);  // d log sigma(-s) / ds
      if (de) *de += scale * g * params.ctx.row(id).transpose();
      if (dctx) dctx->row(id) += scale * g * e.transpose();
    }
  }
  return ll;
}

std::span<const int> negatives_for(const TrainingExample& ex, std::size_t k, ContextMode mode) {
  if (k < ex.negative_ids.size()) return ex.negative_ids[k];
  if (mode == ContextMode::NegativeSampling) {
    throw ContractViolation("context without negative samples");
  }
  return {};
}

double sum_sq(const Eigen::MatrixXd& m) { return m.squaredNorm(); }

LossBreakdown evaluate(const ModelParams& params, std::span<const TrainingExample> batch,
                       const LossWeights& weights, ModelGrads* grads,
                       const LossOptions& options) {
  weights.validate();
  if (batch.empty()) throw ContractViolation("loss of an empty batch");
  const Passes passes = run_passes(params, batch);
  const int n = static_cast<int>(batch.size());
  const auto m = params.embed.output_dim();

  const double cs = options.supervised ? 1.0 : 0.0;
  int context_terms = 0;
  int temporal_terms = 0;
  for (const auto& ex : batch) {
    if (ex.delta_curr != 1) continue;
    // One log-sigmoid per true context and per negative; one log-softmax per
    // context in the exact mode.
    for (std::size_t k = 0; k < ex.context_ids.size(); ++k) {
      context_terms += options.context_mode == ContextMode::FullSoftmax
                           ? 1
                           : 1 + static_cast<int>(k < ex.negative_ids.size()
                                                      ? ex.negative_ids[k].size()
                                                      : 0);
    }
  }
  for (const auto& ex : batch) {
    temporal_terms += ex.in_d ? 1 : 0;
  }
  const bool per_term = options.scaling == LossScaling::PerTerm;
  const double su = per_term && context_terms > 0 ? 1.0 / context_terms : 1.0;
  const double st = per_term && temporal_terms > 0 ? 1.0 / temporal_terms : 1.0;
  const double cu = options.unsupervised ? weights.alpha * su : 0.0;
  const double ct = options.temporal ? weights.beta * st : 0.0;
  const double cr = options.regularization ? weights.gamma : 0.0;

  Eigen::VectorXd df0 = Eigen::VectorXd::Zero(passes.current.owner.size());
  Eigen::VectorXd df1 = Eigen::VectorXd::Zero(passes.next.owner.size());
  Eigen::VectorXd df2 = Eigen::VectorXd::Zero(passes.reference.owner.size());
  Eigen::MatrixXd de0 = Eigen::MatrixXd::Zero(m, passes.current.owner.size());
  Eigen::MatrixXd de1 = Eigen::MatrixXd::Zero(m, passes.next.owner.size());
  Eigen::MatrixXd de2 = Eigen::MatrixXd::Zero(m, passes.reference.owner.size());

  LossBreakdown out;

  // Supervised.
  int labelled = 0;
  for (int b = 0; b < n; ++b) labelled += batch[b].delta_next == 1 ? 1 : 0;
  double ls = 0.0;
  for (int b = 0; b < n; ++b) {
    if (batch[b].delta_next != 1) continue;
    const double r = static_cast<double>(batch[b].label) - passes.current.f[b];
    ls += r * r;
    if (grads) df0[b] += cs * (-2.0 * r / labelled);
  }
  out.supervised = labelled > 0 ? ls / labelled : 0.0;
  out.supervised_count = labelled;

  // Unsupervised.
  double lu = 0.0;
  Eigen::VectorXd de;
  for (int b = 0; b < n; ++b) {
    const auto& ex = batch[b];
    if (ex.delta_curr != 1 || ex.context_ids.empty()) continue;
    const auto e = passes.current.embedding().col(b);
    de = Eigen::VectorXd::Zero(m);
    for (std::size_t k = 0; k < ex.context_ids.size(); ++k) {
      // Loss is the negated log-likelihood, hence the -cu scale.
      lu -= context_term(params, e, ex.context_ids[k],
                         negatives_for(ex, k, options.context_mode), options.context_mode,
                         -cu, grads && cu != 0.0 ? &de : nullptr,
                         grads && cu != 0.0 ? &grads->ctx : nullptr);
    }
    if (grads && cu != 0.0) de0.col(b) += de;
  }
  out.unsupervised = lu * su;

  // Temporal: smoothness of g and the hinge on f.
  double lt = 0.0;
  for (int b = 0; b < n; ++b) {
    const int j = passes.next_col[b];
    if (j < 0) continue;
    const Eigen::VectorXd diff =
        passes.next.embedding().col(j) - passes.current.embedding().col(b);
    const double norm = diff.norm();
    lt += norm;
    if (grads && ct != 0.0 && norm > 0.0) {
      de1.col(j) += ct * diff / norm;
      de0.col(b) -= ct * diff / norm;
    }
    const int r = passes.ref_col[b];
    const double f_ref = r < 0 ? passes.current.f[b] : passes.reference.f[r];
    const double gap = f_ref - passes.next.f[j];
    if (gap > 0.0) {
      lt += gap;
      if (grads && ct != 0.0) {
        (r < 0 ? df0[b] : df2[r]) += ct;
        df1[j] -= ct;
      }
    }
  }
  out.temporal = lt * st;

  // Regularization.
  double lr = 0.0;
  for (const auto& l : params.embed.layers) {
    lr += weights.lambda[0] * sum_sq(l.weight) + weights.lambda[1] * l.bias.squaredNorm();
  }
  for (const auto& l : params.pred.layers) {
    lr += weights.lambda[2] * sum_sq(l.weight) + weights.lambda[3] * l.bias.squaredNorm();
  }
  lr += weights.lambda[4] * params.w_s.squaredNorm();
  out.regularization = lr;

  out.total = out.supervised + weights.alpha * out.unsupervised + weights.beta * out.temporal +
              weights.gamma * out.regularization;
  if (!std::isfinite(out.total)) throw DivergenceError("non-finite loss");
  if (!grads) return out;

  // Back through f then g for each pass.
  auto backprop = [&](const Pass& pass, const Eigen::VectorXd& df, Eigen::MatrixXd& dE) {
    if (pass.empty()) return;
    const Eigen::ArrayXd ds = df.array() * pass.f.array() * (1.0 - pass.f.array());
    const Eigen::MatrixXd& h = pass.pred.output();
    grads->w_s += h * ds.matrix();
    const Eigen::MatrixXd dh = params.w_s * ds.matrix().transpose();
    dE += backward_accumulate(params.pred, pass.pred, dh, grads->pred);
    backward_accumulate(params.embed, pass.embed, dE, grads->embed);
  };
  backprop(passes.current, df0, de0);
  backprop(passes.next, df1, de1);
  backprop(passes.reference, df2, de2);

  if (cr != 0.0) {
    for (std::size_t k = 0; k < params.embed.layers.size(); ++k) {
      grads->embed.layers[k].weight += 2.0 * cr * weights.lambda[0] * params.embed.layers[k].weight;
      grads->embed.layers[k].bias += 2.0 * cr * weights.lambda[1] * params.embed.layers[k].bias;
    }
    for (std::size_t k = 0; k < params.pred.layers.size(); ++k) {
      grads->pred.layers[k].weight += 2.0 * cr * weights.lambda[2] * params.pred.layers[k].weight;
      grads->pred.layers[k].bias += 2.0 * cr * weights.lambda[3] * params.pred.layers[k].bias;
    }
    grads->w_s += 2.0 * cr * weights.lambda[4] * params.w_s;
  }
  return out;
}

}  // namespace

SupervisedLoss supervised_loss(const ModelParams& params, std::span<const TrainingExample> batch) {
  if (batch.empty()) throw ContractViolation("supervised loss of an empty batch");
  SupervisedLoss out;
  for (const auto& ex : batch) {
    if (ex.delta_next != 1) continue;
    if (ex.z.size() != params.embed.input_dim()) throw DimensionError("example z length");
    const double r = static_cast<double>(ex.label) - predict_churn(params, ex.z);
    out.value += r * r;
    ++out.count;
  }
  if (out.count > 0) out.value /= out.count;
  return out;
}

double context_log_likelihood(const ModelParams& params,
                              const Eigen::Ref<const Eigen::VectorXd>& embedding, int ctx_id,
                              std::span<const int> negative_ids, ContextMode mode) {
  if (embedding.size() != params.ctx.cols()) throw DimensionError("embedding width");
  return context_term(params, embedding, ctx_id, negative_ids, mode, 0.0, nullptr, nullptr);
}

double unsupervised_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                         ContextMode mode) {
  double total = 0.0;
  for (const auto& ex : batch) {
    if (ex.delta_curr != 1 || ex.context_ids.empty()) continue;
    const Eigen::VectorXd e = embed_edge(params, ex.z);
    for (std::size_t k = 0; k < ex.context_ids.size(); ++k) {
      total -= context_log_likelihood(params, e, ex.context_ids[k], negatives_for(ex, k, mode),
                                      mode);
    }
  }
  return total;
}

double temporal_loss(const ModelParams& params, std::span<const TrainingExample> batch) {
  double total = 0.0;
  for (const auto& ex : batch) {
    if (!ex.in_d) continue;
    check_example(params, ex);
    const double f_ref = ex.delta_hinge == 1 ? predict_churn(params, ex.z)
                                             : predict_churn(params, *ex.z_tuv);
    total += temporal_term(embed_edge(params, ex.z), embed_edge(params, *ex.z_next), f_ref,
                           predict_churn(params, *ex.z_next));
  }
  return total;
}

double temporal_term(const Eigen::Ref<const Eigen::VectorXd>& g_i,
                     const Eigen::Ref<const Eigen::VectorXd>& g_next, double f_ref, double f_next) {
  if (g_i.size() != g_next.size()) throw DimensionError("embedding widths differ");
  return (g_next - g_i).norm() + std::max(0.0, f_ref - f_next);
}

double regularization_loss(const ModelParams& params, const LossWeights& weights) {
  double lr = 0.0;
  for (const auto& l : params.embed.layers) {
    lr += weights.lambda[0] * l.weight.squaredNorm() + weights.lambda[1] * l.bias.squaredNorm();
  }
  for (const auto& l : params.pred.layers) {
    lr += weights.lambda[2] * l.weight.squaredNorm() + weights.lambda[3] * l.bias.squaredNorm();
  }
  return lr + weights.lambda[4] * params.w_s.squaredNorm();
}

LossBreakdown total_loss_and_grads(const ModelParams& params,
                                   std::span<const TrainingExample> batch,
                                   const LossWeights& weights, ModelGrads& grads,
                                   const LossOptions& options) {
  if (grads.block_sizes() == params.block_sizes()) {
    for (auto block : grads.blocks()) std::fill(block.begin(), block.end(), 0.0);
  } else {
    grads = params.zeros_like();
  }
  return evaluate(params, batch, weights, &grads, options);
}

LossBreakdown accumulate_loss_and_grads(const ModelParams& params,
                                        std::span<const TrainingExample> batch,
                                        const LossWeights& weights, ModelGrads& grads,
                                        const LossOptions& options) {
  if (grads.block_sizes() != params.block_sizes()) {
    throw DimensionError("gradient buffer does not match the model");
  }
  return evaluate(params, batch, weights, &grads, options);
}

LossBreakdown total_loss(const ModelParams& params, std::span<const TrainingExample> batch,
                         const LossWeights& weights, const LossOptions& options) {
  return evaluate(params, batch, weights, nullptr, options);
}

std::vector<int> touched_context_rows(std::span<const TrainingExample> batch, int vocab,
                                      ContextMode mode) {
  std::vector<int> rows;
  bool any = false;
  for (const auto& ex : batch) {
    if (ex.delta_curr != 1 || ex.context_ids.empty()) continue;
    any = true;
    if (mode == ContextMode::FullSoftmax) break;
    rows.insert(rows.end(), ex.context_ids.begin(), ex.context_ids.end());
    for (const auto& neg : ex.negative_ids) rows.insert(rows.end(), neg.begin(), neg.end());
  }
  if (mode == ContextMode::FullSoftmax) {
    rows.clear();
    if (any) {
      rows.resize(static_cast<std::size_t>(vocab));
      std::iota(rows.begin(), rows.end(), 0);
    }
    return rows;
  }
  std::sort(rows.begin(), rows.end());
  rows.erase(std::unique(rows.begin(), rows.end()), rows.end());
  return rows;
}

// ---- checkpoint -------------------------------------------------------------

namespace {

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

void save_checkpoint(std::ostream& out, const ModelParams& params) {
  out << "churnemb-checkpoint format_version=" << kCheckpointFormatVersion
      << " l_p=" << params.embed.depth() << " l_n=" << params.pred.depth()
      << " embed_dims=" << join(params.embed.dims()) << " pred_dims=" << join(params.pred.dims())
      << " vocab=" << params.ctx.rows() << '\n';
  for (const auto* stack : {&params.embed, &params.pred}) {
    for (const auto& l : stack->layers) {
      write_matrix(out, l.weight);
      write_matrix(out, l.bias);
    }
  }
  write_matrix(out, params.w_s);
  write_matrix(out, params.ctx);
}

ModelParams load_checkpoint(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError("empty checkpoint");
  std::istringstream head(line);
  std::string magic;
  head >> magic;
  if (magic != "churnemb-checkpoint") throw ParseError("not a churnemb checkpoint");
  int version = -1;
  int l_p = -1;
  int l_n = -1;
  std::vector<int> embed_dims;
  std::vector<int> pred_dims;
  std::string kv;
  try {
    while (head >> kv) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ParseError("bad checkpoint header field " + kv);
      const auto key = kv.substr(0, eq);
      const auto value = kv.substr(eq + 1);
      if (key == "format_version") version = std::stoi(value);
      else if (key == "l_p") l_p = std::stoi(value);
      else if (key == "l_n") l_n = std::stoi(value);
      else if (key == "embed_dims") embed_dims = split_ints(value);
      else if (key == "pred_dims") pred_dims = split_ints(value);
    }
  } catch (const std::invalid_argument&) {
    throw ParseError("bad checkpoint header");
  }
  if (version != kCheckpointFormatVersion) {
    throw ParseError("unsupported checkpoint format_version " + std::to_string(version));
  }
  if (static_cast<int>(embed_dims.size()) != l_p + 1 ||
      static_cast<int>(pred_dims.size()) != l_n + 1) {
    throw ParseError("checkpoint header dims disagree with layer counts");
  }
  ModelParams p;
  p.embed = DenseStack(embed_dims);
  p.pred = DenseStack(pred_dims);
  for (auto* stack : {&p.embed, &p.pred}) {
    for (auto& l : stack->layers) {
      auto w = read_matrix(in);
      auto b = read_matrix(in);
      if (w.rows() != l.weight.rows() || w.cols() != l.weight.cols() ||
          b.rows() != l.bias.size() || b.cols() != 1) {
        throw ParseError("checkpoint layer shape mismatch");
      }
      l.weight = std::move(w);
      l.bias = b.col(0);
    }
  }
  const auto ws = read_matrix(in);
  if (ws.cols() != 1 || ws.rows() != p.pred.output_dim()) throw ParseError("checkpoint w_s shape");
  p.w_s = ws.col(0);
  p.ctx = read_matrix(in);
  if (p.ctx.rows() > 0 && p.ctx.cols() != p.embed.output_dim()) {
    throw ParseError("checkpoint context matrix width");
  }
  if (p.ctx.rows() == 0) p.ctx.resize(0, p.embed.output_dim());
  return p;
}

}  // namespace churnemb
