#pragma once

// Small dense building blocks shared by the frame classifier and the
// sequence models: an LSTM cell with a hand-written batched backward pass,
// softmax/cross-entropy, Adam, and a finite-difference gradient checker.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "symplan/symbols.hpp"

namespace symplan::nn {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using ParamView = Eigen::Map<VectorXd>;

template <class Model>
std::vector<ParamView> param_views(Model& model) {
  std::vector<ParamView> out;
  model.for_each_param([&](auto& p) { out.emplace_back(p.data(), p.size()); });
  return out;
}

template <class Model>
Model zeros_like(const Model& model) {
  Model z = model;
  z.for_each_param([](auto& p) { p.setZero(); });
  return z;
}

template <class Model>
std::size_t parameter_count(const Model& model) {
  std::size_t n = 0;
  model.for_each_param([&](const auto& p) { n += static_cast<std::size_t>(p.size()); });
  return n;
}

// {"rows", "cols", "data"} with data in column-major order.
nlohmann::json matrix_to_json(const MatrixXd& m);
MatrixXd matrix_from_json(const nlohmann::json& j);
nlohmann::json vector_to_json(const VectorXd& v);
VectorXd vector_from_json(const nlohmann::json& j);

void uniform_fill(Eigen::Ref<MatrixXd> m, double bound, std::mt19937_64& rng);

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Column-wise softmax, numerically stabilized.
MatrixXd softmax_columns(const MatrixXd& logits);

// Mean cross-entropy of column-wise softmax(logits) against `targets`;
// `dlogits` (if given) receives d(sum CE)/d logits scaled by `scale`.
double cross_entropy(const MatrixXd& logits, std::span<const SymbolId> targets, double scale, MatrixXd* dlogits);

// Lowest index among maxima.
int argmax(const Eigen::Ref<const VectorXd>& v);

MatrixXd one_hot(std::span<const SymbolId> ids, int depth);

struct LstmParams {
  MatrixXd wx;  // 4H x I, gate blocks ordered input, forget, cell, output
  MatrixXd wh;  // 4H x H
  VectorXd b;   // 4H

  int input_dim() const { return static_cast<int>(wx.cols()); }
  int hidden_dim() const { return static_cast<int>(wh.cols()); }

  static LstmParams initialize(int input_dim, int hidden_dim, std::mt19937_64& rng);

  template <class F>
  void for_each_param(F&& f) {
    f(wx), f(wh), f(b);
  }
  template <class F>
  void for_each_param(F&& f) const {
    f(wx), f(wh), f(b);
  }
};

struct LstmStep {
  MatrixXd x, h_prev, c_prev;
  MatrixXd gates;  // activated i, f, g, o stacked (4H x B)
  MatrixXd c, h;
};

struct LstmTrace {
  std::vector<LstmStep> steps;
  const MatrixXd& h_last() const { return steps.back().h; }
  const MatrixXd& c_last() const { return steps.back().c; }
};

// One cell update for a batch (columns are sequences).
LstmStep lstm_step(const LstmParams& p, const MatrixXd& x, const MatrixXd& h_prev, const MatrixXd& c_prev);
LstmTrace lstm_forward(const LstmParams& p, std::span<const MatrixXd> xs, const MatrixXd& h0, const MatrixXd& c0);

struct LstmBackward {
  std::vector<MatrixXd> dxs;  // optional; filled when requested
  MatrixXd dh0, dc0;
};

// Backpropagates `dh` (per-step external gradient on h, may be empty
// matrices meaning zero) plus `dh_last`/`dc_last` on the final state.
LstmBackward lstm_backward(const LstmParams& p, const LstmTrace& trace, std::span<const MatrixXd> dh,
                           const MatrixXd& dh_last, const MatrixXd& dc_last, LstmParams& grad, bool want_dx);

// Adam with bias correction and global-norm gradient clipping.
class Adam {
 public:
  Adam(double lr, double clip_norm, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  template <class Model>
  void step(Model& model, Model& grad) {
    auto p = param_views(model);
    auto g = param_views(grad);
    apply(p, g);
  }

 private:
  void apply(std::vector<ParamView>& params, std::vector<ParamView>& grads);

  double lr_, clip_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<VectorXd> m_, v_;
};

// |a - b| / max(|a| + |b|, 1e-6).
double relative_error(double a, double b);

// Central-difference check of `loss_fn(model, Model* grad) -> double` over
// every parameter. Returns the maximum relative error.
template <class Model, class LossFn>
double finite_difference_check(Model model, LossFn&& loss_fn, double eps) {
  Model grad = zeros_like(model);
  loss_fn(model, &grad);
  auto params = param_views(model);
  auto grads = param_views(grad);
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    for (Eigen::Index i = 0; i < params[k].size(); ++i) {
      const double saved = params[k][i];
      params[k][i] = saved + eps;
      const double up = loss_fn(model, nullptr);
      params[k][i] = saved - eps;
      const double down = loss_fn(model, nullptr);
      params[k][i] = saved;
      worst = std::max(worst, relative_error(grads[k][i], (up - down) / (2.0 * eps)));
    }
  }
  return worst;
}

}  // namespace symplan::nn
