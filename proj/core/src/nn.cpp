#include "symplan/nn.hpp"

#include <algorithm>

#include "symplan/error.hpp"

namespace symplan::nn {

nlohmann::json matrix_to_json(const MatrixXd& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<std::size_t>(rows * cols) != data.size())
    throw Error("matrix shape does not match its data");
  return Eigen::Map<const MatrixXd>(data.data(), rows, cols);
}

nlohmann::json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

VectorXd vector_from_json(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const VectorXd>(data.data(), static_cast<Eigen::Index>(data.size()));
}

void uniform_fill(Eigen::Ref<MatrixXd> m, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = u(rng);
}

MatrixXd softmax_columns(const MatrixXd& logits) {
  MatrixXd out(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const double mx = logits.col(j).maxCoeff();
    out.col(j) = (logits.col(j).array() - mx).exp();
    out.col(j) /= out.col(j).sum();
  }
  return out;
}

double cross_entropy(const MatrixXd& logits, std::span<const SymbolId> targets, double scale, MatrixXd* dlogits) {
  if (static_cast<std::size_t>(logits.cols()) != targets.size()) throw Error("cross_entropy: batch size mismatch");
  double loss = 0.0;
  if (dlogits) dlogits->resize(logits.rows(), logits.cols());
  for (Eigen::Index j = 0; j < logits.cols(); ++j) {
    const auto col = logits.col(j);
    const double mx = col.maxCoeff();
    const double lse = mx + std::log((col.array() - mx).exp().sum());
    const auto t = targets[static_cast<std::size_t>(j)];
    loss += lse - col(t);
    if (dlogits) {
      dlogits->col(j) = (col.array() - lse).exp() * scale;
      (*dlogits)(t, j) -= scale;
    }
  }
  return loss;
}

int argmax(const Eigen::Ref<const VectorXd>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v(i) > v(best)) best = static_cast<int>(i);
  return best;
}

MatrixXd one_hot(std::span<const SymbolId> ids, int depth) {
  MatrixXd m = MatrixXd::Zero(depth, static_cast<Eigen::Index>(ids.size()));
  for (std::size_t j = 0; j < ids.size(); ++j) {
    if (ids[j] < 0 || ids[j] >= depth) throw Error("one_hot: id out of range");
    m(ids[j], static_cast<Eigen::Index>(j)) = 1.0;
  }
  return m;
}

LstmParams LstmParams::initialize(int input_dim, int hidden_dim, std::mt19937_64& rng) {
  LstmParams p;
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden_dim));
  p.wx.resize(4 * hidden_dim, input_dim);
  p.wh.resize(4 * hidden_dim, hidden_dim);
  uniform_fill(p.wx, bound, rng);
  uniform_fill(p.wh, bound, rng);
  p.b = VectorXd::Zero(4 * hidden_dim);
  p.b.segment(hidden_dim, hidden_dim).setOnes();  // forget-gate bias
  return p;
}

LstmStep lstm_step(const LstmParams& p, const MatrixXd& x, const MatrixXd& h_prev, const MatrixXd& c_prev) {
  const Eigen::Index H = p.hidden_dim();
  LstmStep s;
  s.x = x;
  s.h_prev = h_prev;
  s.c_prev = c_prev;
  s.gates.noalias() = p.wx * x;
  s.gates.noalias() += p.wh * h_prev;
  s.gates.colwise() += p.b;
  auto sig = [](double v) { return sigmoid(v); };
  s.gates.topRows(2 * H) = s.gates.topRows(2 * H).unaryExpr(sig);
  s.gates.middleRows(2 * H, H) = s.gates.middleRows(2 * H, H).array().tanh();
  s.gates.bottomRows(H) = s.gates.bottomRows(H).unaryExpr(sig);
  const auto i = s.gates.topRows(H).array();
  const auto f = s.gates.middleRows(H, H).array();
  const auto g = s.gates.middleRows(2 * H, H).array();
  const auto o = s.gates.bottomRows(H).array();
  s.c = (f * c_prev.array() + i * g).matrix();
  s.h = (o * s.c.array().tanh()).matrix();
  return s;
}

LstmTrace lstm_forward(const LstmParams& p, std::span<const MatrixXd> xs, const MatrixXd& h0, const MatrixXd& c0) {
  LstmTrace trace;
  trace.steps.reserve(xs.size());
  const MatrixXd* h = &h0;
  const MatrixXd* c = &c0;
  for (const auto& x : xs) {
    trace.steps.push_back(lstm_step(p, x, *h, *c));
    h = &trace.steps.back().h;
    c = &trace.steps.back().c;
  }
  return trace;
}

LstmBackward lstm_backward(const LstmParams& p, const LstmTrace& trace, std::span<const MatrixXd> dh,
                           const MatrixXd& dh_last, const MatrixXd& dc_last, LstmParams& grad, bool want_dx) {
  const Eigen::Index H = p.hidden_dim();
  const auto T = trace.steps.size();
  LstmBackward out;
  if (want_dx) out.dxs.resize(T);
  MatrixXd dh_next = dh_last;
  MatrixXd dc_next = dc_last;
  MatrixXd dz(4 * H, dh_last.cols());
  for (std::size_t t = T; t-- > 0;) {
    const auto& s = trace.steps[t];
    MatrixXd dht = dh_next;
    if (t < dh.size() && dh[t].size() > 0) dht += dh[t];
    const auto i = s.gates.topRows(H).array();
    const auto f = s.gates.middleRows(H, H).array();
    const auto g = s.gates.middleRows(2 * H, H).array();
    const auto o = s.gates.bottomRows(H).array();
    const Eigen::ArrayXXd tc = s.c.array().tanh();
    const Eigen::ArrayXXd dc = dc_next.array() + dht.array() * o * (1.0 - tc.square());
    dz.topRows(H) = (dc * g * i * (1.0 - i)).matrix();
    dz.middleRows(H, H) = (dc * s.c_prev.array() * f * (1.0 - f)).matrix();
    dz.middleRows(2 * H, H) = (dc * i * (1.0 - g.square())).matrix();
    dz.bottomRows(H) = (dht.array() * tc * o * (1.0 - o)).matrix();
    grad.wx.noalias() += dz * s.x.transpose();
    grad.wh.noalias() += dz * s.h_prev.transpose();
    grad.b += dz.rowwise().sum();
    if (want_dx) out.dxs[t].noalias() = p.wx.transpose() * dz;
    dh_next.noalias() = p.wh.transpose() * dz;
    dc_next = (dc * f).matrix();
  }
  out.dh0 = std::move(dh_next);
  out.dc0 = std::move(dc_next);
  return out;
}

Adam::Adam(double lr, double clip_norm, double beta1, double beta2, double eps)
    : lr_(lr), clip_(clip_norm), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::apply(std::vector<ParamView>& params, std::vector<ParamView>& grads) {
  if (m_.empty()) {
    for (const auto& p : params) {
      m_.push_back(VectorXd::Zero(p.size()));
      v_.push_back(VectorXd::Zero(p.size()));
    }
  }
  double norm2 = 0.0;
  for (const auto& g : grads) norm2 += g.squaredNorm();
  const double norm = std::sqrt(norm2);
  const double scale = (clip_ > 0.0 && norm > clip_) ? clip_ / norm : 1.0;
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params.size(); ++k) {
    const VectorXd g = grads[k] * scale;
    m_[k] = beta1_ * m_[k] + (1.0 - beta1_) * g;
    v_[k] = beta2_ * v_[k] + (1.0 - beta2_) * g.cwiseProduct(g);
    params[k].array() -= lr_ * (m_[k].array() / c1) / ((v_[k].array() / c2).sqrt() + eps_);
  }
}

double relative_error(double a, double b) {
  // Floor keeps finite-difference round-off on near-zero gradients from dominating.
  return std::abs(a - b) / std::max(std::abs(a) + std::abs(b), 1e-6);
}

}  // namespace symplan::nn
