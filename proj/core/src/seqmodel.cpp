#include "symplan/seqmodel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <type_traits>

#include "symplan/envsim.hpp"
#include "symplan/error.hpp"
#include "symplan/io.hpp"

namespace symplan {

using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(ModelKind kind) { return kind == ModelKind::seq2seq ? "seq2seq" : "attn_lstm"; }

ModelKind parse_model_kind(std::string_view name) {
  if (name == "seq2seq") return ModelKind::seq2seq;
  if (name == "attn_lstm" || name == "attn-lstm") return ModelKind::attn_lstm;
  throw Error("unknown model kind '" + std::string(name) + "'");
}

Seq2SeqModel Seq2SeqModel::initialize(int input_dim, int latent, int num_symbols, std::uint64_t seed) {
  if (input_dim <= 0 || latent <= 0 || num_symbols <= 1) throw Error("seq2seq dimensions must be positive");
  std::mt19937_64 rng(seed);
  Seq2SeqModel m;
  m.encoder = nn::LstmParams::initialize(input_dim, latent, rng);
  m.decoder = nn::LstmParams::initialize(num_symbols + 1, latent, rng);
  m.proj_w.resize(num_symbols, latent);
  nn::uniform_fill(m.proj_w, 1.0 / std::sqrt(latent), rng);
  m.proj_b = VectorXd::Zero(num_symbols);
  return m;
}

AttnLstmModel AttnLstmModel::initialize(int input_dim, int latent, int num_symbols, std::uint64_t seed) {
  if (input_dim <= 0 || latent <= 0 || num_symbols <= 1) throw Error("attn_lstm dimensions must be positive");
  std::mt19937_64 rng(seed);
  AttnLstmModel m;
  const double bound = 1.0 / std::sqrt(latent);
  m.encoder = nn::LstmParams::initialize(input_dim, latent, rng);
  m.wq.resize(latent, latent);
  m.wk.resize(latent, latent);
  nn::uniform_fill(m.wq, bound, rng);
  nn::uniform_fill(m.wk, bound, rng);
  m.attn_b = VectorXd::Zero(latent);
  m.attn_v.resize(latent);
  nn::uniform_fill(m.attn_v, bound, rng);
  m.out_h.resize(num_symbols, latent);
  m.out_c.resize(num_symbols, latent);
  nn::uniform_fill(m.out_h, bound, rng);
  nn::uniform_fill(m.out_c, bound, rng);
  m.out_b = VectorXd::Zero(num_symbols);
  return m;
}

namespace {

void check_batch(const WindowBatch& batch, int input_dim) {
  if (batch.inputs.empty() || batch.size() == 0) throw Error("empty window batch");
  if (batch.targets.size() != batch.inputs.size()) throw Error("window inputs and targets differ in length");
  for (const auto& x : batch.inputs)
    if (x.rows() != input_dim || x.cols() != batch.size()) throw Error("window input dimension mismatch");
}

MatrixXd zeros(int rows, int cols) { return MatrixXd::Zero(rows, cols); }

// Shared forward pass of the attention model; `keep` retains what backward needs.
struct AttnForward {
  nn::LstmTrace enc;
  std::vector<MatrixXd> q, k;
  std::vector<std::vector<MatrixXd>> u;  // [i][j] tanh(q_i + k_j)
  std::vector<MatrixXd> alpha;           // [i] SL x B
  std::vector<MatrixXd> ctx;
  std::vector<MatrixXd> logits;
};

AttnForward attn_forward(const AttnLstmModel& m, const std::vector<MatrixXd>& inputs, bool keep) {
  const int steps = static_cast<int>(inputs.size());
  const int B = static_cast<int>(inputs.front().cols());
  const int L = m.latent();
  AttnForward f;
  f.enc = nn::lstm_forward(m.encoder, inputs, zeros(L, B), zeros(L, B));
  f.q.resize(steps);
  f.k.resize(steps);
  for (int j = 0; j < steps; ++j) {
    const auto& h = f.enc.steps[static_cast<std::size_t>(j)].h;
    f.q[j] = (m.wq * h).colwise() + m.attn_b;
    f.k[j] = m.wk * h;
  }
  if (keep) f.u.resize(steps);
  f.alpha.resize(steps);
  f.ctx.resize(steps);
  f.logits.resize(steps);
  MatrixXd e(steps, B);
  for (int i = 0; i < steps; ++i) {
    if (keep) f.u[i].resize(steps);
    for (int j = 0; j < steps; ++j) {
      MatrixXd u = (f.q[i] + f.k[j]).array().tanh().matrix();
      e.row(j) = m.attn_v.transpose() * u;
      if (keep) f.u[i][j] = std::move(u);
    }
    f.alpha[i] = nn::softmax_columns(e);
    f.ctx[i] = zeros(L, B);
    for (int j = 0; j < steps; ++j)
      f.ctx[i].array() += f.enc.steps[static_cast<std::size_t>(j)].h.array().rowwise() * f.alpha[i].row(j).array();
    const auto& h = f.enc.steps[static_cast<std::size_t>(i)].h;
    f.logits[i] = (m.out_h * h + m.out_c * f.ctx[i]).colwise() + m.out_b;
  }
  return f;
}

}  // namespace

double seq2seq_loss(const Seq2SeqModel& m, const WindowBatch& batch, Seq2SeqModel* grad) {
  check_batch(batch, m.input_dim());
  const int steps = batch.steps();
  const int B = batch.size();
  const int L = m.latent();
  const int V = m.num_symbols();
  const auto enc = nn::lstm_forward(m.encoder, batch.inputs, zeros(L, B), zeros(L, B));
  std::vector<MatrixXd> dec_in(static_cast<std::size_t>(steps));
  std::vector<SymbolId> prev(static_cast<std::size_t>(B), m.start_token());
  for (int i = 0; i < steps; ++i) {
    dec_in[static_cast<std::size_t>(i)] = nn::one_hot(prev, V + 1);
    prev = batch.targets[static_cast<std::size_t>(i)];
  }
  const auto dec = nn::lstm_forward(m.decoder, dec_in, enc.h_last(), enc.c_last());
  const double scale = 1.0 / (static_cast<double>(steps) * B);
  double loss = 0.0;
  std::vector<MatrixXd> dh(static_cast<std::size_t>(steps));
  MatrixXd dl;
  for (int i = 0; i < steps; ++i) {
    const auto& h = dec.steps[static_cast<std::size_t>(i)].h;
    const MatrixXd logits = (m.proj_w * h).colwise() + m.proj_b;
    loss += nn::cross_entropy(logits, batch.targets[static_cast<std::size_t>(i)], scale, grad ? &dl : nullptr);
    if (grad) {
      grad->proj_w.noalias() += dl * h.transpose();
      grad->proj_b += dl.rowwise().sum();
      dh[static_cast<std::size_t>(i)].noalias() = m.proj_w.transpose() * dl;
    }
  }
  if (grad) {
    const auto bd = nn::lstm_backward(m.decoder, dec, dh, zeros(L, B), zeros(L, B), grad->decoder, false);
    nn::lstm_backward(m.encoder, enc, {}, bd.dh0, bd.dc0, grad->encoder, false);
  }
  return loss * scale;
}

double attn_loss(const AttnLstmModel& m, const WindowBatch& batch, AttnLstmModel* grad) {
  check_batch(batch, m.input_dim());
  const int steps = batch.steps();
  const int B = batch.size();
  const int L = m.latent();
  const auto f = attn_forward(m, batch.inputs, grad != nullptr);
  const double scale = 1.0 / (static_cast<double>(steps) * B);
  double loss = 0.0;
  std::vector<MatrixXd> dlogits(static_cast<std::size_t>(steps));
  for (int i = 0; i < steps; ++i)
    loss += nn::cross_entropy(f.logits[i], batch.targets[static_cast<std::size_t>(i)], scale,
                              grad ? &dlogits[static_cast<std::size_t>(i)] : nullptr);
  if (!grad) return loss * scale;

  const auto H = [&](int j) -> const MatrixXd& { return f.enc.steps[static_cast<std::size_t>(j)].h; };
  std::vector<MatrixXd> dH(static_cast<std::size_t>(steps), zeros(L, B));
  std::vector<MatrixXd> dQ(static_cast<std::size_t>(steps), zeros(L, B));
  std::vector<MatrixXd> dK(static_cast<std::size_t>(steps), zeros(L, B));
  for (int i = 0; i < steps; ++i) {
    const auto& dl = dlogits[static_cast<std::size_t>(i)];
    grad->out_h.noalias() += dl * H(i).transpose();
    grad->out_c.noalias() += dl * f.ctx[i].transpose();
    grad->out_b += dl.rowwise().sum();
    dH[i].noalias() += m.out_h.transpose() * dl;
    const MatrixXd dctx = m.out_c.transpose() * dl;
    const auto& alpha = f.alpha[i];
    MatrixXd dalpha(steps, B);
    for (int j = 0; j < steps; ++j) {
      dalpha.row(j) = (dctx.array() * H(j).array()).colwise().sum();
      dH[j].array() += dctx.array().rowwise() * alpha.row(j).array();
    }
    const Eigen::RowVectorXd dot = (alpha.array() * dalpha.array()).colwise().sum();
    const MatrixXd de = (alpha.array() * (dalpha.rowwise() - dot).array()).matrix();
    for (int j = 0; j < steps; ++j) {
      const auto& u = f.u[i][j];
      grad->attn_v.noalias() += u * de.row(j).transpose();
      const MatrixXd du = ((m.attn_v * de.row(j)).array() * (1.0 - u.array().square())).matrix();
      dQ[i] += du;
      dK[j] += du;
    }
  }
  for (int j = 0; j < steps; ++j) {
    grad->wq.noalias() += dQ[j] * H(j).transpose();
    grad->attn_b += dQ[j].rowwise().sum();
    grad->wk.noalias() += dK[j] * H(j).transpose();
    dH[j].noalias() += m.wq.transpose() * dQ[j];
    dH[j].noalias() += m.wk.transpose() * dK[j];
  }
  nn::lstm_backward(m.encoder, f.enc, dH, zeros(L, B), zeros(L, B), grad->encoder, false);
  return loss * scale;
}

VectorXd EncoderState::vector() const {
  VectorXd s(h.size() + c.size());
  s << h, c;
  return s;
}

EncoderState encode(const Seq2SeqModel& m, const MatrixXd& embeddings) {
  if (embeddings.cols() == 0) throw Error("encode: empty input sequence");
  if (embeddings.rows() != m.input_dim())
    throw Error("encode: embedding has " + std::to_string(embeddings.rows()) + " dims, model expects " +
                std::to_string(m.input_dim()));
  const int L = m.latent();
  MatrixXd h = zeros(L, 1), c = zeros(L, 1);
  for (Eigen::Index t = 0; t < embeddings.cols(); ++t) {
    auto s = nn::lstm_step(m.encoder, embeddings.col(t), h, c);
    h = std::move(s.h);
    c = std::move(s.c);
  }
  return {h.col(0), c.col(0)};
}

namespace {

std::vector<VectorXd> run_decoder(const Seq2SeqModel& m, const EncoderState& s, int steps,
                                  std::span<const SymbolId> targets) {
  if (s.h.size() != m.latent() || s.c.size() != m.latent()) throw Error("decode: state dimension mismatch");
  if (steps < 1) throw Error("decode: length must be at least 1");
  std::vector<VectorXd> out;
  MatrixXd h = s.h, c = s.c;
  SymbolId prev = m.start_token();
  for (int i = 0; i < steps; ++i) {
    const SymbolId in[1] = {prev};
    auto st = nn::lstm_step(m.decoder, nn::one_hot(in, m.num_symbols() + 1), h, c);
    h = std::move(st.h);
    c = std::move(st.c);
    const MatrixXd logits = m.proj_w * h + m.proj_b;
    out.push_back(nn::softmax_columns(logits).col(0));
    prev = targets.empty() ? nn::argmax(out.back()) : targets[static_cast<std::size_t>(i)];
  }
  return out;
}

}  // namespace

std::vector<VectorXd> decode(const Seq2SeqModel& m, const EncoderState& s, std::span<const SymbolId> targets) {
  for (auto t : targets)
    if (t < 0 || t >= m.num_symbols()) throw Error("decode: target symbol out of range");
  return run_decoder(m, s, static_cast<int>(targets.size()), targets);
}

std::vector<VectorXd> decode(const Seq2SeqModel& m, const EncoderState& s, int steps) {
  return run_decoder(m, s, steps, {});
}

int SequenceModel::input_dim() const {
  return std::visit([](const auto& n) { return n.input_dim(); }, net);
}
int SequenceModel::latent() const {
  return std::visit([](const auto& n) { return n.latent(); }, net);
}
int SequenceModel::num_symbols() const {
  return std::visit([](const auto& n) { return n.num_symbols(); }, net);
}

std::vector<SymbolSequence> predict_windows(const SequenceModel& model, const std::vector<MatrixXd>& inputs,
                                            int steps) {
  if (inputs.empty() || inputs.front().cols() == 0) return {};
  const int B = static_cast<int>(inputs.front().cols());
  for (const auto& x : inputs)
    if (x.rows() != model.input_dim() || x.cols() != B) throw Error("predict: window dimension mismatch");
  std::vector<SymbolSequence> out(static_cast<std::size_t>(B));
  if (const auto* m = std::get_if<Seq2SeqModel>(&model.net)) {
    const int L = m->latent();
    const auto enc = nn::lstm_forward(m->encoder, inputs, zeros(L, B), zeros(L, B));
    MatrixXd h = enc.h_last(), c = enc.c_last();
    std::vector<SymbolId> prev(static_cast<std::size_t>(B), m->start_token());
    for (int i = 0; i < steps; ++i) {
      auto st = nn::lstm_step(m->decoder, nn::one_hot(prev, m->num_symbols() + 1), h, c);
      h = std::move(st.h);
      c = std::move(st.c);
      const MatrixXd logits = (m->proj_w * h).colwise() + m->proj_b;
      for (int b = 0; b < B; ++b) {
        prev[static_cast<std::size_t>(b)] = nn::argmax(logits.col(b));
        out[static_cast<std::size_t>(b)].push_back(prev[static_cast<std::size_t>(b)]);
      }
    }
    return out;
  }
  const auto& m = std::get<AttnLstmModel>(model.net);
  if (steps != static_cast<int>(inputs.size())) throw Error("predict: attn_lstm emits one symbol per input step");
  const auto f = attn_forward(m, inputs, false);
  for (int i = 0; i < steps; ++i)
    for (int b = 0; b < B; ++b) out[static_cast<std::size_t>(b)].push_back(nn::argmax(f.logits[i].col(b)));
  return out;
}

SymbolSequence predict_next(const SequenceModel& model, const MatrixXd& history, int k) {
  if (k < 1) throw Error("predict_next: k must be at least 1");
  if (history.cols() < model.sl)
    throw Error("predict_next: history has " + std::to_string(history.cols()) + " frames, window needs " +
                std::to_string(model.sl));
  std::vector<MatrixXd> window;
  window.reserve(static_cast<std::size_t>(model.sl));
  for (Eigen::Index t = history.cols() - model.sl; t < history.cols(); ++t) window.emplace_back(history.col(t));
  // Output step i of a window ending at t is aligned with t - SL + 1 + model.k + i.
  const int first = model.sl - model.k;
  int steps = model.sl;
  if (model.kind == ModelKind::seq2seq) {
    steps = first + k;
  } else if (k > model.k) {
    throw Error("predict_next: attn_lstm trained with k=" + std::to_string(model.k) + " cannot look " +
                std::to_string(k) + " steps ahead");
  }
  const auto seq = predict_windows(model, window, steps).front();
  return {seq.begin() + first, seq.begin() + first + k};
}

std::size_t window_count(std::size_t frames, int sl, int k) {
  const auto span = static_cast<std::size_t>(sl + k);
  return frames + 1 > span ? frames + 1 - span : 0;
}

std::vector<WindowRef> make_windows(const SequenceData& data, int sl, int k) {
  if (sl < 1 || k < 1) throw Error("window length and offset must be positive");
  std::vector<WindowRef> out;
  for (std::size_t e = 0; e < data.labels.size(); ++e) {
    const auto n = window_count(data.labels[e].size(), sl, k);
    for (std::size_t s = 0; s < n; ++s) out.push_back({static_cast<std::uint32_t>(e), static_cast<std::uint32_t>(s)});
  }
  return out;
}

WindowBatch gather_windows(const SequenceData& data, std::span<const WindowRef> refs, int sl, int k) {
  WindowBatch batch;
  const auto B = static_cast<Eigen::Index>(refs.size());
  const auto D = data.embeddings.empty() ? 0 : data.embeddings.front().rows();
  batch.inputs.assign(static_cast<std::size_t>(sl), MatrixXd(D, B));
  batch.targets.assign(static_cast<std::size_t>(sl), std::vector<SymbolId>(refs.size()));
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& r = refs[static_cast<std::size_t>(b)];
    const auto& emb = data.embeddings[r.episode];
    const auto& lab = data.labels[r.episode];
    for (int i = 0; i < sl; ++i) {
      batch.inputs[static_cast<std::size_t>(i)].col(b) = emb.col(r.start + i);
      batch.targets[static_cast<std::size_t>(i)][static_cast<std::size_t>(b)] = lab[r.start + k + i];
    }
  }
  return batch;
}

SeqTrainHyper parse_train_config(const std::string& text, SeqTrainHyper h) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r\"");
      const auto e = s.find_last_not_of(" \t\r\"");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    if (trim(line).empty()) continue;
    if (eq == std::string::npos) throw Error("train config line " + std::to_string(line_no) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::transform(key.begin(), key.end(), key.begin(), [](unsigned char c) { return std::tolower(c); });
    try {
      if (key == "lr") h.lr = std::stod(value);
      else if (key == "epochs") h.epochs = std::stoi(value);
      else if (key == "batch") h.batch = std::stoi(value);
      else if (key == "sl") h.sl = std::stoi(value);
      else if (key == "k") h.k = std::stoi(value);
      else if (key == "latent") h.latent = std::stoi(value);
      else if (key == "seed") h.seed = std::stoull(value);
      else if (key == "clip") h.clip = std::stod(value);
      else if (key == "windows_per_epoch") h.windows_per_epoch = std::stoull(value);
      else if (key == "val_windows") h.val_windows = std::stoull(value);
      else throw Error("train config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    } catch (const std::logic_error&) {
      throw Error("train config line " + std::to_string(line_no) + ": bad value for '" + key + "'");
    }
  }
  return h;
}

namespace {

template <class Net>
double net_loss(const Net& net, const WindowBatch& batch, Net* grad) {
  if constexpr (std::is_same_v<Net, Seq2SeqModel>)
    return seq2seq_loss(net, batch, grad);
  else
    return attn_loss(net, batch, grad);
}

template <class Net>
double mean_loss(const Net& net, const SequenceData& data, const std::vector<WindowRef>& refs, int sl, int k,
                 int batch) {
  double total = 0.0;
  for (std::size_t s = 0; s < refs.size(); s += static_cast<std::size_t>(batch)) {
    const auto n = std::min(refs.size() - s, static_cast<std::size_t>(batch));
    total += net_loss<Net>(net, gather_windows(data, std::span(refs).subspan(s, n), sl, k), nullptr) *
             static_cast<double>(n);
  }
  return total / static_cast<double>(refs.size());
}

std::vector<WindowRef> spaced(const std::vector<WindowRef>& refs, std::size_t limit) {
  if (limit == 0 || refs.size() <= limit) return refs;
  std::vector<WindowRef> out;
  out.reserve(limit);
  for (std::size_t i = 0; i < limit; ++i) out.push_back(refs[i * refs.size() / limit]);
  return out;
}

template <class Net>
void fit(Net& net, SequenceModel& out, const SequenceData& train, const SequenceData& val, const SeqTrainHyper& h,
         const EpochCallback& on_epoch) {
  auto windows = make_windows(train, h.sl, h.k);
  if (windows.empty()) throw Error("training data yields no windows of length " + std::to_string(h.sl));
  const auto val_refs = spaced(make_windows(val, h.sl, h.k), h.val_windows);
  std::mt19937_64 rng(derive_seed(h.seed, 0x7a1));
  nn::Adam opt(h.lr, h.clip);
  Net grad = nn::zeros_like(net);
  Net best = net;
  double best_loss = std::numeric_limits<double>::infinity();
  const auto per_epoch = h.windows_per_epoch == 0 ? windows.size() : std::min(h.windows_per_epoch, windows.size());
  for (int epoch = 1; epoch <= h.epochs; ++epoch) {
    std::shuffle(windows.begin(), windows.end(), rng);
    double total = 0.0;
    int batch_no = 0;
    for (std::size_t s = 0; s < per_epoch; s += static_cast<std::size_t>(h.batch), ++batch_no) {
      const auto n = std::min(per_epoch - s, static_cast<std::size_t>(h.batch));
      grad.for_each_param([](auto& p) { p.setZero(); });
      const double loss = net_loss<Net>(net, gather_windows(train, std::span(windows).subspan(s, n), h.sl, h.k), &grad);
      if (!std::isfinite(loss))
        throw Error("training loss is not finite at epoch " + std::to_string(epoch) + ", batch " +
                    std::to_string(batch_no));
      opt.step(net, grad);
      total += loss * static_cast<double>(n);
    }
    const double train_loss = total / static_cast<double>(per_epoch);
    const double val_loss = val_refs.empty() ? train_loss : mean_loss(net, val, val_refs, h.sl, h.k, 256);
    out.curves.train_loss.push_back(train_loss);
    out.curves.val_loss.push_back(val_loss);
    if (val_loss < best_loss) {
      best_loss = val_loss;
      best = net;
      out.curves.best_epoch = epoch;
    }
    if (on_epoch) on_epoch(epoch, train_loss, val_loss);
  }
  net = std::move(best);
  out.val_loss = best_loss;
}

}  // namespace

SequenceModel train_sequence_model(ModelKind kind, const SequenceData& train, const SequenceData& val,
                                   const std::string& alphabet, int num_symbols, const SeqTrainHyper& h,
                                   const EpochCallback& on_epoch) {
  if (h.sl < 1 || h.k < 1 || h.batch < 1 || h.epochs < 1 || h.latent < 1)
    throw Error("sequence length, offset, batch, epochs and latent must be positive");
  if (train.embeddings.empty()) throw Error("training data is empty");
  const int input_dim = static_cast<int>(train.embeddings.front().rows());
  SequenceModel out;
  out.kind = kind;
  out.sl = h.sl;
  out.k = h.k;
  out.alphabet = alphabet;
  out.seed = h.seed;
  if (kind == ModelKind::seq2seq) {
    auto net = Seq2SeqModel::initialize(input_dim, h.latent, num_symbols, h.seed);
    fit(net, out, train, val, h, on_epoch);
    out.net = std::move(net);
  } else {
    auto net = AttnLstmModel::initialize(input_dim, h.latent, num_symbols, h.seed);
    fit(net, out, train, val, h, on_epoch);
    out.net = std::move(net);
  }
  return out;
}

double grad_check(ModelKind kind, int input_dim, int latent, int num_symbols, int sl, std::uint64_t seed,
                  double eps) {
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> sym(0, num_symbols - 1);
  const int B = 2;
  WindowBatch batch;
  for (int i = 0; i < sl; ++i) {
    MatrixXd x(input_dim, B);
    for (Eigen::Index j = 0; j < x.size(); ++j) x.data()[j] = gauss(rng);
    batch.inputs.push_back(x);
    std::vector<SymbolId> t(B);
    for (auto& s : t) s = sym(rng);
    batch.targets.push_back(t);
  }
  if (kind == ModelKind::seq2seq) {
    auto m = Seq2SeqModel::initialize(input_dim, latent, num_symbols, seed);
    return nn::finite_difference_check(
        m, [&](const Seq2SeqModel& net, Seq2SeqModel* g) { return seq2seq_loss(net, batch, g); }, eps);
  }
  auto m = AttnLstmModel::initialize(input_dim, latent, num_symbols, seed);
  return nn::finite_difference_check(
      m, [&](const AttnLstmModel& net, AttnLstmModel* g) { return attn_loss(net, batch, g); }, eps);
}

nlohmann::json to_json(const SequenceModel& model) {
  nlohmann::json weights = nlohmann::json::array();
  std::visit([&](const auto& n) { n.for_each_param([&](const auto& p) { weights.push_back(nn::matrix_to_json(p)); }); },
             model.net);
  return {{"kind", std::string(to_string(model.kind))},
          {"version", kSequenceCheckpointVersion},
          {"dims", {{"input", model.input_dim()}, {"latent", model.latent()}, {"symbols", model.num_symbols()}}},
          {"SL", model.sl},
          {"k", model.k},
          {"alphabet_id", model.alphabet},
          {"seed", model.seed},
          {"val_loss", model.val_loss},
          {"curves",
           {{"train_loss", model.curves.train_loss},
            {"val_loss", model.curves.val_loss},
            {"best_epoch", model.curves.best_epoch}}},
          {"weights", weights}};
}

SequenceModel sequence_model_from_json(const nlohmann::json& j) {
  SequenceModel m;
  try {
    const int version = j.at("version").get<int>();
    if (version != kSequenceCheckpointVersion)
      throw Error("unsupported sequence model checkpoint version " + std::to_string(version));
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    const auto& dims = j.at("dims");
    const int input = dims.at("input").get<int>();
    const int latent = dims.at("latent").get<int>();
    const int symbols = dims.at("symbols").get<int>();
    m.sl = j.at("SL").get<int>();
    m.k = j.at("k").get<int>();
    m.alphabet = j.at("alphabet_id").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.val_loss = j.at("val_loss").get<double>();
    if (j.contains("curves")) {
      const auto& c = j.at("curves");
      m.curves.train_loss = c.at("train_loss").get<std::vector<double>>();
      m.curves.val_loss = c.at("val_loss").get<std::vector<double>>();
      m.curves.best_epoch = c.at("best_epoch").get<int>();
    }
    if (m.kind == ModelKind::seq2seq)
      m.net = Seq2SeqModel::initialize(input, latent, symbols, 0);
    else
      m.net = AttnLstmModel::initialize(input, latent, symbols, 0);
    const auto& weights = j.at("weights");
    std::size_t idx = 0;
    std::visit(
        [&](auto& n) {
          n.for_each_param([&](auto& p) {
            if (idx >= weights.size()) throw Error("sequence model checkpoint is missing weights");
            const MatrixXd w = nn::matrix_from_json(weights[idx++]);
            if (w.size() != p.size()) throw Error("sequence model checkpoint has a mis-shaped weight");
            p = Eigen::Map<const MatrixXd>(w.data(), p.rows(), p.cols());
          });
        },
        m.net);
    if (idx != weights.size()) throw Error("sequence model checkpoint has extra weights");
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed sequence model checkpoint: ") + e.what());
  }
  if (m.sl < 1 || m.k < 1) throw Error("sequence model checkpoint has invalid SL or k");
  return m;
}

void save_sequence_model(const SequenceModel& model, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(model).dump());
}

SequenceModel load_sequence_model(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("sequence model checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return sequence_model_from_json(j);
}

}  // namespace symplan
