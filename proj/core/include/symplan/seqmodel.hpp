#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "symplan/nn.hpp"
#include "symplan/symbols.hpp"

namespace symplan {

enum class ModelKind { seq2seq, attn_lstm };
std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);

// Encoder LSTM over embeddings, decoder LSTM over one-hot symbols (plus a
// start token with id num_symbols), linear projection to symbol logits.
struct Seq2SeqModel {
  nn::LstmParams encoder;
  nn::LstmParams decoder;
  Eigen::MatrixXd proj_w;  // |A| x latent
  Eigen::VectorXd proj_b;

  int latent() const { return encoder.hidden_dim(); }
  int input_dim() const { return encoder.input_dim(); }
  int num_symbols() const { return static_cast<int>(proj_w.rows()); }
  int start_token() const { return num_symbols(); }

  static Seq2SeqModel initialize(int input_dim, int latent, int num_symbols, std::uint64_t seed);

  template <class F>
  void for_each_param(F&& f) {
    encoder.for_each_param(f), decoder.for_each_param(f), f(proj_w), f(proj_b);
  }
  template <class F>
  void for_each_param(F&& f) const {
    encoder.for_each_param(f), decoder.for_each_param(f), f(proj_w), f(proj_b);
  }
};

// Many-to-many encoder LSTM with additive soft attention over all
// annotations of the window and a per-step symbol head.
struct AttnLstmModel {
  nn::LstmParams encoder;
  Eigen::MatrixXd wq, wk;  // attn x latent
  Eigen::VectorXd attn_b;
  Eigen::VectorXd attn_v;
  Eigen::MatrixXd out_h, out_c;  // |A| x latent
  Eigen::VectorXd out_b;

  int latent() const { return encoder.hidden_dim(); }
  int input_dim() const { return encoder.input_dim(); }
  int num_symbols() const { return static_cast<int>(out_h.rows()); }

  static AttnLstmModel initialize(int input_dim, int latent, int num_symbols, std::uint64_t seed);

  template <class F>
  void for_each_param(F&& f) {
    encoder.for_each_param(f), f(wq), f(wk), f(attn_b), f(attn_v), f(out_h), f(out_c), f(out_b);
  }
  template <class F>
  void for_each_param(F&& f) const {
    encoder.for_each_param(f), f(wq), f(wk), f(attn_b), f(attn_v), f(out_h), f(out_c), f(out_b);
  }
};

// A batch of windows, step-major: inputs[i] is (embed x B) for step i,
// targets[i][b] is the symbol for step i of window b.
struct WindowBatch {
  std::vector<Eigen::MatrixXd> inputs;
  std::vector<std::vector<SymbolId>> targets;

  int steps() const { return static_cast<int>(inputs.size()); }
  int size() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().cols()); }
};

// Mean per-step cross-entropy; accumulates into `grad` when given.
double seq2seq_loss(const Seq2SeqModel& m, const WindowBatch& batch, Seq2SeqModel* grad);
double attn_loss(const AttnLstmModel& m, const WindowBatch& batch, AttnLstmModel* grad);

struct EncoderState {
  Eigen::VectorXd h, c;
  // (h, c) stacked, 2 x latent.
  Eigen::VectorXd vector() const;
};

// Columns of `embeddings` are time steps.
EncoderState encode(const Seq2SeqModel& m, const Eigen::MatrixXd& embeddings);

// Teacher-forced when `targets` is given (its length sets the step count),
// otherwise free-running for `steps` with argmax feedback.
std::vector<Eigen::VectorXd> decode(const Seq2SeqModel& m, const EncoderState& s,
                                    std::span<const SymbolId> targets);
std::vector<Eigen::VectorXd> decode(const Seq2SeqModel& m, const EncoderState& s, int steps);

using SequenceNet = std::variant<Seq2SeqModel, AttnLstmModel>;

struct TrainingCurves {
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int best_epoch = 0;
};

struct SequenceModel {
  ModelKind kind = ModelKind::seq2seq;
  SequenceNet net;
  int sl = 20;
  int k = 1;
  std::string alphabet;
  std::uint64_t seed = 0;
  double val_loss = 0.0;
  TrainingCurves curves;

  int input_dim() const;
  int latent() const;
  int num_symbols() const;
};

// Greedy predictions for a batch of windows: for seq2seq, `steps` free-run
// decode steps; for attn_lstm, the per-step argmax (steps must equal the
// window length). Result is [window][step].
std::vector<SymbolSequence> predict_windows(const SequenceModel& model, const std::vector<Eigen::MatrixXd>& inputs,
                                            int steps);

// Next `k` symbols after the last column of `history` (embed x T, T >= SL),
// read from the last SL embeddings.
SymbolSequence predict_next(const SequenceModel& model, const Eigen::MatrixXd& history, int k);

// Per-episode embeddings (embed x T) and frame labels.
struct SequenceData {
  std::vector<Eigen::MatrixXd> embeddings;
  std::vector<SymbolSequence> labels;
};

struct WindowRef {
  std::uint32_t episode = 0;
  std::uint32_t start = 0;
};

// max(0, T - SL - k + 1) windows per episode, stride 1.
std::size_t window_count(std::size_t frames, int sl, int k);
std::vector<WindowRef> make_windows(const SequenceData& data, int sl, int k);
WindowBatch gather_windows(const SequenceData& data, std::span<const WindowRef> refs, int sl, int k);

struct SeqTrainHyper {
  int sl = 20;
  int k = 1;
  int latent = 64;
  int epochs = 50;
  int batch = 32;
  double lr = 3e-3;
  double clip = 5.0;
  // Windows drawn (without replacement) per epoch; 0 uses every window.
  std::size_t windows_per_epoch = 0;
  // Validation windows evaluated per epoch (evenly spaced); 0 uses all.
  std::size_t val_windows = 0;
  std::uint64_t seed = 1;
};

// key = value lines; '#' starts a comment. Unknown keys are an error.
SeqTrainHyper parse_train_config(const std::string& text, SeqTrainHyper base = {});

using EpochCallback = std::function<void(int epoch, double train_loss, double val_loss)>;

// Adam on mean per-step cross-entropy with truncated backpropagation through
// each window; keeps the parameters of the best validation epoch. Throws
// Error for empty windowing or a non-finite loss (naming epoch and batch).
SequenceModel train_sequence_model(ModelKind kind, const SequenceData& train, const SequenceData& val,
                                   const std::string& alphabet, int num_symbols, const SeqTrainHyper& hyper,
                                   const EpochCallback& on_epoch = {});

// Central-difference check on a tiny random instance.
double grad_check(ModelKind kind, int input_dim, int latent, int num_symbols, int sl, std::uint64_t seed,
                  double eps = 1e-5);

inline constexpr int kSequenceCheckpointVersion = 1;
nlohmann::json to_json(const SequenceModel& model);
SequenceModel sequence_model_from_json(const nlohmann::json& j);
void save_sequence_model(const SequenceModel& model, const std::filesystem::path& path);
SequenceModel load_sequence_model(const std::filesystem::path& path);

}  // namespace symplan
