#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "symplan/embedder.hpp"
#include "symplan/envsim.hpp"
#include "symplan/error.hpp"
#include "symplan/metrics.hpp"
#include "symplan/nn.hpp"
#include "symplan/pipeline.hpp"
#include "symplan/seqmodel.hpp"
#include "test_util.hpp"

using namespace symplan;
using Eigen::MatrixXd;

namespace {

// Embeddings that are a noisy one-hot of a label sequence cycling through
// runs of 3..6 frames, so the next symbol is predictable from the window.
SequenceData toy_data(int episodes, int frames, int symbols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::uniform_int_distribution<int> run(3, 6);
  SequenceData d;
  for (int e = 0; e < episodes; ++e) {
    SymbolSequence labels;
    int s = e % symbols;
    while (static_cast<int>(labels.size()) < frames) {
      const int r = run(rng);
      for (int i = 0; i < r && static_cast<int>(labels.size()) < frames; ++i) labels.push_back(s);
      s = (s + 1) % symbols;
    }
    MatrixXd emb = MatrixXd::Zero(symbols, frames);
    for (int t = 0; t < frames; ++t) {
      emb(labels[static_cast<std::size_t>(t)], t) = 1.0;
      for (int r = 0; r < symbols; ++r) emb(r, t) += noise(rng);
    }
    d.embeddings.push_back(emb);
    d.labels.push_back(labels);
  }
  return d;
}

}  // namespace

TEST(Nn, CrossEntropyMatchesDefinition) {
  MatrixXd logits(3, 2);
  logits << 1, 0, 2, 0, 3, 0;
  const std::vector<SymbolId> t{2, 1};
  MatrixXd d;
  const double loss = nn::cross_entropy(logits, t, 1.0, &d);
  const double expect = -std::log(std::exp(3.0) / (std::exp(1.0) + std::exp(2.0) + std::exp(3.0))) + std::log(3.0);
  EXPECT_NEAR(loss, expect, 1e-12);
  EXPECT_NEAR(d.col(1).sum(), 0.0, 1e-12);
}

TEST(Nn, ArgmaxPrefersLowestIndexOnTies) {
  Eigen::VectorXd v(4);
  v << 1, 3, 3, 0;
  EXPECT_EQ(nn::argmax(v), 1);
}

TEST(Nn, MatrixJsonRoundTrip) {
  const MatrixXd m = MatrixXd::Random(3, 4);
  EXPECT_EQ(nn::matrix_from_json(nn::matrix_to_json(m)), m);
  EXPECT_THROW(nn::matrix_from_json(nlohmann::json{{"rows", 2}, {"cols", 2}, {"data", {1.0}}}), Error);
}

TEST(Nn, RelativeErrorFloor) {
  EXPECT_DOUBLE_EQ(nn::relative_error(1.0, 1.0), 0.0);
  EXPECT_NEAR(nn::relative_error(1.0, 3.0), 0.5, 1e-12);
  EXPECT_LT(nn::relative_error(1e-12, 2e-12), 1e-5);
}

TEST(GradCheck, Classifier) { EXPECT_LT(grad_check_classifier(kObservationDim, 8, 6, 3), 1e-4); }

TEST(GradCheck, Seq2Seq) {
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_LT(grad_check(ModelKind::seq2seq, 4, 5, 6, 4, seed), 1e-4);
}

TEST(GradCheck, AttnLstm) {
  for (std::uint64_t seed : {1, 2, 3}) EXPECT_LT(grad_check(ModelKind::attn_lstm, 4, 5, 6, 4, seed), 1e-4);
}

TEST(Embedder, ObservationLayout) {
  std::mt19937_64 rng(1);
  const auto s = sample_initial_state(TaskId::abcdef, rng);
  const auto clean = render_observation(s, 7, 0.0);
  EXPECT_EQ(clean.size(), kObservationDim);
  EXPECT_EQ(render_observation(s, 7, 0.05), render_observation(s, 7, 0.05));
  EXPECT_NE(render_observation(s, 7, 0.05), render_observation(s, 8, 0.05));
  const auto b = render_observation(sample_initial_state(TaskId::blocks, rng), 1, 0.0);
  EXPECT_EQ(b.size(), kObservationDim);
}

TEST(Embedder, TrainsOnSeparableFrames) {
  std::vector<Episode> eps;
  for (std::uint64_t i = 0; i < 12; ++i) eps.push_back(sample_demonstration(TaskId::c, i));
  const auto frames = stack_frames(eps);
  ClassifierHyper h;
  h.max_epochs = 60;
  const auto clf = train_frame_classifier(frames.obs, frames.labels, 12, h);
  EXPECT_GT(clf.metrics.train_accuracy, 0.9);
  EXPECT_EQ(embed(clf.model, frames.obs.col(0)).size(), kEmbeddingDim);
  EXPECT_NEAR(class_probabilities(clf.model, frames.obs.col(0)).sum(), 1.0, 1e-9);
  EXPECT_THROW(embed(clf.model, Eigen::VectorXd::Zero(5)), Error);
}

TEST(Embedder, RejectsBadLabels) {
  const MatrixXd x = MatrixXd::Random(kObservationDim, 4);
  const std::vector<SymbolId> labels{0, 1, 2, 9};
  EXPECT_THROW(train_frame_classifier(x, labels, 3, {}), Error);
  EXPECT_THROW(train_frame_classifier(MatrixXd(kObservationDim, 0), {}, 3, {}), Error);
}

TEST(Embedder, CheckpointRoundTrip) {
  test_util::TempDir dir;
  TrainedClassifier clf;
  clf.model = FrameClassifier::initialize(kObservationDim, 8, kEmbeddingDim, 6, 3);
  clf.seed = 3;
  save_classifier(clf, dir.path() / "clf.json");
  const auto back = load_classifier(dir.path() / "clf.json");
  EXPECT_EQ(back.model.w1, clf.model.w1);
  EXPECT_EQ(back.model.b3, clf.model.b3);
  EXPECT_THROW(load_classifier(dir.path() / "missing.json"), Error);
}

TEST(Windows, CountsAndAlignment) {
  EXPECT_EQ(window_count(25, 20, 1), 5u);
  EXPECT_EQ(window_count(20, 20, 1), 0u);
  EXPECT_EQ(window_count(10, 20, 1), 0u);
  const auto d = toy_data(2, 30, 4, 1);
  const auto refs = make_windows(d, 10, 2);
  EXPECT_EQ(refs.size(), 2u * window_count(30, 10, 2));
  const auto batch = gather_windows(d, std::span(refs).subspan(0, 3), 10, 2);
  EXPECT_EQ(batch.steps(), 10);
  EXPECT_EQ(batch.size(), 3);
  // Step i of window w predicts the label k frames after input frame w+i.
  EXPECT_EQ(batch.targets[9][0], d.labels[0][11]);
  EXPECT_EQ(batch.targets[0][2], d.labels[0][4]);
}

TEST(Windows, TrainConfigParsing) {
  const auto h = parse_train_config("# comment\nlr = 0.01\nEPOCHS=3\nsl = 10\n\nwindows_per_epoch = 100\n");
  EXPECT_DOUBLE_EQ(h.lr, 0.01);
  EXPECT_EQ(h.epochs, 3);
  EXPECT_EQ(h.sl, 10);
  EXPECT_EQ(h.windows_per_epoch, 100u);
  EXPECT_THROW(parse_train_config("bogus = 1\n"), Error);
  EXPECT_THROW(parse_train_config("lr = fast\n"), Error);
}

TEST(SeqModel, LearnsToyTask) {
  const auto train = toy_data(30, 60, 4, 2);
  const auto val = toy_data(6, 60, 4, 3);
  SeqTrainHyper h;
  h.sl = 10;
  h.latent = 16;
  h.epochs = 12;
  h.lr = 1e-2;
  for (auto kind : {ModelKind::seq2seq, ModelKind::attn_lstm}) {
    const auto model = train_sequence_model(kind, train, val, "toy", 4, h);
    EXPECT_LE(model.curves.best_epoch, h.epochs);
    EXPECT_LT(model.curves.val_loss[static_cast<std::size_t>(model.curves.best_epoch - 1)],
              model.curves.val_loss.front() + 1e-12);
    const auto row = evaluate_model(model, val, 10, 1);
    EXPECT_LT(row.symbol_error, 0.35) << to_string(kind);
  }
}

TEST(SeqModel, PredictNextMatchesBatchPath) {
  const auto d = toy_data(1, 40, 4, 5);
  SequenceModel m;
  m.kind = ModelKind::seq2seq;
  m.sl = 10;
  m.net = Seq2SeqModel::initialize(4, 8, 4, 9);
  m.alphabet = "toy";
  const auto pair = predict_episode(m, d.embeddings[0], d.labels[0], 1);
  for (int t : {9, 17, 38}) {
    const auto next = predict_next(m, d.embeddings[0].leftCols(t + 1), 1);
    ASSERT_EQ(next.size(), 1u);
    EXPECT_EQ(next[0], pair.predicted[static_cast<std::size_t>(t - 9)]) << "t=" << t;
  }
  EXPECT_THROW(predict_next(m, d.embeddings[0].leftCols(5), 1), Error);
}

TEST(SeqModel, AttnCannotLookPastItsOffset) {
  SequenceModel m;
  m.kind = ModelKind::attn_lstm;
  m.sl = 10;
  m.k = 1;
  m.net = AttnLstmModel::initialize(4, 8, 4, 9);
  EXPECT_THROW(predict_next(m, MatrixXd::Zero(4, 12), 2), Error);
}

TEST(SeqModel, CheckpointRoundTripIsExact) {
  test_util::TempDir dir;
  for (auto kind : {ModelKind::seq2seq, ModelKind::attn_lstm}) {
    SequenceModel m;
    m.kind = kind;
    m.sl = 10;
    m.alphabet = "manipulation";
    if (kind == ModelKind::seq2seq)
      m.net = Seq2SeqModel::initialize(16, 8, 12, 4);
    else
      m.net = AttnLstmModel::initialize(16, 8, 12, 4);
    const auto path = dir.path() / "m.json";
    save_sequence_model(m, path);
    const auto back = load_sequence_model(path);
    EXPECT_EQ(to_json(back).dump(), to_json(m).dump());
    EXPECT_EQ(back.kind, kind);
  }
  EXPECT_THROW(sequence_model_from_json(nlohmann::json{{"kind", "seq2seq"}}), Error);
}

TEST(SeqModel, TrainingIsDeterministic) {
  const auto train = toy_data(8, 40, 3, 2);
  const auto val = toy_data(2, 40, 3, 3);
  SeqTrainHyper h;
  h.sl = 10;
  h.latent = 8;
  h.epochs = 2;
  const auto a = train_sequence_model(ModelKind::seq2seq, train, val, "toy", 3, h);
  const auto b = train_sequence_model(ModelKind::seq2seq, train, val, "toy", 3, h);
  EXPECT_EQ(to_json(a).dump(), to_json(b).dump());
}

TEST(SeqModel, RejectsEmptyWindowing) {
  const auto d = toy_data(2, 8, 3, 1);
  SeqTrainHyper h;
  h.sl = 10;
  EXPECT_THROW(train_sequence_model(ModelKind::seq2seq, d, d, "toy", 3, h), Error);
}
