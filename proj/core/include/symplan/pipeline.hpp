#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "symplan/embedder.hpp"
#include "symplan/envsim.hpp"
#include "symplan/metrics.hpp"
#include "symplan/seqmodel.hpp"

namespace symplan {

struct FrameSet {
  Eigen::MatrixXd obs;  // observation x frames
  SymbolSequence labels;
};

// All frames of all episodes, in order.
FrameSet stack_frames(std::span<const Episode> episodes);
SequenceData embed_episodes(const FrameClassifier& clf, std::span<const Episode> episodes);

struct PipelineConfig {
  ClassifierHyper classifier;
  SeqTrainHyper sequence;
  ModelKind kind = ModelKind::seq2seq;
};

struct PipelineResult {
  TrainedClassifier classifier;
  SequenceModel model;
  MetricsRow test;
  double seconds = 0.0;
};

// Classifier on train frames, sequence model on the embedded train/val
// episodes, metrics on test.
PipelineResult train_pipeline(TaskId task, std::span<const Episode> train, std::span<const Episode> val,
                              std::span<const Episode> test, const PipelineConfig& config,
                              const EpochCallback& on_epoch = {});

}  // namespace symplan
