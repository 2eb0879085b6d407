#include "symplan/pipeline.hpp"

#include <chrono>

#include "symplan/error.hpp"

namespace symplan {

FrameSet stack_frames(std::span<const Episode> episodes) {
  std::size_t n = 0;
  Eigen::Index dim = 0;
  for (const auto& e : episodes) {
    n += e.size();
    if (!e.frames.empty()) dim = e.frames.front().obs.size();
  }
  FrameSet out;
  out.obs.resize(dim, static_cast<Eigen::Index>(n));
  out.labels.reserve(n);
  Eigen::Index c = 0;
  for (const auto& e : episodes) {
    for (const auto& f : e.frames) {
      if (f.obs.size() != dim) throw Error("episodes disagree on observation size");
      out.obs.col(c++) = f.obs;
      out.labels.push_back(f.label);
    }
  }
  return out;
}

SequenceData embed_episodes(const FrameClassifier& clf, std::span<const Episode> episodes) {
  SequenceData data;
  data.embeddings.reserve(episodes.size());
  data.labels.reserve(episodes.size());
  for (const auto& e : episodes) {
    const auto frames = stack_frames(std::span<const Episode>(&e, 1));
    data.embeddings.push_back(embed_batch(clf, frames.obs));
    data.labels.push_back(frames.labels);
  }
  return data;
}

PipelineResult train_pipeline(TaskId task, std::span<const Episode> train, std::span<const Episode> val,
                              std::span<const Episode> test, const PipelineConfig& config,
                              const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  const auto& alphabet = alphabet_for(task);
  const int classes = static_cast<int>(alphabet.size());
  PipelineResult r;
  const auto tr = stack_frames(train);
  const auto va = stack_frames(val);
  r.classifier = val.empty() ? train_frame_classifier(tr.obs, tr.labels, classes, config.classifier)
                             : train_frame_classifier(tr.obs, tr.labels, classes, config.classifier, &va.obs, va.labels);
  const auto train_data = embed_episodes(r.classifier.model, train);
  const auto val_data = embed_episodes(r.classifier.model, val);
  r.model = train_sequence_model(config.kind, train_data, val_data, alphabet.name(), classes, config.sequence,
                                 on_epoch);
  if (!test.empty()) {
    r.test = evaluate_model(r.model, embed_episodes(r.classifier.model, test), config.sequence.sl,
                            config.sequence.k);
    r.test.task = std::string(to_string(task));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace symplan
