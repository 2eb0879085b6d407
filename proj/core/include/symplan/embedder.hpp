#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "symplan/symbols.hpp"
#include "symplan/world.hpp"

namespace symplan {

inline constexpr int kObservationDim = 24;
inline constexpr int kEmbeddingDim = 16;

using FrameObservation = Eigen::VectorXd;
using Embedding = Eigen::VectorXd;

// Feature vector of a scene plus additive Gaussian noise of std `sigma`.
// Deterministic in (state, noise_seed, sigma).
//
// Manipulation layout: [door open, door fraction, ee xyz, cup xyz, ball xyz,
// held one-hot(none,cup,ball), cup loc one-hot(cabinet,table,gripper),
// ball loc one-hot(cabinet,table,in_cup,gripper), arm site one-hot(cup,ball,handle)].
// Blocks layout: [placed x5, block poses 5x3, hand xyz, holding].
FrameObservation render_observation(const WorldState& state, std::uint64_t noise_seed, double sigma = 0.05);

// obs -> tanh hidden -> 16-d embedding (linear) -> softmax head.
struct FrameClassifier {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // embed x hidden
  Eigen::VectorXd b2;
  Eigen::MatrixXd w3;  // classes x embed
  Eigen::VectorXd b3;

  int input_dim() const { return static_cast<int>(w1.cols()); }
  int hidden_dim() const { return static_cast<int>(w1.rows()); }
  int embed_dim() const { return static_cast<int>(w2.rows()); }
  int num_classes() const { return static_cast<int>(w3.rows()); }

  // Uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)], biases zero.
  static FrameClassifier initialize(int input_dim, int hidden_dim, int embed_dim, int num_classes,
                                    std::uint64_t seed);
  static FrameClassifier zeros(int input_dim, int hidden_dim, int embed_dim, int num_classes);

  template <class F>
  void for_each_param(F&& f) {
    f(w1), f(b1), f(w2), f(b2), f(w3), f(b3);
  }
  template <class F>
  void for_each_param(F&& f) const {
    f(w1), f(b1), f(w2), f(b2), f(w3), f(b3);
  }
};

struct ClassifierHyper {
  int hidden = 64;
  int embed = kEmbeddingDim;
  int max_epochs = 200;
  int batch = 64;
  double lr = 1e-2;
  double momentum = 0.9;
  // Stop once the epoch loss improves by less than this (relative) for `patience` epochs.
  double tolerance = 1e-3;
  int patience = 5;
  std::uint64_t seed = 1;
};

struct ClassifierMetrics {
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  int epochs = 0;
};

struct TrainedClassifier {
  FrameClassifier model;
  ClassifierMetrics metrics;
  std::uint64_t seed = 0;
};

// Columns of `inputs` are observations. Throws Error for an empty set, a
// label outside [0, num_classes), or mismatched sizes.
TrainedClassifier train_frame_classifier(const Eigen::MatrixXd& inputs, std::span<const SymbolId> labels,
                                         int num_classes, const ClassifierHyper& hyper,
                                         const Eigen::MatrixXd* val_inputs = nullptr,
                                         std::span<const SymbolId> val_labels = {});

// Activations of the 16-d layer. Throws Error on a dimension mismatch.
Embedding embed(const FrameClassifier& clf, const FrameObservation& obs);
Eigen::MatrixXd embed_batch(const FrameClassifier& clf, const Eigen::MatrixXd& obs);
Eigen::VectorXd class_probabilities(const FrameClassifier& clf, const FrameObservation& obs);
double classifier_accuracy(const FrameClassifier& clf, const Eigen::MatrixXd& inputs, std::span<const SymbolId> labels);

// Mean cross-entropy over the columns of `inputs`; fills `grad` when given.
double classifier_loss(const FrameClassifier& clf, const Eigen::MatrixXd& inputs, std::span<const SymbolId> labels,
                       FrameClassifier* grad = nullptr);

// Central differences over every parameter; returns the max relative error.
double grad_check_classifier(int input_dim, int hidden_dim, int num_classes, std::uint64_t seed, double eps = 1e-5);

inline constexpr int kClassifierCheckpointVersion = 1;
nlohmann::json to_json(const TrainedClassifier& clf);
TrainedClassifier classifier_from_json(const nlohmann::json& j);
void save_classifier(const TrainedClassifier& clf, const std::filesystem::path& path);
TrainedClassifier load_classifier(const std::filesystem::path& path);

}  // namespace symplan
