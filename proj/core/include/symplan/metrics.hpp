#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "symplan/seqmodel.hpp"
#include "symplan/symbols.hpp"

namespace symplan {

struct SequencePair {
  SymbolSequence predicted;
  SymbolSequence truth;
};

// Mismatched positions / length. Throws Error on unequal or zero length.
double symbol_error(std::span<const SymbolId> predicted, std::span<const SymbolId> truth);

bool same_structure(std::span<const SymbolId> predicted, std::span<const SymbolId> truth);
// Fraction of pairs whose compact encodings differ. Throws Error when empty.
double structure_error(std::span<const SequencePair> pairs);

std::size_t levenshtein(std::span<const SymbolId> a, std::span<const SymbolId> b);
// Levenshtein / max(1, |truth|), on raw sequences or on their compact encodings.
double edit_distance(std::span<const SymbolId> predicted, std::span<const SymbolId> truth, bool compact = false);

struct MetricsRow {
  std::string task;
  int sl = 0;
  std::string model;
  double symbol_error = 0.0;
  double structure_error = 0.0;
  double edit_distance = 0.0;
  double edit_distance_compact = 0.0;
  std::size_t episodes = 0;
};

// Per-episode symbol and edit errors averaged; structure error over pairs.
MetricsRow evaluate_pairs(std::span<const SequencePair> pairs);

// Prediction of a_{t+k} for every window ending at t = SL-1 ... T-1-k.
SequencePair predict_episode(const SequenceModel& model, const Eigen::MatrixXd& embeddings,
                             const SymbolSequence& labels, int k = 1);

// Throws Error when `sl` differs from the model's window length.
MetricsRow evaluate_model(const SequenceModel& model, const SequenceData& test, int sl, int k = 1);
// The same windowing with the ground truth as the prediction.
MetricsRow evaluate_oracle(const SequenceData& test, int sl, int k = 1);

std::string report_csv(std::span<const MetricsRow> rows);
std::string report_table(std::span<const MetricsRow> rows);

}  // namespace symplan
