#include "symplan/metrics.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <numeric>
#include <set>

#include "symplan/error.hpp"

namespace symplan {

double symbol_error(std::span<const SymbolId> predicted, std::span<const SymbolId> truth) {
  if (predicted.size() != truth.size())
    throw Error("symbol_error: lengths differ (" + std::to_string(predicted.size()) + " vs " +
                std::to_string(truth.size()) + ")");
  if (truth.empty()) throw Error("symbol_error: empty sequences");
  std::size_t miss = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) miss += predicted[i] != truth[i];
  return static_cast<double>(miss) / static_cast<double>(truth.size());
}

bool same_structure(std::span<const SymbolId> predicted, std::span<const SymbolId> truth) {
  return compact_encode(predicted).symbols() == compact_encode(truth).symbols();
}

double structure_error(std::span<const SequencePair> pairs) {
  if (pairs.empty()) throw Error("structure_error: no sequence pairs");
  std::size_t wrong = 0;
  for (const auto& p : pairs) wrong += !same_structure(p.predicted, p.truth);
  return static_cast<double>(wrong) / static_cast<double>(pairs.size());
}

std::size_t levenshtein(std::span<const SymbolId> a, std::span<const SymbolId> b) {
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] != b[j - 1] ? 1 : 0)});
      diag = up;
    }
  }
  return row[b.size()];
}

double edit_distance(std::span<const SymbolId> predicted, std::span<const SymbolId> truth, bool compact) {
  if (compact) {
    const auto p = compact_encode(predicted);
    const auto t = compact_encode(truth);
    return edit_distance(p.symbols(), t.symbols(), false);
  }
  return static_cast<double>(levenshtein(predicted, truth)) /
         static_cast<double>(std::max<std::size_t>(1, truth.size()));
}

MetricsRow evaluate_pairs(std::span<const SequencePair> pairs) {
  MetricsRow row;
  std::vector<SequencePair> scored;
  for (const auto& p : pairs) {
    if (p.truth.empty()) continue;
    row.symbol_error += symbol_error(p.predicted, p.truth);
    row.edit_distance += edit_distance(p.predicted, p.truth);
    row.edit_distance_compact += edit_distance(p.predicted, p.truth, true);
    scored.push_back(p);
  }
  if (scored.empty()) throw Error("no episode is long enough to evaluate");
  const auto n = static_cast<double>(scored.size());
  row.symbol_error /= n;
  row.edit_distance /= n;
  row.edit_distance_compact /= n;
  row.structure_error = structure_error(scored);
  row.episodes = scored.size();
  return row;
}

SequencePair predict_episode(const SequenceModel& model, const Eigen::MatrixXd& embeddings,
                             const SymbolSequence& labels, int k) {
  if (k < 1) throw Error("prediction offset must be at least 1");
  if (static_cast<std::size_t>(embeddings.cols()) != labels.size())
    throw Error("episode embeddings and labels differ in length");
  SequencePair pair;
  const int sl = model.sl;
  const auto T = static_cast<int>(labels.size());
  const int count = T - sl - k + 1;
  if (count <= 0) return pair;
  std::vector<Eigen::MatrixXd> inputs(static_cast<std::size_t>(sl), Eigen::MatrixXd(embeddings.rows(), count));
  for (int w = 0; w < count; ++w)
    for (int i = 0; i < sl; ++i) inputs[static_cast<std::size_t>(i)].col(w) = embeddings.col(w + i);
  int steps = sl;
  int pick = sl - model.k + k - 1;
  if (model.kind == ModelKind::seq2seq) {
    steps = pick + 1;
  } else if (k > model.k) {
    throw Error("attn_lstm trained with k=" + std::to_string(model.k) + " cannot predict " + std::to_string(k) +
                " steps ahead");
  }
  const auto out = predict_windows(model, inputs, steps);
  for (int w = 0; w < count; ++w) {
    pair.predicted.push_back(out[static_cast<std::size_t>(w)][static_cast<std::size_t>(pick)]);
    pair.truth.push_back(labels[static_cast<std::size_t>(w + sl - 1 + k)]);
  }
  return pair;
}

MetricsRow evaluate_model(const SequenceModel& model, const SequenceData& test, int sl, int k) {
  if (sl != model.sl)
    throw Error("model was trained with SL=" + std::to_string(model.sl) + ", evaluation asked for SL=" +
                std::to_string(sl));
  std::vector<SequencePair> pairs;
  for (std::size_t e = 0; e < test.labels.size(); ++e)
    pairs.push_back(predict_episode(model, test.embeddings[e], test.labels[e], k));
  auto row = evaluate_pairs(pairs);
  row.sl = sl;
  row.model = std::string(to_string(model.kind));
  return row;
}

MetricsRow evaluate_oracle(const SequenceData& test, int sl, int k) {
  std::vector<SequencePair> pairs;
  for (const auto& labels : test.labels) {
    SequencePair p;
    for (std::size_t t = static_cast<std::size_t>(sl - 1); t + static_cast<std::size_t>(k) < labels.size(); ++t)
      p.truth.push_back(labels[t + static_cast<std::size_t>(k)]);
    p.predicted = p.truth;
    pairs.push_back(std::move(p));
  }
  auto row = evaluate_pairs(pairs);
  row.sl = sl;
  row.model = "oracle";
  return row;
}

std::string report_csv(std::span<const MetricsRow> rows) {
  std::string out = "task,SL,model,symbol,structure,edit,edit_compact,episodes\n";
  char buf[256];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof buf, "%s,%d,%s,%.6f,%.6f,%.6f,%.6f,%zu\n", r.task.c_str(), r.sl, r.model.c_str(),
                  r.symbol_error, r.structure_error, r.edit_distance, r.edit_distance_compact, r.episodes);
    out += buf;
  }
  return out;
}

// One block per model; rows are tasks, column groups are sequence lengths,
// each holding symbol / structure / edit percentages.
std::string report_table(std::span<const MetricsRow> rows) {
  std::vector<std::string> models, tasks;
  std::set<int> sls;
  std::map<std::tuple<std::string, std::string, int>, const MetricsRow*> cell;
  auto remember = [](std::vector<std::string>& v, const std::string& s) {
    if (std::find(v.begin(), v.end(), s) == v.end()) v.push_back(s);
  };
  for (const auto& r : rows) {
    remember(models, r.model);
    remember(tasks, r.task);
    sls.insert(r.sl);
    cell[{r.model, r.task, r.sl}] = &r;
  }
  std::string out;
  char buf[128];
  for (const auto& m : models) {
    out += m + "\n";
    std::snprintf(buf, sizeof buf, "%-18s", "task");
    out += buf;
    for (int sl : sls) {
      std::snprintf(buf, sizeof buf, " | SL%-2d sym%%  str%%  edit%%", sl);
      out += buf;
    }
    out += "\n";
    for (const auto& t : tasks) {
      std::snprintf(buf, sizeof buf, "%-18s", t.c_str());
      out += buf;
      for (int sl : sls) {
        auto it = cell.find({m, t, sl});
        if (it == cell.end()) {
          std::snprintf(buf, sizeof buf, " | %22s", "-");
        } else {
          const auto& r = *it->second;
          std::snprintf(buf, sizeof buf, " | %6.2f %6.2f %6.2f", 100 * r.symbol_error, 100 * r.structure_error,
                        100 * r.edit_distance);
        }
        out += buf;
      }
      out += "\n";
    }
    out += "\n";
  }
  return out;
}

}  // namespace symplan
