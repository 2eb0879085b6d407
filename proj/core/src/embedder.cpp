#include "symplan/embedder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

#include "symplan/error.hpp"
#include "symplan/io.hpp"
#include "symplan/nn.hpp"

namespace symplan {

namespace {

void put(FrameObservation& v, int& at, const Vec3& p) {
  v.segment<3>(at) = p;
  at += 3;
}

void put_one_hot(FrameObservation& v, int& at, int index, int size) {
  if (index >= 0 && index < size) v(at + index) = 1.0;
  at += size;
}

FrameObservation features(const ManipulationState& s) {
  FrameObservation v = FrameObservation::Zero(kObservationDim);
  int at = 0;
  v(at++) = s.door == DoorState::open ? 1.0 : 0.0;
  v(at++) = s.door_fraction;
  put(v, at, s.ee);
  put(v, at, s.cup_pose);
  put(v, at, s.ball_pose);
  put_one_hot(v, at, static_cast<int>(s.held), 3);
  put_one_hot(v, at, static_cast<int>(s.cup), 3);
  put_one_hot(v, at, static_cast<int>(s.ball), 4);
  put_one_hot(v, at, static_cast<int>(s.arm) - 1, 3);
  return v;
}

FrameObservation features(const BlocksState& s) {
  FrameObservation v = FrameObservation::Zero(kObservationDim);
  int at = 0;
  for (bool p : s.placed) v(at++) = p ? 1.0 : 0.0;
  for (const auto& p : s.pose) put(v, at, p);
  put(v, at, s.hand);
  v(at++) = s.held >= 0 ? 1.0 : 0.0;
  return v;
}

struct Forward {
  Eigen::MatrixXd a1, e, logits;
};

Forward forward(const FrameClassifier& clf, const Eigen::MatrixXd& x) {
  Forward f;
  f.a1 = ((clf.w1 * x).colwise() + clf.b1).array().tanh().matrix();
  f.e = (clf.w2 * f.a1).colwise() + clf.b2;
  f.logits = (clf.w3 * f.e).colwise() + clf.b3;
  return f;
}

void check_input(const FrameClassifier& clf, Eigen::Index rows) {
  if (rows != clf.input_dim())
    throw Error("observation has " + std::to_string(rows) + " features, classifier expects " +
                std::to_string(clf.input_dim()));
}

void check_labels(std::span<const SymbolId> labels, int num_classes, Eigen::Index cols) {
  if (static_cast<Eigen::Index>(labels.size()) != cols) throw Error("label count does not match observations");
  for (auto l : labels)
    if (l < 0 || l >= num_classes) throw Error("label " + std::to_string(l) + " outside the class range");
}

}  // namespace

FrameObservation render_observation(const WorldState& state, std::uint64_t noise_seed, double sigma) {
  FrameObservation v = std::visit([](const auto& s) { return features(s); }, state);
  if (sigma > 0.0) {
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) += noise(rng);
  }
  return v;
}

FrameClassifier FrameClassifier::zeros(int input_dim, int hidden_dim, int embed_dim, int num_classes) {
  FrameClassifier c;
  c.w1 = Eigen::MatrixXd::Zero(hidden_dim, input_dim);
  c.b1 = Eigen::VectorXd::Zero(hidden_dim);
  c.w2 = Eigen::MatrixXd::Zero(embed_dim, hidden_dim);
  c.b2 = Eigen::VectorXd::Zero(embed_dim);
  c.w3 = Eigen::MatrixXd::Zero(num_classes, embed_dim);
  c.b3 = Eigen::VectorXd::Zero(num_classes);
  return c;
}

FrameClassifier FrameClassifier::initialize(int input_dim, int hidden_dim, int embed_dim, int num_classes,
                                            std::uint64_t seed) {
  if (input_dim <= 0 || hidden_dim <= 0 || embed_dim <= 0 || num_classes <= 1)
    throw Error("classifier dimensions must be positive");
  auto c = zeros(input_dim, hidden_dim, embed_dim, num_classes);
  std::mt19937_64 rng(seed);
  nn::uniform_fill(c.w1, 1.0 / std::sqrt(input_dim), rng);
  nn::uniform_fill(c.w2, 1.0 / std::sqrt(hidden_dim), rng);
  nn::uniform_fill(c.w3, 1.0 / std::sqrt(embed_dim), rng);
  return c;
}

double classifier_loss(const FrameClassifier& clf, const Eigen::MatrixXd& inputs, std::span<const SymbolId> labels,
                       FrameClassifier* grad) {
  check_input(clf, inputs.rows());
  check_labels(labels, clf.num_classes(), inputs.cols());
  if (inputs.cols() == 0) throw Error("empty batch");
  const double scale = 1.0 / static_cast<double>(inputs.cols());
  const auto f = forward(clf, inputs);
  Eigen::MatrixXd dlogits;
  const double loss = nn::cross_entropy(f.logits, labels, scale, grad ? &dlogits : nullptr) * scale;
  if (grad) {
    grad->w3 = dlogits * f.e.transpose();
    grad->b3 = dlogits.rowwise().sum();
    const Eigen::MatrixXd de = clf.w3.transpose() * dlogits;
    grad->w2 = de * f.a1.transpose();
    grad->b2 = de.rowwise().sum();
    const Eigen::MatrixXd dz1 = ((clf.w2.transpose() * de).array() * (1.0 - f.a1.array().square())).matrix();
    grad->w1 = dz1 * inputs.transpose();
    grad->b1 = dz1.rowwise().sum();
  }
  return loss;
}

TrainedClassifier train_frame_classifier(const Eigen::MatrixXd& inputs, std::span<const SymbolId> labels,
                                         int num_classes, const ClassifierHyper& hyper,
                                         const Eigen::MatrixXd* val_inputs, std::span<const SymbolId> val_labels) {
  if (inputs.cols() == 0) throw Error("cannot train a classifier on an empty set");
  check_labels(labels, num_classes, inputs.cols());
  if (hyper.batch <= 0 || hyper.max_epochs <= 0) throw Error("batch size and epoch budget must be positive");

  TrainedClassifier out;
  out.seed = hyper.seed;
  out.model = FrameClassifier::initialize(static_cast<int>(inputs.rows()), hyper.hidden, hyper.embed, num_classes,
                                          hyper.seed);
  auto& model = out.model;
  auto velocity = nn::zeros_like(model);
  auto grad = nn::zeros_like(model);

  const auto n = static_cast<std::size_t>(inputs.cols());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(hyper.seed ^ 0x9e3779b97f4a7c15ULL);

  Eigen::MatrixXd xb(inputs.rows(), hyper.batch);
  std::vector<SymbolId> yb;
  double best = std::numeric_limits<double>::infinity();
  int stale = 0;
  for (int epoch = 1; epoch <= hyper.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(hyper.batch)) {
      const auto end = std::min(n, start + static_cast<std::size_t>(hyper.batch));
      const auto b = static_cast<Eigen::Index>(end - start);
      xb.resize(inputs.rows(), b);
      yb.clear();
      for (Eigen::Index k = 0; k < b; ++k) {
        xb.col(k) = inputs.col(static_cast<Eigen::Index>(order[start + static_cast<std::size_t>(k)]));
        yb.push_back(labels[order[start + static_cast<std::size_t>(k)]]);
      }
      epoch_loss += classifier_loss(model, xb, yb, &grad) * static_cast<double>(b);
      auto p = nn::param_views(model);
      auto g = nn::param_views(grad);
      auto v = nn::param_views(velocity);
      for (std::size_t k = 0; k < p.size(); ++k) {
        v[k] = hyper.momentum * v[k] - hyper.lr * g[k];
        p[k] += v[k];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) throw Error("classifier loss diverged at epoch " + std::to_string(epoch));
    out.metrics.epochs = epoch;
    out.metrics.train_loss = epoch_loss;
    if (best - epoch_loss < hyper.tolerance * std::abs(best)) {
      if (++stale >= hyper.patience) break;
    } else {
      stale = 0;
    }
    best = std::min(best, epoch_loss);
  }
  out.metrics.train_accuracy = classifier_accuracy(model, inputs, labels);
  if (val_inputs && val_inputs->cols() > 0)
    out.metrics.val_accuracy = classifier_accuracy(model, *val_inputs, val_labels);
  return out;
}

Embedding embed(const FrameClassifier& clf, const FrameObservation& obs) {
  check_input(clf, obs.size());
  const Eigen::VectorXd a1 = (clf.w1 * obs + clf.b1).array().tanh().matrix();
  return clf.w2 * a1 + clf.b2;
}

Eigen::MatrixXd embed_batch(const FrameClassifier& clf, const Eigen::MatrixXd& obs) {
  check_input(clf, obs.rows());
  const Eigen::MatrixXd a1 = ((clf.w1 * obs).colwise() + clf.b1).array().tanh().matrix();
  return (clf.w2 * a1).colwise() + clf.b2;
}

Eigen::VectorXd class_probabilities(const FrameClassifier& clf, const FrameObservation& obs) {
  const Eigen::MatrixXd logits = (clf.w3 * embed(clf, obs)).colwise() + clf.b3;
  return nn::softmax_columns(logits).col(0);
}

double classifier_accuracy(const FrameClassifier& clf, const Eigen::MatrixXd& inputs,
                           std::span<const SymbolId> labels) {
  check_input(clf, inputs.rows());
  check_labels(labels, clf.num_classes(), inputs.cols());
  if (inputs.cols() == 0) return 0.0;
  const auto f = forward(clf, inputs);
  std::size_t hits = 0;
  for (Eigen::Index j = 0; j < inputs.cols(); ++j)
    if (nn::argmax(f.logits.col(j)) == labels[static_cast<std::size_t>(j)]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(inputs.cols());
}

double grad_check_classifier(int input_dim, int hidden_dim, int num_classes, std::uint64_t seed, double eps) {
  const int embed_dim = std::max(2, hidden_dim / 2);
  const auto model = FrameClassifier::initialize(input_dim, hidden_dim, embed_dim, num_classes, seed);
  std::mt19937_64 rng(seed + 1);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int n = 8;
  Eigen::MatrixXd x(input_dim, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < input_dim; ++i) x(i, j) = gauss(rng);
  std::vector<SymbolId> y(n);
  for (int j = 0; j < n; ++j) y[static_cast<std::size_t>(j)] = j % num_classes;
  return nn::finite_difference_check(
      model, [&](const FrameClassifier& m, FrameClassifier* g) { return classifier_loss(m, x, y, g); }, eps);
}

nlohmann::json to_json(const TrainedClassifier& clf) {
  const auto& m = clf.model;
  return {{"kind", "frame_classifier"},
          {"version", kClassifierCheckpointVersion},
          {"seed", clf.seed},
          {"metrics",
           {{"train_loss", clf.metrics.train_loss},
            {"train_accuracy", clf.metrics.train_accuracy},
            {"val_accuracy", clf.metrics.val_accuracy},
            {"epochs", clf.metrics.epochs}}},
          {"w1", nn::matrix_to_json(m.w1)},
          {"b1", nn::vector_to_json(m.b1)},
          {"w2", nn::matrix_to_json(m.w2)},
          {"b2", nn::vector_to_json(m.b2)},
          {"w3", nn::matrix_to_json(m.w3)},
          {"b3", nn::vector_to_json(m.b3)}};
}

TrainedClassifier classifier_from_json(const nlohmann::json& j) {
  TrainedClassifier out;
  try {
    if (j.at("kind").get<std::string>() != "frame_classifier") throw Error("checkpoint is not a frame classifier");
    const int version = j.at("version").get<int>();
    if (version != kClassifierCheckpointVersion)
      throw Error("unsupported classifier checkpoint version " + std::to_string(version));
    out.seed = j.at("seed").get<std::uint64_t>();
    const auto& mj = j.at("metrics");
    out.metrics.train_loss = mj.at("train_loss").get<double>();
    out.metrics.train_accuracy = mj.at("train_accuracy").get<double>();
    out.metrics.val_accuracy = mj.at("val_accuracy").get<double>();
    out.metrics.epochs = mj.at("epochs").get<int>();
    auto& m = out.model;
    m.w1 = nn::matrix_from_json(j.at("w1"));
    m.b1 = nn::vector_from_json(j.at("b1"));
    m.w2 = nn::matrix_from_json(j.at("w2"));
    m.b2 = nn::vector_from_json(j.at("b2"));
    m.w3 = nn::matrix_from_json(j.at("w3"));
    m.b3 = nn::vector_from_json(j.at("b3"));
  } catch (const nlohmann::json::exception& e) {
    throw Error(std::string("malformed classifier checkpoint: ") + e.what());
  }
  const auto& m = out.model;
  if (m.b1.size() != m.w1.rows() || m.w2.cols() != m.w1.rows() || m.b2.size() != m.w2.rows() ||
      m.w3.cols() != m.w2.rows() || m.b3.size() != m.w3.rows())
    throw Error("classifier checkpoint has inconsistent shapes");
  return out;
}

void save_classifier(const TrainedClassifier& clf, const std::filesystem::path& path) {
  io::write_file_atomic(path, to_json(clf).dump());
}

TrainedClassifier load_classifier(const std::filesystem::path& path) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(io::read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error("classifier checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  return classifier_from_json(j);
}

}  // namespace symplan
