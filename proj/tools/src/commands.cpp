#include "symplan/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "symplan/episode_io.hpp"
#include "symplan/error.hpp"
#include "symplan/executor.hpp"
#include "symplan/imulabel.hpp"
#include "symplan/io.hpp"
#include "symplan/pipeline.hpp"
#include "symplan/service.hpp"

namespace symplan::cli {

namespace fs = std::filesystem;

namespace {

std::atomic<bool> g_interrupted{false};
extern "C" void on_signal(int) { g_interrupted = true; }

void require_sl(int sl, bool any_sl) {
  if (!any_sl && sl != 10 && sl != 20 && sl != 30)
    throw Error("SL must be 10, 20 or 30 (pass --any-sl for other lengths)");
}

std::string fixed(double v, int digits = 6) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

// --- gen ---------------------------------------------------------------------

struct GenArgs {
  std::string task;
  std::size_t n = 0;
  std::uint64_t seed = 0;
  std::string out;
  double obs_noise = GeneratorConfig{}.obs_noise;
};

void add_gen(CLI::App& app, GenArgs& a) {
  app.add_option("--task", a.task, "c, abc, abcd, abcdef or blocks")->required();
  app.add_option("--n", a.n, "number of episodes (>= 10)")->required();
  app.add_option("--seed", a.seed);
  app.add_option("--out", a.out, "dataset directory")->required();
  app.add_option("--obs-noise", a.obs_noise);
}

int do_gen(const GenArgs& a, std::ostream& out) {
  GeneratorConfig cfg;
  cfg.obs_noise = a.obs_noise;
  const auto s = generate_dataset(parse_task(a.task), a.n, a.seed, a.out, cfg);
  out << "wrote " << s.root.string() << ": train " << s.counts.train << ", val " << s.counts.val << ", test "
      << s.counts.test << "\n";
  return 0;
}

// --- train-clf ---------------------------------------------------------------

struct ClfArgs {
  std::string data;
  std::string out;
  ClassifierHyper hyper;
};

void add_train_clf(CLI::App& app, ClfArgs& a) {
  app.add_option("--data", a.data, "dataset directory")->required();
  app.add_option("--out", a.out, "classifier checkpoint")->required();
  app.add_option("--hidden", a.hyper.hidden);
  app.add_option("--epochs", a.hyper.max_epochs);
  app.add_option("--batch", a.hyper.batch);
  app.add_option("--lr", a.hyper.lr);
  app.add_option("--seed", a.hyper.seed);
}

int do_train_clf(const ClfArgs& a, std::ostream& out) {
  const auto ds = load_dataset(a.data);
  const auto tr = stack_frames(ds.split("train"));
  const auto va = stack_frames(ds.split("val"));
  const auto classes = static_cast<int>(alphabet_for(ds.manifest.task).size());
  const auto clf = train_frame_classifier(tr.obs, tr.labels, classes, a.hyper, &va.obs, va.labels);
  save_classifier(clf, a.out);
  out << "classifier: " << clf.metrics.epochs << " epochs, train accuracy " << fixed(clf.metrics.train_accuracy, 4)
      << ", val accuracy " << fixed(clf.metrics.val_accuracy, 4) << " -> " << a.out << "\n";
  return 0;
}

// --- train-seq ---------------------------------------------------------------

struct SeqArgs {
  std::string data;
  std::string classifier;
  std::string out;
  std::string kind = "seq2seq";
  std::string train_config;
  bool any_sl = false;
  bool quiet = false;
  SeqTrainHyper hyper;
};

void add_train_seq(CLI::App& app, SeqArgs& a) {
  app.add_option("--data", a.data, "dataset directory")->required();
  app.add_option("--classifier", a.classifier, "classifier checkpoint")->required();
  app.add_option("--out", a.out, "model checkpoint")->required();
  app.add_option("--kind", a.kind, "seq2seq or attn_lstm");
  app.add_option("--train-config", a.train_config, "key = value hyperparameter file; flags override it");
  app.add_option("--sl", a.hyper.sl);
  app.add_option("--k", a.hyper.k);
  app.add_option("--latent", a.hyper.latent);
  app.add_option("--epochs", a.hyper.epochs);
  app.add_option("--batch", a.hyper.batch);
  app.add_option("--lr", a.hyper.lr);
  app.add_option("--clip", a.hyper.clip);
  app.add_option("--windows-per-epoch", a.hyper.windows_per_epoch);
  app.add_option("--val-windows", a.hyper.val_windows);
  app.add_option("--seed", a.hyper.seed);
  app.add_flag("--any-sl", a.any_sl, "allow window lengths other than 10, 20, 30");
  app.add_flag("--quiet", a.quiet);
}

int do_train_seq(SeqArgs a, const CLI::App& app, std::ostream& out, std::ostream& err) {
  if (!a.train_config.empty()) {
    // File values apply only where no flag was given.
    const auto file = parse_train_config(io::read_file(a.train_config));
    auto pick = [&](const char* flag, auto& field, const auto& value) {
      if (app.count(flag) == 0) field = value;
    };
    pick("--sl", a.hyper.sl, file.sl);
    pick("--k", a.hyper.k, file.k);
    pick("--latent", a.hyper.latent, file.latent);
    pick("--epochs", a.hyper.epochs, file.epochs);
    pick("--batch", a.hyper.batch, file.batch);
    pick("--lr", a.hyper.lr, file.lr);
    pick("--clip", a.hyper.clip, file.clip);
    pick("--windows-per-epoch", a.hyper.windows_per_epoch, file.windows_per_epoch);
    pick("--val-windows", a.hyper.val_windows, file.val_windows);
    pick("--seed", a.hyper.seed, file.seed);
  }
  require_sl(a.hyper.sl, a.any_sl);
  if (a.hyper.k < 1) throw Error("k must be >= 1");
  const auto kind = parse_model_kind(a.kind);
  const auto ds = load_dataset(a.data);
  const auto clf = load_classifier(a.classifier);
  const auto& alphabet = alphabet_for(ds.manifest.task);
  const auto train = embed_episodes(clf.model, ds.split("train"));
  const auto val = embed_episodes(clf.model, ds.split("val"));
  const auto model = train_sequence_model(kind, train, val, alphabet.name(), static_cast<int>(alphabet.size()),
                                          a.hyper, [&](int epoch, double tl, double vl) {
                                            if (!a.quiet)
                                              err << "epoch " << epoch << " train " << fixed(tl) << " val "
                                                  << fixed(vl) << "\n";
                                          });
  save_sequence_model(model, a.out);
  out << to_string(kind) << " SL=" << model.sl << " k=" << model.k << ": best val loss " << fixed(model.val_loss)
      << " at epoch " << model.curves.best_epoch << " -> " << a.out << "\n";
  return 0;
}

// --- eval --------------------------------------------------------------------

struct EvalArgs {
  std::vector<std::string> data;
  std::string models;
  std::vector<int> sls{10, 20, 30};
  std::vector<std::string> kinds{"seq2seq", "attn_lstm"};
  bool oracle = false;
  bool skip_missing = false;
  int k = 1;
  std::string out;
  std::string table;
};

void add_eval(CLI::App& app, EvalArgs& a) {
  app.add_option("--data", a.data, "dataset directories (one per task)")->required();
  app.add_option("--models", a.models, "root holding <task>/classifier.json and <task>/<kind>-sl<SL>.json");
  app.add_option("--sl", a.sls)->delimiter(',');
  app.add_option("--kinds", a.kinds)->delimiter(',');
  app.add_option("--k", a.k);
  app.add_flag("--oracle", a.oracle, "add ground-truth rows (and allow running without --models)");
  app.add_flag("--skip-missing", a.skip_missing, "skip grid cells without a checkpoint");
  app.add_option("--out", a.out, "metrics CSV");
  app.add_option("--table", a.table, "human-readable table");
}

int do_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  if (a.models.empty() && !a.oracle) throw Error("eval needs --models or --oracle");
  std::vector<MetricsRow> rows;
  for (const auto& dir : a.data) {
    const auto ds = load_dataset(dir);
    const auto task = std::string(to_string(ds.manifest.task));
    const auto& test = ds.split("test");
    if (a.oracle) {
      SequenceData truth;
      for (const auto& e : test) truth.labels.push_back(e.labels());
      for (int sl : a.sls) {
        auto row = evaluate_oracle(truth, sl, a.k);
        row.task = task;
        rows.push_back(row);
      }
    }
    if (a.models.empty()) continue;
    const fs::path root = fs::path(a.models) / task;
    const auto clf_path = root / "classifier.json";
    if (!fs::exists(clf_path)) {
      if (a.skip_missing) {
        err << "skip " << task << ": no " << clf_path.string() << "\n";
        continue;
      }
      throw IoError("missing classifier checkpoint: " + clf_path.string());
    }
    const auto clf = load_classifier(clf_path);
    const auto data = embed_episodes(clf.model, test);
    for (const auto& kind_name : a.kinds) {
      const auto kind = parse_model_kind(kind_name);
      for (int sl : a.sls) {
        const auto path = root / (std::string(to_string(kind)) + "-sl" + std::to_string(sl) + ".json");
        if (!fs::exists(path)) {
          if (a.skip_missing) {
            err << "skip " << path.string() << "\n";
            continue;
          }
          throw IoError("missing model checkpoint: " + path.string());
        }
        const auto model = load_sequence_model(path);
        auto row = evaluate_model(model, data, sl, a.k);
        row.task = task;
        rows.push_back(row);
      }
    }
  }
  if (rows.empty()) throw Error("nothing to evaluate");
  const auto csv = report_csv(rows);
  const auto table = report_table(rows);
  if (!a.out.empty()) io::write_file_atomic(a.out, csv);
  if (!a.table.empty()) io::write_file_atomic(a.table, table);
  out << table;
  return 0;
}

// --- rollout -----------------------------------------------------------------

struct RolloutArgs {
  std::string task;
  int n = 20;
  std::uint64_t seed = 0;
  std::string policy = "oracle";
  std::string classifier;
  std::string model;
  std::string script;
  bool ball_back = false;
  std::string trace_dir;
  std::string out;
  long budget = ExecutorConfig{}.budget_ticks;
};

void add_rollout(CLI::App& app, RolloutArgs& a) {
  app.add_option("--task", a.task)->required();
  app.add_option("--n", a.n);
  app.add_option("--seed", a.seed);
  app.add_option("--policy", a.policy, "oracle, faulty_once or model");
  app.add_option("--classifier", a.classifier);
  app.add_option("--model", a.model);
  app.add_option("--script", a.script, "perturbation script (JSON)");
  app.add_flag("--ball-back", a.ball_back, "put the ball back into the cabinet after it is fetched");
  app.add_option("--trace-dir", a.trace_dir, "write one JSONL trace per episode");
  app.add_option("--out", a.out, "counts JSON");
  app.add_option("--budget", a.budget, "control ticks per episode");
}

int do_rollout(const RolloutArgs& a, std::ostream& out) {
  const auto task = parse_task(a.task);
  if (a.n < 1) throw Error("--n must be >= 1");
  PerturbationScript script;
  if (!a.script.empty()) script = perturbation_script_from_json(nlohmann::json::parse(io::read_file(a.script)), task);
  if (a.ball_back) {
    if (!is_manipulation(task)) throw Error("--ball-back needs a manipulation task");
    const auto extra = ball_back_to_cabinet_script();
    script.insert(script.end(), extra.begin(), extra.end());
  }
  PolicyFactory factory;
  if (a.policy == "oracle") {
    factory = [] { return std::make_unique<OraclePolicy>(); };
  } else if (a.policy == "faulty_once") {
    factory = [] { return std::make_unique<FaultyOncePolicy>(); };
  } else if (a.policy == "model") {
    if (a.classifier.empty() || a.model.empty()) throw Error("--policy model needs --classifier and --model");
    auto clf = std::make_shared<const FrameClassifier>(load_classifier(a.classifier).model);
    auto model = std::make_shared<const SequenceModel>(load_sequence_model(a.model));
    if (model->alphabet != alphabet_for(task).name()) throw Error("model alphabet does not match the task");
    factory = [clf, model] { return std::make_unique<ModelPolicy>(clf, model); };
  } else {
    throw Error("unknown policy: " + a.policy);
  }
  ExecutorConfig cfg;
  cfg.budget_ticks = a.budget;
  std::vector<EpisodeOutcome> outcomes;
  const auto counts = batch_rollout(task, factory, a.n, a.seed, script, cfg, &outcomes);
  if (!a.trace_dir.empty()) {
    fs::create_directories(a.trace_dir);
    for (std::size_t i = 0; i < outcomes.size(); ++i)
      io::write_file_atomic(fs::path(a.trace_dir) / ("episode_" + std::to_string(i) + ".jsonl"),
                            trace_to_jsonl(outcomes[i], task));
  }
  const nlohmann::json summary = {{"task", a.task},
                                  {"policy", a.policy},
                                  {"n", a.n},
                                  {"seed", a.seed},
                                  {"success", counts.success},
                                  {"recovered", counts.recovered},
                                  {"failure", counts.failure},
                                  {"accuracy", counts.accuracy()}};
  if (!a.out.empty()) io::write_file_atomic(a.out, summary.dump(2) + "\n");
  out << "success " << counts.success << ", recovered " << counts.recovered << ", failure " << counts.failure
      << " (accuracy " << fixed(counts.accuracy(), 3) << ")\n";
  return 0;
}

// --- IMU ---------------------------------------------------------------------

struct SynthArgs {
  std::string episode;
  std::string out;
  std::uint64_t seed = 0;
  bool zero_noise = false;
  SynthImuConfig cfg;
};

void add_synth(CLI::App& app, SynthArgs& a) {
  app.add_option("--episode", a.episode, "blocks episode (JSONL)")->required();
  app.add_option("--out", a.out, "stream directory")->required();
  app.add_option("--seed", a.seed);
  app.add_option("--rate", a.cfg.rate);
  app.add_option("--accel-noise", a.cfg.accel_noise);
  app.add_option("--gyro-noise", a.cfg.gyro_noise);
  app.add_flag("--zero-noise", a.zero_noise);
}

int do_synth(SynthArgs a, std::ostream& out) {
  if (a.zero_noise) a.cfg.accel_noise = a.cfg.gyro_noise = 0.0;
  const auto ep = load_episode(a.episode);
  const auto streams = synth_imu(ep, a.cfg, a.seed);
  std::vector<double> clock;
  for (const auto& f : ep.frames) clock.push_back(f.t);
  write_imu_dir(a.out, streams, clock, blocks_alphabet());
  out << "wrote " << streams.size() << " streams, " << clock.size() << " frames -> " << a.out << "\n";
  return 0;
}

struct LabelArgs {
  std::string in;
  std::string out;
  std::string truth;
  double frame_rate = 10.0;
  LabelConfig cfg;
};

void add_label(CLI::App& app, LabelArgs& a) {
  app.add_option("--in", a.in, "stream directory (<glyph>.csv + clock.csv)")->required();
  app.add_option("--out", a.out, "label episode (JSONL)")->required();
  app.add_option("--truth", a.truth, "episode to score the labels against");
  app.add_option("--frame-rate", a.frame_rate);
  app.add_option("--beta", a.cfg.beta);
  app.add_option("--threshold", a.cfg.motion.threshold);
  app.add_option("--q-res", a.cfg.motion.q_res);
  app.add_option("--w-accel", a.cfg.motion.w_accel);
  app.add_option("--w-orient", a.cfg.motion.w_orient);
}

int do_label(const LabelArgs& a, std::ostream& out) {
  const auto& alphabet = blocks_alphabet();
  const auto rec = read_imu_dir(a.in, alphabet);
  const auto labels = label_streams(rec.streams, rec.clock, 1.0 / a.frame_rate, alphabet, a.cfg);
  io::write_file_atomic(a.out, episode_to_jsonl(labels_to_episode(labels, rec.clock, a.frame_rate)));
  out << "labels " << alphabet.render(compact_encode(labels).symbols());
  if (!a.truth.empty()) {
    const auto truth = load_episode(a.truth).labels();
    out << ", symbol error " << fixed(symbol_error(labels, truth), 4)
        << (compact_encode(labels) == compact_encode(truth) ? ", structure matches" : ", structure differs");
  }
  out << "\n";
  return 0;
}

// --- misc --------------------------------------------------------------------

int do_grad_check(std::ostream& out) {
  const double c = grad_check_classifier(kObservationDim, 8, 6, 1);
  const double s = grad_check(ModelKind::seq2seq, 4, 5, 6, 4, 1);
  const double t = grad_check(ModelKind::attn_lstm, 4, 5, 6, 4, 1);
  out << "classifier " << c << "\nseq2seq " << s << "\nattn_lstm " << t << "\n";
  return std::max({c, s, t}) < 1e-4 ? 0 : 1;
}

struct ServeArgs {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::size_t max_sessions = 64;
};

int do_serve(const ServeArgs& a, std::ostream& out) {
  SessionRegistry registry(a.max_sessions);
  HttpServer server(registry);
  const int port = server.bind(a.host, a.port);
  out << "listening on http://" << a.host << ":" << port << std::endl;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  server.start();
  while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
  server.stop();
  registry.clear();
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"symplan: learned task planning with action symbols", "symplan"};
  app.set_config("--config", "", "TOML-style config file; flags take precedence");
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  GenArgs gen;
  ClfArgs clf;
  SeqArgs seq;
  EvalArgs eval;
  RolloutArgs rollout;
  SynthArgs synth;
  LabelArgs label;
  ServeArgs serve;

  auto* c_gen = app.add_subcommand("gen", "generate a demonstration dataset");
  add_gen(*c_gen, gen);
  auto* c_clf = app.add_subcommand("train-clf", "train the frame classifier");
  add_train_clf(*c_clf, clf);
  auto* c_seq = app.add_subcommand("train-seq", "train a sequence model");
  add_train_seq(*c_seq, seq);
  auto* c_eval = app.add_subcommand("eval", "evaluate models on test splits");
  add_eval(*c_eval, eval);
  auto* c_roll = app.add_subcommand("rollout", "closed-loop batch rollouts");
  add_rollout(*c_roll, rollout);
  auto* c_synth = app.add_subcommand("synth-imu", "synthesize IMU streams for a blocks episode");
  add_synth(*c_synth, synth);
  auto* c_label = app.add_subcommand("label-imu", "label frames from IMU streams");
  add_label(*c_label, label);
  auto* c_grad = app.add_subcommand("grad-check", "finite-difference gradient checks");
  auto* c_serve = app.add_subcommand("serve", "HTTP session server");
  c_serve->add_option("--host", serve.host);
  c_serve->add_option("--port", serve.port, "0 picks a free port");
  c_serve->add_option("--max-sessions", serve.max_sessions);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  try {
    if (*c_gen) return do_gen(gen, out);
    if (*c_clf) return do_train_clf(clf, out);
    if (*c_seq) return do_train_seq(seq, *c_seq, out, err);
    if (*c_eval) return do_eval(eval, out, err);
    if (*c_roll) return do_rollout(rollout, out);
    if (*c_synth) return do_synth(synth, out);
    if (*c_label) return do_label(label, out);
    if (*c_grad) return do_grad_check(out);
    if (*c_serve) return do_serve(serve, out);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace symplan::cli
