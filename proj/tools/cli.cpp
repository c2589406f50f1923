#include "cli.hpp"

#include "hbmi/datasets.hpp"
#include "hbmi/errors.hpp"
#include "hbmi/evaluation.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace hbmi::cli {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

struct SynthArgs {
  SynthConfig config;
  std::string out;
  bool dry_run = false;
};

struct TrainArgs {
  std::string data, out, mode = "hbmi10", emg_hand = "Right";
  std::vector<int> sessions;
};

struct EvalArgs {
  std::string data, out, protocol = "within", mode = "all", emg_hand = "Right";
  std::vector<int> sessions;
  std::vector<int> test_sessions;
  int folds = 5;
  int repetitions = 5;
  std::uint64_t seed = 1;
  std::uint64_t permute_seed = 0;
};

struct DecodeArgs {
  std::string model, data, out;
  std::vector<int> sessions;
};

struct ContextArgs {
  std::string data, out;
  int test_session = 5;
  std::vector<int> levels;
  std::vector<double> ps;
  bool standard = false;
  bool combined = false;
  double correct_prob = 1.0;
  std::uint64_t seed = 1;
};

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return kUsage;
    case ErrorKind::Numerical: return kNumericalError;
    default: return kDataError;
  }
}

void add_pipeline_options(CLI::App* cmd, PipelineConfig& p) {
  cmd->add_option("--eeg-rate", p.eeg_target_rate, "EEG rate after downsampling (Hz)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--window", p.window_seconds, "Decision window length (s)")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--csp-filters", p.csp_filters, "CSP filters per band (even)")->check(CLI::Range(2, 64))->capture_default_str();
  cmd->add_option("--shrinkage", p.csp_shrinkage, "Covariance shrinkage")->check(CLI::Range(0.0, 1.0))->capture_default_str();
  cmd->add_option("--synergies", p.n_synergies, "Muscle synergies")->check(CLI::Range(1, 64))->capture_default_str();
  cmd->add_option("--nmf-seed", p.nmf_seed, "NMF initialization seed")->capture_default_str();
  cmd->add_option("--nmf-max-iter", p.nmf_max_iter, "NMF iteration cap")->check(CLI::PositiveNumber)->capture_default_str();
  cmd->add_option("--nmf-tol", p.nmf_tol, "NMF relative-decrease tolerance")->check(CLI::NonNegativeNumber)->capture_default_str();
}

// Only the executed subcommand; unset list options are left out so the file parses back.
void write_run_config(const CLI::App& sub, const fs::path& dir) {
  std::string text = "# resolved configuration; rerun with --config <this file> --out <dir>\n[" + sub.get_name() + "]\n";
  std::istringstream lines(sub.config_to_str(true, false));
  for (std::string line; std::getline(lines, line);) {
    if (line.size() >= 3 && line.compare(line.size() - 3, 3, "=\"\"") == 0) continue;
    text += line + "\n";
  }
  write_file_atomic(dir / "run_config.toml", text);
}

std::vector<ModeSpec> parse_modes(const std::string& mode, const std::string& hand) {
  const Hand h = parse_hand(hand);
  if (mode == "all") return {ModeSpec{DecodeMode::Hybrid10, h}, ModeSpec{DecodeMode::Eeg4, h}, ModeSpec{DecodeMode::Emg5, h}};
  return {ModeSpec{parse_mode(mode), h}};
}

std::string mode_tag(const ModeSpec& m) {
  std::string tag(to_string(m.mode));
  if (m.mode == DecodeMode::Emg5) tag += "-" + std::string(to_string(m.emg_hand));
  return tag;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

json fit_log_json(const AccuracyReport& r) {
  json fits = json::array();
  for (const auto& f : r.fit_log) {
    fits.push_back(json{{"repetition", f.repetition + 1},
                        {"fold", f.fold + 1},
                        {"sessions", std::vector<int>(f.sessions.begin(), f.sessions.end())},
                        {"n_trials", f.n_trials},
                        {"n_windows", f.n_windows},
                        {"test_windows_in_training", f.test_windows_in_training}});
  }
  return json{{"protocol", r.protocol}, {"mode", mode_tag(r.mode)}, {"session", r.session},
              {"leakage_free", r.leakage_free()}, {"fits", std::move(fits)}};
}

void write_report_files(const AccuracyReport& r, const fs::path& dir) {
  const std::string stem = r.protocol + "_" + mode_tag(r.mode) + "_s" + std::to_string(r.session);
  write_file_atomic(dir / "reports" / (stem + "_repetitions.csv"), format_repetitions_csv(r));
  write_file_atomic(dir / "reports" / (stem + "_confusion.csv"), format_confusion_csv(r));
  write_file_atomic(dir / "reports" / (stem + "_decisions.csv"), format_decision_log(r));
}

int cmd_synth(const SynthArgs& a, const CLI::App& app, std::ostream& out) {
  const DatasetManifest plan = plan_synthetic(a.config);
  const auto sessions = plan.sessions();
  if (a.dry_run) {
    out << "plan: " << sessions.size() << " sessions";
    for (const int s : sessions) out << (s == sessions.front() ? ": " : ", ") << plan.trials_in_session(s).size();
    out << " trials per session, " << plan.trials.size() << " trials total\n";
    return kOk;
  }
  if (a.out.empty()) throw Error(ErrorKind::InvalidArgument, "cli", "synth needs --out");
  const fs::path dir(a.out);
  generate_synthetic(a.config, dir);
  write_run_config(app, dir);
  out << "wrote " << sessions.size() << " sessions x " << plan.trials_in_session(sessions.front()).size()
      << " trials to " << dir.string() << "\n";
  return kOk;
}

int cmd_train(const TrainArgs& a, const PipelineConfig& pipeline, int jobs, const CLI::App& app, std::ostream& out) {
  const DiskDataset data(a.data);
  const ModeSpec mode = parse_modes(a.mode, a.emg_hand).front();
  const auto trials = preprocess_dataset(data, pipeline, a.sessions, jobs);
  std::vector<const PreprocessedTrial*> train;
  for (const auto& t : trials) train.push_back(&t);
  FitAudit audit;
  ModelBundle bundle{fit_hierarchy(train, mode, pipeline, &audit), pipeline, mode, {}};
  std::string sessions;
  for (const int s : audit.sessions) sessions += (sessions.empty() ? "" : ",") + std::to_string(s);
  bundle.metadata["subject_id"] = data.manifest().subject_id;
  bundle.metadata["training_sessions"] = sessions;
  bundle.metadata["training_trials"] = std::to_string(audit.n_trials);
  const fs::path dir(a.out);
  save_model_bundle(bundle, dir);
  write_run_config(app, dir);
  out << "trained " << to_string(mode.mode) << " on sessions " << sessions << " (" << audit.n_trials << " trials); model in "
      << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const EvalArgs& a, const PipelineConfig& pipeline, int jobs, const CLI::App& app, std::ostream& out) {
  const DiskDataset data(a.data);
  const auto available = data.manifest().sessions();
  const auto modes = parse_modes(a.mode, a.emg_hand);
  EvalOptions opts;
  opts.folds = a.folds;
  opts.repetitions = a.repetitions;
  opts.seed = a.seed;
  opts.pipeline = pipeline;
  opts.jobs = jobs;

  std::vector<int> targets;
  std::vector<int> needed;
  if (a.protocol == "within") {
    targets = a.sessions.empty() ? available : a.sessions;
    needed = targets;
  } else {
    if (a.test_sessions.empty()) {
      for (const int s : {4, 5})
        if (std::find(available.begin(), available.end(), s) != available.end()) targets.push_back(s);
      if (targets.empty()) throw Error(ErrorKind::InvalidArgument, "cli", "dataset has no session 4 or 5; pass --test-session");
    } else {
      targets = a.test_sessions;
    }
    // Gaps are left for the protocol to report.
    const int last = *std::max_element(targets.begin(), targets.end());
    for (int s = 1; s <= last; ++s)
      if (std::find(available.begin(), available.end(), s) != available.end()) needed.push_back(s);
  }
  if (a.protocol == "within") {
    for (const int s : needed) {
      if (std::find(available.begin(), available.end(), s) == available.end()) {
        throw Error(ErrorKind::Validation, "datasets", "dataset has no session " + std::to_string(s));
      }
    }
  }

  auto trials = preprocess_dataset(data, pipeline, needed, jobs);
  if (a.permute_seed != 0) trials = permute_labels(trials, a.permute_seed);

  const fs::path dir(a.out);
  std::vector<AccuracyReport> reports;
  json log = json::array();
  for (const auto& mode : modes) {
    for (const int s : targets) {
      AccuracyReport r = a.protocol == "within" ? within_session_cv(trials, s, mode, opts) : online_eval(trials, s, mode, opts);
      write_report_files(r, dir);
      log.push_back(fit_log_json(r));
      out << a.protocol << " " << mode_tag(mode) << " session " << s << ": accuracy " << fmt(r.accuracy);
      if (r.repetition_accuracy.size() > 1) {
        out << " (repetitions";
        for (const double v : r.repetition_accuracy) out << " " << fmt(v);
        out << ")";
      }
      out << (r.leakage_free() ? "" : " LEAKAGE") << "\n";
      r.decisions.clear();
      reports.push_back(std::move(r));
    }
  }
  write_file_atomic(dir / "accuracy_table.csv", format_accuracy_table(reports));
  write_file_atomic(dir / "fit_log.json", log.dump(1) + "\n");
  write_run_config(app, dir);
  return kOk;
}

int cmd_decode(const DecodeArgs& a, int jobs, const CLI::App& app, std::ostream& out) {
  const ModelBundle bundle = load_model_bundle_full(a.model);
  const DiskDataset data(a.data);
  const auto trials = preprocess_dataset(data, bundle.pipeline, a.sessions, jobs);
  const auto names = bundle.mode.class_names();

  std::ostringstream csv;
  csv << "session,block,trial,label,window,predicted";
  for (const auto& n : names) csv << ",score_" << n;
  csv << "\n";
  std::size_t n = 0, correct = 0;
  for (const auto& t : trials) {
    const int truth = bundle.mode.class_of(t.info.label);
    if (truth < 0) continue;
    for (std::size_t w = 0; w < t.windows.size(); ++w) {
      const auto features = window_features(bundle.model, t.windows[w], bundle.mode);
      const auto d = decode(bundle.model, bundle.model.default_prior, features, bundle.mode);
      csv << t.info.session << ',' << t.info.block << ',' << t.info.trial_index << ',' << to_string(t.info.label) << ','
          << w << ',' << names[static_cast<std::size_t>(d.predicted)];
      for (const double s : d.scores) {
        char buf[40];
        std::snprintf(buf, sizeof buf, ",%.17g", s);
        csv << buf;
      }
      csv << "\n";
      ++n;
      correct += d.predicted == truth;
    }
  }
  const fs::path dir(a.out);
  write_file_atomic(dir / "decisions.csv", csv.str());
  write_run_config(app, dir);
  out << "decoded " << n << " windows";
  if (n > 0) out << ", accuracy " << fmt(static_cast<double>(correct) / static_cast<double>(n));
  out << "\n";
  return kOk;
}

int cmd_context(const ContextArgs& a, const PipelineConfig& pipeline, int jobs, const CLI::App& app, std::ostream& out) {
  if (a.levels.size() != a.ps.size()) {
    throw Error(ErrorKind::InvalidArgument, "cli", "--level and --p must be given the same number of times");
  }
  std::vector<ContextConfig> configs;
  if (a.standard || a.levels.empty()) configs = standard_context_configs();
  if (!a.levels.empty()) {
    std::vector<ContextConfig> custom;
    for (std::size_t i = 0; i < a.levels.size(); ++i) {
      ContextConfig c;
      c.name = "level" + std::to_string(a.levels[i]) + "_p" + fmt(a.ps[i]);
      c.injections = {ContextInjection{a.levels[i], a.ps[i]}};
      custom.push_back(std::move(c));
    }
    if (a.combined) {
      ContextConfig c;
      for (const auto& x : custom) {
        c.name += (c.name.empty() ? "" : "+") + x.name;
        c.injections.push_back(x.injections.front());
      }
      custom = {c};
    }
    configs.insert(configs.end(), custom.begin(), custom.end());
  }
  for (auto& c : configs) {
    c.correct_prob = a.correct_prob;
    c.seed = a.seed;
  }

  const DiskDataset data(a.data);
  const auto available = data.manifest().sessions();
  std::vector<int> needed;
  for (int s = 1; s <= a.test_session; ++s)
    if (std::find(available.begin(), available.end(), s) != available.end()) needed.push_back(s);
  const auto trials = preprocess_dataset(data, pipeline, needed, jobs);
  EvalOptions opts;
  opts.pipeline = pipeline;
  opts.jobs = jobs;
  const SweepReport sweep = context_sweep(trials, a.test_session, configs, opts);

  const fs::path dir(a.out);
  write_file_atomic(dir / "context_table.csv", format_context_table(sweep));
  write_file_atomic(dir / "reports" / "baseline_decisions.csv", format_decision_log(sweep.baseline));
  for (const auto& row : sweep.rows) {
    write_file_atomic(dir / "reports" / (row.config.name + "_decisions.csv"), format_decision_log(row.report));
  }
  write_file_atomic(dir / "fit_log.json", fit_log_json(sweep.baseline).dump(1) + "\n");
  write_run_config(app, dir);
  out << "session " << a.test_session << " baseline accuracy " << fmt(sweep.baseline.accuracy) << "\n";
  for (const auto& row : sweep.rows) out << row.config.name << ": accuracy " << fmt(row.report.accuracy) << "\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Hierarchical EEG/EMG gesture decoder: synthetic data, training, evaluation"};
  app.name("hbmi");
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML or INI file with option values; command-line flags take precedence");

  int jobs = 1;
  PipelineConfig pipeline;

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic dataset");
  s->add_option("--seed", synth.config.seed, "Generator seed")->capture_default_str();
  s->add_option("--sessions", synth.config.n_sessions, "Number of sessions")->check(CLI::Range(1, 1000))->capture_default_str();
  s->add_option("--blocks", synth.config.n_blocks, "Blocks per session")->check(CLI::Range(1, 1000))->capture_default_str();
  s->add_option("--trials-per-block", synth.config.n_trials_per_block, "Trials per block")
      ->check(CLI::Range(1, 100000))
      ->capture_default_str();
  s->add_option("--separability-eeg", synth.config.separability_eeg, "EEG class separation")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--separability-emg", synth.config.separability_emg, "EMG class separation")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--noise-floor", synth.config.noise_floor, "Sensor noise level")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--drift", synth.config.session_drift, "Across-session channel rotation")->check(CLI::NonNegativeNumber)->capture_default_str();
  s->add_option("--rate", synth.config.rate, "Sampling rate (Hz)")->check(CLI::PositiveNumber)->capture_default_str();
  s->add_option("--out", synth.out, "Output dataset directory")->configurable(false);
  s->add_flag("--dry-run", synth.dry_run, "Print the dataset layout without writing")->configurable(false);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Fit a decoder and write a model bundle");
  t->add_option("--data", train.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  t->add_option("--out", train.out, "Model bundle directory")->required()->configurable(false);
  t->add_option("--mode", train.mode, "hbmi10, eeg4 or emg5")->check(CLI::IsMember({"hbmi10", "eeg4", "emg5"}))->capture_default_str();
  t->add_option("--emg-hand", train.emg_hand, "Hand for emg5")->check(CLI::IsMember({"Right", "Left"}))->capture_default_str();
  t->add_option("--train-sessions", train.sessions, "Sessions to train on (default: all)");
  add_pipeline_options(t, pipeline);

  EvalArgs eval;
  auto* e = app.add_subcommand("eval", "Within-session or online evaluation");
  e->add_option("--data", eval.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  e->add_option("--out", eval.out, "Report directory")->required()->configurable(false);
  e->add_option("--protocol", eval.protocol, "within or online")->check(CLI::IsMember({"within", "online"}))->capture_default_str();
  e->add_option("--mode", eval.mode, "hbmi10, eeg4, emg5 or all")->check(CLI::IsMember({"hbmi10", "eeg4", "emg5", "all"}))->capture_default_str();
  e->add_option("--emg-hand", eval.emg_hand, "Hand for emg5")->check(CLI::IsMember({"Right", "Left"}))->capture_default_str();
  e->add_option("--session", eval.sessions, "Sessions for the within protocol (default: all)");
  e->add_option("--test-session", eval.test_sessions, "Test sessions for the online protocol (default: 4 and 5)")
      ->check(CLI::Range(2, 1000));
  e->add_option("--folds", eval.folds, "Cross-validation folds")->check(CLI::Range(2, 100))->capture_default_str();
  e->add_option("--repetitions", eval.repetitions, "Cross-validation repetitions")->check(CLI::Range(1, 1000))->capture_default_str();
  e->add_option("--seed", eval.seed, "Fold shuffle seed")->capture_default_str();
  e->add_option("--permute-labels", eval.permute_seed, "Shuffle labels within sessions with this seed (0: off)")->capture_default_str();
  add_pipeline_options(e, pipeline);

  DecodeArgs dec;
  auto* d = app.add_subcommand("decode", "Decode every window of a dataset with a trained model");
  d->add_option("--model", dec.model, "Model bundle directory")->required()->check(CLI::ExistingDirectory);
  d->add_option("--data", dec.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  d->add_option("--out", dec.out, "Output directory")->required()->configurable(false);
  d->add_option("--session", dec.sessions, "Sessions to decode (default: all)");

  ContextArgs ctx;
  auto* c = app.add_subcommand("context", "Online decoding with simulated context priors");
  c->add_option("--data", ctx.data, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  c->add_option("--out", ctx.out, "Report directory")->required()->configurable(false);
  c->add_option("--test-session", ctx.test_session, "Test session")->check(CLI::Range(2, 1000))->capture_default_str();
  c->add_option("--level", ctx.levels, "Hierarchy level of an injection (repeatable)")->check(CLI::Range(0, 3));
  c->add_option("--p", ctx.ps, "Probability of the favored state (repeatable, paired with --level)")->check(CLI::Range(0.0, 1.0));
  c->add_flag("--standard", ctx.standard, "Add the four standard rows (0.75, 0.70, 0.65, 0.60 at levels 0-3)");
  c->add_flag("--combined", ctx.combined, "Apply all --level/--p pairs together as one row");
  c->add_option("--correct-prob", ctx.correct_prob, "Probability that the favored state is the true one")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  c->add_option("--seed", ctx.seed, "Seed for wrong-context draws")->capture_default_str();
  add_pipeline_options(c, pipeline);

  for (auto* sub : {t, e, d, c}) {
    sub->add_option("--jobs", jobs, "Worker threads")->check(CLI::Range(1, 1024))->configurable(false)->capture_default_str();
  }

  // --config is read by the top-level app, so hoist it in front of the subcommand.
  std::vector<std::string> args(argv + 1, argv + argc);
  for (std::size_t i = 0; i < args.size(); ++i) {
    const bool joined = args[i].rfind("--config=", 0) == 0;
    if (args[i] != "--config" && !joined) continue;
    const std::size_t n = (joined || i + 1 == args.size()) ? 1 : 2;
    std::vector<std::string> moved(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + n));
    args.erase(args.begin() + static_cast<std::ptrdiff_t>(i), args.begin() + static_cast<std::ptrdiff_t>(i + n));
    args.insert(args.begin(), moved.begin(), moved.end());
    break;
  }
  std::reverse(args.begin(), args.end());  // CLI11 consumes the vector from the back

  try {
    app.parse(args);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*s) return cmd_synth(synth, *s, out);
    if (*t) return cmd_train(train, pipeline, jobs, *t, out);
    if (*e) return cmd_eval(eval, pipeline, jobs, *e, out);
    if (*d) return cmd_decode(dec, jobs, *d, out);
    if (*c) return cmd_context(ctx, pipeline, jobs, *c, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.kind());
  } catch (const fs::filesystem_error& ex) {
    err << "error: [io] " << ex.what() << "\n";
    return kDataError;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace hbmi::cli
