#include "hbmi/evaluation.hpp"

#include "hbmi/errors.hpp"
#include "parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <random>

namespace hbmi {

namespace {

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "evaluation", msg); }

std::mt19937_64 fold_stream(std::uint64_t seed, int repetition) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x666f6c64u,
                    static_cast<std::uint32_t>(repetition)};
  return std::mt19937_64(seq);
}

struct TestOutcome {
  std::vector<WindowDecision> decisions;
  FitRecord record;
};

// Fits on `train`, decodes every window of `test`.
TestOutcome fit_and_test(const std::vector<const PreprocessedTrial*>& train, const std::vector<const PreprocessedTrial*>& test,
                         const ModeSpec& mode, const PipelineConfig& pipeline) {
  FitAudit audit;
  const HierarchyModel model = fit_hierarchy(train, mode, pipeline, &audit);
  TestOutcome out;
  out.record.sessions = audit.sessions;
  out.record.n_trials = audit.n_trials;
  out.record.n_windows = audit.window_hashes.size();
  for (const auto* t : test) {
    const int truth = mode.class_of(t->info.label);
    for (std::size_t w = 0; w < t->windows.size(); ++w) {
      if (audit.window_hashes.count(t->windows[w].hash)) ++out.record.test_windows_in_training;
      const auto features = window_features(model, t->windows[w], mode);
      const auto decision = decode(model, model.default_prior, features, mode);
      out.decisions.push_back(WindowDecision{t->info, static_cast<int>(w), truth, decision.predicted, 0, 0});
    }
  }
  return out;
}

void fill_report(AccuracyReport& report, const std::vector<WindowDecision>& decisions) {
  std::vector<std::pair<int, int>> pairs;
  pairs.reserve(decisions.size());
  for (const auto& d : decisions) pairs.emplace_back(d.predicted, d.truth);
  const AccuracyReport base = compute_report(pairs, report.mode.n_classes());
  report.accuracy = base.accuracy;
  report.confusion = base.confusion;
  report.recall = base.recall;
  report.n_windows = base.n_windows;
  report.class_names = report.mode.class_names();
  report.decisions = decisions;
}

std::vector<const PreprocessedTrial*> session_trials(std::span<const PreprocessedTrial> trials, int session,
                                                     const ModeSpec& mode) {
  std::vector<const PreprocessedTrial*> out;
  for (const auto& t : trials)
    if (t.info.session == session && mode.class_of(t.info.label) >= 0) out.push_back(&t);
  return out;
}

}  // namespace

void EvalOptions::validate() const {
  if (folds < 2) fail(ErrorKind::InvalidArgument, "folds must be at least 2");
  if (repetitions < 1) fail(ErrorKind::InvalidArgument, "repetitions must be at least 1");
  if (jobs < 1) fail(ErrorKind::InvalidArgument, "jobs must be at least 1");
}

bool AccuracyReport::leakage_free() const {
  return std::all_of(fit_log.begin(), fit_log.end(), [](const FitRecord& r) { return r.test_windows_in_training == 0; });
}

AccuracyReport compute_report(std::span<const std::pair<int, int>> decisions, int n_classes) {
  if (n_classes < 1) fail(ErrorKind::InvalidArgument, "report needs at least one class");
  if (decisions.empty()) fail(ErrorKind::InvalidArgument, "no decisions to report");
  AccuracyReport r;
  r.confusion = Eigen::MatrixXi::Zero(n_classes, n_classes);
  for (const auto& [pred, truth] : decisions) {
    if (pred < 0 || pred >= n_classes || truth < 0 || truth >= n_classes) {
      fail(ErrorKind::InvalidArgument, "class index out of range");
    }
    ++r.confusion(truth, pred);
  }
  r.n_windows = decisions.size();
  const auto total = r.confusion.sum();
  r.accuracy = total > 0 ? static_cast<double>(r.confusion.trace()) / static_cast<double>(total) : 0.0;
  r.recall.resize(static_cast<std::size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) {
    const auto row = r.confusion.row(c).sum();
    r.recall[static_cast<std::size_t>(c)] =
        row > 0 ? static_cast<double>(r.confusion(c, c)) / static_cast<double>(row) : std::numeric_limits<double>::quiet_NaN();
  }
  return r;
}

std::vector<int> stratified_folds(std::span<const int> classes, int folds, std::uint64_t seed, int repetition) {
  if (folds < 2) fail(ErrorKind::InvalidArgument, "folds must be at least 2");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < classes.size(); ++i) by_class[classes[i]].push_back(i);
  auto rng = fold_stream(seed, repetition);
  std::vector<int> fold(classes.size(), 0);
  // Continue the round-robin across classes so fold sizes stay within one trial.
  std::size_t next = 0;
  for (auto& [c, members] : by_class) {
    std::shuffle(members.begin(), members.end(), rng);
    for (const std::size_t i : members) fold[i] = static_cast<int>(next++ % static_cast<std::size_t>(folds));
  }
  return fold;
}

AccuracyReport within_session_cv(std::span<const PreprocessedTrial> trials, int session, const ModeSpec& mode,
                                 const EvalOptions& options) {
  options.validate();
  const auto pool = session_trials(trials, session, mode);
  if (pool.empty()) fail(ErrorKind::InsufficientData, "session " + std::to_string(session) + " has no trials for this mode");

  std::vector<int> classes;
  for (const auto* t : pool) classes.push_back(mode.class_of(t->info.label));

  const int k = options.folds;
  const int reps = options.repetitions;
  std::vector<std::vector<int>> assignments;
  for (int r = 0; r < reps; ++r) {
    assignments.push_back(stratified_folds(classes, k, options.seed, r));
    for (int f = 0; f < k; ++f) {
      std::vector<bool> present(static_cast<std::size_t>(mode.n_classes()), false);
      for (std::size_t i = 0; i < pool.size(); ++i)
        if (assignments.back()[i] != f) present[static_cast<std::size_t>(classes[i])] = true;
      for (int c = 0; c < mode.n_classes(); ++c) {
        if (!present[static_cast<std::size_t>(c)]) {
          fail(ErrorKind::Stratification, "class " + mode.class_names()[static_cast<std::size_t>(c)] +
                                              " is absent from the training set of repetition " + std::to_string(r + 1) +
                                              ", fold " + std::to_string(f + 1));
        }
      }
    }
  }

  std::vector<TestOutcome> outcomes(static_cast<std::size_t>(reps * k));
  detail::parallel_for(outcomes.size(), options.jobs, [&](std::size_t job) {
    const int r = static_cast<int>(job) / k;
    const int f = static_cast<int>(job) % k;
    const auto& assign = assignments[static_cast<std::size_t>(r)];
    std::vector<const PreprocessedTrial*> train, test;
    for (std::size_t i = 0; i < pool.size(); ++i) (assign[i] == f ? test : train).push_back(pool[i]);
    auto out = fit_and_test(train, test, mode, options.pipeline);
    out.record.repetition = r;
    out.record.fold = f;
    for (auto& d : out.decisions) {
      d.repetition = r;
      d.fold = f;
    }
    outcomes[job] = std::move(out);
  });

  AccuracyReport report;
  report.protocol = "within";
  report.mode = mode;
  report.session = session;
  std::vector<WindowDecision> all;
  for (int r = 0; r < reps; ++r) {
    std::size_t correct = 0, total = 0;
    for (int f = 0; f < k; ++f) {
      auto& out = outcomes[static_cast<std::size_t>(r * k + f)];
      for (const auto& d : out.decisions) {
        correct += d.predicted == d.truth;
        ++total;
      }
      all.insert(all.end(), out.decisions.begin(), out.decisions.end());
      report.fit_log.push_back(out.record);
    }
    report.repetition_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(total));
  }
  fill_report(report, all);
  return report;
}

AccuracyReport online_eval(std::span<const PreprocessedTrial> trials, int test_session, const ModeSpec& mode,
                           const EvalOptions& options) {
  options.validate();
  if (test_session < 2) fail(ErrorKind::InvalidArgument, "online evaluation needs a test session after session 1");
  std::set<int> available;
  for (const auto& t : trials) available.insert(t.info.session);
  std::vector<const PreprocessedTrial*> train;
  for (int s = 1; s < test_session; ++s) {
    if (!available.count(s)) {
      fail(ErrorKind::InsufficientData, "online evaluation of session " + std::to_string(test_session) +
                                            " needs session " + std::to_string(s) + " for training");
    }
    const auto part = session_trials(trials, s, mode);
    train.insert(train.end(), part.begin(), part.end());
  }
  const auto test = session_trials(trials, test_session, mode);
  if (test.empty()) fail(ErrorKind::InsufficientData, "test session " + std::to_string(test_session) + " has no trials");

  auto out = fit_and_test(train, test, mode, options.pipeline);
  AccuracyReport report;
  report.protocol = "online";
  report.mode = mode;
  report.session = test_session;
  report.fit_log.push_back(out.record);
  fill_report(report, out.decisions);
  report.repetition_accuracy = {report.accuracy};
  return report;
}

std::vector<ContextConfig> standard_context_configs() {
  const std::array<double, kNumLevels> ps{0.75, 0.70, 0.65, 0.60};
  std::vector<ContextConfig> out;
  for (int level = 0; level < kNumLevels; ++level) {
    ContextConfig c;
    c.name = "level" + std::to_string(level) + "_p" + std::to_string(ps[static_cast<std::size_t>(level)]).substr(0, 4);
    c.injections = {ContextInjection{level, ps[static_cast<std::size_t>(level)]}};
    out.push_back(std::move(c));
  }
  return out;
}

ContextPrior context_prior_for(const ContextConfig& config, const GestureLabel& truth, std::uint64_t stream) {
  ContextPrior prior = ContextPrior::uniform();
  const auto path = label_to_path(truth);
  std::mt19937_64 rng;
  if (config.correct_prob < 1.0) {
    std::seed_seq seq{static_cast<std::uint32_t>(config.seed), static_cast<std::uint32_t>(config.seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    rng.seed(seq);
  }
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (const auto& inj : config.injections) {
    if (inj.level < 0 || inj.level >= kNumLevels) fail(ErrorKind::InvalidArgument, "context level must be 0..3");
    if (!(inj.p >= 0.0 && inj.p <= 1.0)) fail(ErrorKind::InvalidArgument, "context probability must lie in [0, 1]");
    const auto state = state_at(path, inj.level);
    if (!state) continue;  // rest paths have no state at levels 2 and 3
    State favored = *state;
    if (config.correct_prob < 1.0 && unit(rng) >= config.correct_prob) {
      for (const auto& row : prior.rows(inj.level)) {
        if (std::find(row.children.begin(), row.children.end(), *state) == row.children.end()) continue;
        std::vector<State> wrong;
        for (const State s : row.children)
          if (s != *state) wrong.push_back(s);
        if (!wrong.empty()) favored = wrong[std::uniform_int_distribution<std::size_t>(0, wrong.size() - 1)(rng)];
        break;
      }
    }
    prior = prior.with_context(inj.level, inj.p, favored);
  }
  return prior;
}

SweepReport context_sweep(std::span<const PreprocessedTrial> trials, int test_session,
                          std::span<const ContextConfig> configs, const EvalOptions& options) {
  options.validate();
  const ModeSpec mode{DecodeMode::Hybrid10, Hand::Right};
  if (test_session < 2) fail(ErrorKind::InvalidArgument, "context sweep needs a test session after session 1");
  std::vector<const PreprocessedTrial*> train;
  std::set<int> available;
  for (const auto& t : trials) available.insert(t.info.session);
  for (int s = 1; s < test_session; ++s) {
    if (!available.count(s)) fail(ErrorKind::InsufficientData, "context sweep needs session " + std::to_string(s));
    const auto part = session_trials(trials, s, mode);
    train.insert(train.end(), part.begin(), part.end());
  }
  const auto test = session_trials(trials, test_session, mode);
  if (test.empty()) fail(ErrorKind::InsufficientData, "test session " + std::to_string(test_session) + " has no trials");

  FitAudit audit;
  const HierarchyModel model = fit_hierarchy(train, mode, options.pipeline, &audit);
  FitRecord record;
  record.sessions = audit.sessions;
  record.n_trials = audit.n_trials;
  record.n_windows = audit.window_hashes.size();

  struct Probe {
    const PreprocessedTrial* trial;
    int window;
    LogLikelihoods lk;
  };
  std::vector<Probe> probes;
  for (const auto* t : test) {
    for (std::size_t w = 0; w < t->windows.size(); ++w) {
      if (audit.window_hashes.count(t->windows[w].hash)) ++record.test_windows_in_training;
      probes.push_back(Probe{t, static_cast<int>(w), {}});
    }
  }
  detail::parallel_for(probes.size(), options.jobs, [&](std::size_t i) {
    const auto features = window_features(model, probes[i].trial->windows[static_cast<std::size_t>(probes[i].window)], mode);
    probes[i].lk = evaluate_likelihoods(model, features, mode.terms());
  });

  auto run = [&](const ContextConfig* config) {
    std::vector<WindowDecision> out;
    out.reserve(probes.size());
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const auto& p = probes[i];
      const ContextPrior prior = config ? context_prior_for(*config, p.trial->info.label, i) : model.default_prior;
      const auto d = decode(p.lk, prior, mode);
      out.push_back(WindowDecision{p.trial->info, p.window, mode.class_of(p.trial->info.label), d.predicted, 0, 0});
    }
    return out;
  };

  SweepReport sweep;
  sweep.baseline.protocol = "online";
  sweep.baseline.mode = mode;
  sweep.baseline.session = test_session;
  sweep.baseline.fit_log = {record};
  fill_report(sweep.baseline, run(nullptr));
  sweep.baseline.repetition_accuracy = {sweep.baseline.accuracy};

  for (const auto& config : configs) {
    ContextRow row;
    row.config = config;
    row.report.protocol = "context";
    row.report.mode = mode;
    row.report.session = test_session;
    row.report.fit_log = {record};
    const auto decisions = run(&config);
    for (std::size_t i = 0; i < decisions.size(); ++i) {
      const auto& base = sweep.baseline.decisions[i];
      const bool was = base.predicted == base.truth;
      const bool now = decisions[i].predicted == decisions[i].truth;
      row.changed += base.predicted != decisions[i].predicted;
      row.newly_correct += !was && now;
      row.newly_incorrect += was && !now;
    }
    fill_report(row.report, decisions);
    row.report.repetition_accuracy = {row.report.accuracy};
    sweep.rows.push_back(std::move(row));
  }
  return sweep;
}

std::vector<PreprocessedTrial> permute_labels(std::span<const PreprocessedTrial> trials, std::uint64_t seed) {
  std::vector<PreprocessedTrial> out(trials.begin(), trials.end());
  std::map<int, std::vector<std::size_t>> by_session;
  for (std::size_t i = 0; i < out.size(); ++i) by_session[out[i].info.session].push_back(i);
  for (const auto& [session, idx] : by_session) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32), 0x7065726du,
                      static_cast<std::uint32_t>(session)};
    std::mt19937_64 rng(seq);
    std::vector<GestureLabel> labels;
    for (const auto i : idx) labels.push_back(out[i].info.label);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t k = 0; k < idx.size(); ++k) out[idx[k]].info.label = labels[k];
  }
  return out;
}

std::pair<double, double> binomial_interval(double p0, std::size_t n) {
  if (n == 0 || !(p0 >= 0.0 && p0 <= 1.0)) fail(ErrorKind::InvalidArgument, "binomial interval needs n > 0 and p in [0, 1]");
  // Exact quantiles from the cumulative mass function.
  const double nn = static_cast<double>(n);
  auto log_pmf = [&](std::size_t k) {
    const double kk = static_cast<double>(k);
    const double lp = p0 > 0.0 ? kk * std::log(p0) : (k == 0 ? 0.0 : -INFINITY);
    const double lq = p0 < 1.0 ? (nn - kk) * std::log1p(-p0) : (k == n ? 0.0 : -INFINITY);
    return std::lgamma(nn + 1.0) - std::lgamma(kk + 1.0) - std::lgamma(nn - kk + 1.0) + lp + lq;
  };
  double cdf = 0.0;
  std::size_t lo = 0, hi = n;
  bool have_lo = false;
  for (std::size_t k = 0; k <= n; ++k) {
    cdf += std::exp(log_pmf(k));
    if (!have_lo && cdf >= 0.025) {
      lo = k;
      have_lo = true;
    }
    if (cdf >= 0.975) {
      hi = k;
      break;
    }
  }
  return {static_cast<double>(lo) / nn, static_cast<double>(hi) / nn};
}

}  // namespace hbmi
