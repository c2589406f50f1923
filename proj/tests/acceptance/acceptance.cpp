// Acceptance checks 1-9. Prints one PASS/FAIL line per criterion and exits
// non-zero if any fails. Usage: acceptance [--workdir DIR] [--only N]...
#include "hbmi/datasets.hpp"
#include "hbmi/decoder.hpp"
#include "hbmi/errors.hpp"
#include "hbmi/evaluation.hpp"
#include "hbmi/likelihoods.hpp"
#include "hbmi/spatial_filters.hpp"
#include "hbmi/synergies.hpp"
#include "random_model.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <sstream>
#include <unordered_set>

using namespace hbmi;
namespace fs = std::filesystem;
using hbmi::testkit::random_features;
using hbmi::testkit::random_hierarchy;
using hbmi::testkit::random_matrix;
using hbmi::testkit::random_prior;
using hbmi::testkit::random_spd;
using hbmi::testkit::random_uniform;

namespace {

constexpr int kJobs = 8;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "[violated] " << what << "; ";
    }
  }
};

std::string f4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2e", v);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

EvalOptions eval_options() {
  EvalOptions o;
  o.jobs = kJobs;
  return o;
}

// ---------------------------------------------------------------- 1
void factorization_oracle(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  int agree = 0;
  const int n = 1000;
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const HierarchyModel m = random_hierarchy(rng, 1 + i % 5);
    ContextPrior prior = i % 4 == 0 ? uniform_prior() : random_prior(rng);
    if (i % 10 == 1) prior = prior.with_context(i % 4, 1.0, i % 4 == 0 ? State::Left : i % 4 == 1 ? State::Grasp
                                                                                  : i % 4 == 2 ? State::Power
                                                                                               : State::PalmarPinch);
    const WindowFeatures f = random_features(rng);
    const DecodeResult fast = map_decode(m, prior, f);
    const ExhaustiveResult slow = exhaustive_decode(m, prior, f);
    agree += fast.label == slow.label;
    const double mx = *std::max_element(fast.scores.begin(), fast.scores.end());
    double z = 0.0;
    for (const double s : fast.scores) z += std::exp(s - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t k = 0; k < fast.scores.size(); ++k) {
      const bool zero_fast = fast.scores[k] <= -1e299;
      const bool zero_slow = std::isinf(slow.log_posterior[k]);
      if (zero_fast != zero_slow) worst = std::numeric_limits<double>::infinity();
      else if (!zero_fast) worst = std::max(worst, std::abs(fast.scores[k] - log_z - slow.log_posterior[k]));
    }
  }
  const double secs = seconds_since(t0);
  out.detail << agree << "/" << n << " argmax agreements, max normalized score diff " << sci(worst) << ", " << f4(secs)
             << " s";
  out.require(agree == n, "exact argmax agreement");
  out.require(worst < 1e-9, "normalized score difference < 1e-9");
  out.require(secs < 10.0, "runtime < 10 s");
}

// ---------------------------------------------------------------- 2
void csp_correctness(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2002);
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    ClassCovariance a, b;
    a.sigma = random_spd(rng, 19);
    b.sigma = random_spd(rng, 19);
    const CspSolution sol = solve_csp(a, b, 6);
    for (Eigen::Index j = 0; j < sol.filters.cols(); ++j) {
      const Eigen::VectorXd w = sol.filters.col(j);
      worst = std::max(worst, (a.sigma * w - sol.eigenvalues[j] * (a.sigma + b.sigma) * w).norm());
    }
  }
  ClassCovariance d1, d2;
  d1.sigma = Eigen::Vector2d(2.0, 1.0).asDiagonal();
  d2.sigma = Eigen::Vector2d(1.0, 2.0).asDiagonal();
  const CspSolution diag = solve_csp(d1, d2, 2);
  const double lam_err = std::max(std::abs(diag.eigenvalues[0] - 2.0 / 3.0), std::abs(diag.eigenvalues[1] - 1.0 / 3.0));
  const double axis_err = std::max(std::abs(diag.filters(1, 0)), std::abs(diag.filters(0, 1)));
  const double secs = seconds_since(t0);
  out.detail << "max residual " << sci(worst) << " over 100 pairs, diagonal case lambda=(" << diag.eigenvalues[0] << ", "
             << diag.eigenvalues[1] << ") off-axis " << sci(axis_err) << ", " << f4(secs) << " s";
  out.require(worst < 1e-8, "residual < 1e-8");
  out.require(lam_err <= 2.0 * std::numeric_limits<double>::epsilon(), "diagonal eigenvalues 2/3, 1/3");
  out.require(axis_err == 0.0, "diagonal filters on the coordinate axes");
  out.require(secs < 5.0, "runtime < 5 s");
}

// ---------------------------------------------------------------- 3
double kkt(const Eigen::MatrixXd& a, const Eigen::VectorXd& x, const Eigen::VectorXd& b) {
  const Eigen::VectorXd g = a.transpose() * (a * x - b);
  double worst = 0.0;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (x[j] < 0.0) return std::numeric_limits<double>::infinity();
    worst = std::max(worst, x[j] > 0.0 ? std::abs(g[j]) : std::max(0.0, -g[j]));
  }
  return worst;
}

void nmf_correctness(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(3003);
  int monotone = 0;
  double worst_rise = 0.0, worst_rel = 0.0, worst_kkt = 0.0;
  for (int i = 0; i < 50; ++i) {
    // Noiseless data from known non-negative factors, 6 x 5 times 5 x 200.
    const Eigen::MatrixXd w0 = random_uniform(rng, 6, 5, 0.0, 1.0);
    const Eigen::MatrixXd h0 = random_uniform(rng, 5, 200, 0.0, 1.0);
    const Eigen::MatrixXd v = w0 * h0;
    NmfOptions o;
    o.seed = static_cast<std::uint64_t>(i) + 1;
    o.max_iter = 20000;
    o.tol = 1e-12;
    const NmfFit fit = nmf_fit(v, o);
    const auto& hist = fit.model.fit_stats.objective_history;
    double rise = hist.front() - fit.model.fit_stats.initial_objective;
    for (std::size_t k = 1; k < hist.size(); ++k) rise = std::max(rise, hist[k] - hist[k - 1]);
    worst_rise = std::max(worst_rise, rise);
    monotone += rise <= 1e-10;
    worst_rel = std::max(worst_rel, (v - fit.model.base * fit.activations).squaredNorm() / v.squaredNorm());
    for (int k = 0; k < 20; ++k) {
      const Eigen::VectorXd r = random_uniform(rng, 6, 1, 0.0, 2.0);
      worst_kkt = std::max(worst_kkt, kkt(fit.model.base, nmf_transform(fit.model, r), r));
    }
  }
  const double secs = seconds_since(t0);
  out.detail << monotone << "/50 fits monotone (max rise " << sci(worst_rise) << "), max relative objective "
             << sci(worst_rel) << ", max transform KKT residual " << sci(worst_kkt) << ", " << f4(secs) << " s";
  out.require(monotone == 50, "objective non-increasing within 1e-10");
  out.require(worst_rel < 1e-4, "relative objective < 1e-4");
  out.require(worst_kkt < 1e-6, "KKT residual < 1e-6");
  out.require(secs < 30.0, "runtime < 30 s");
}

// ---------------------------------------------------------------- 4
void kde_normalization(Outcome& out) {
  std::mt19937_64 rng(4004);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double lo_int = 1e9, hi_int = -1e9;
  for (int model = 0; model < 3; ++model) {
    const Eigen::MatrixXd p = random_matrix(rng, 10 + 20 * model, 2) * (1.0 + model);
    const KdeModel kde = kde_fit(p);
    const Eigen::VectorXd lo = p.colwise().minCoeff().transpose() - 7.0 * kde.bandwidths();
    const Eigen::VectorXd hi = p.colwise().maxCoeff().transpose() + 7.0 * kde.bandwidths();
    const double volume = (hi - lo).prod();
    const int n = 1000000;
    double sum = 0.0;
    Eigen::Vector2d x;
    for (int i = 0; i < n; ++i) {
      x[0] = lo[0] + (hi[0] - lo[0]) * u(rng);
      x[1] = lo[1] + (hi[1] - lo[1]) * u(rng);
      sum += std::exp(kde.logpdf(x));
    }
    const double integral = sum / n * volume;
    lo_int = std::min(lo_int, integral);
    hi_int = std::max(hi_int, integral);
  }
  double peak_err = 0.0;
  for (const int d : {1, 2, 5, 12}) {
    const Eigen::MatrixXd pt = random_matrix(rng, 1, d);
    const Eigen::VectorXd h = random_uniform(rng, d, 1, 0.05, 3.0);
    const KdeModel kde(pt, h);
    double closed = 0.0;
    for (int j = 0; j < d; ++j) closed -= std::log(h[j] * std::sqrt(2.0 * std::numbers::pi));
    peak_err = std::max(peak_err, std::abs(kde.logpdf(pt.row(0).transpose()) - closed));
  }
  out.detail << "Monte Carlo integrals in [" << f4(lo_int) << ", " << f4(hi_int) << "] at 1e6 samples (3 models), n=1 peak error "
             << sci(peak_err);
  out.require(lo_int >= 0.98 && hi_int <= 1.02, "integral in [0.98, 1.02]");
  out.require(peak_err <= 1e-12, "kernel peak within 1e-12");
}

// ---------------------------------------------------------------- shared data
std::vector<PreprocessedTrial> preprocess(const SynthConfig& c, std::vector<int> sessions = {}) {
  return preprocess_dataset(SyntheticDataset(c), PipelineConfig{}, sessions, kJobs);
}

const std::vector<PreprocessedTrial>& gate_session() {
  static const auto trials = preprocess(SynthConfig{}, {1});
  return trials;
}

// Smaller sessions (8 blocks x 25 trials) for the multi-session protocols.
SynthConfig protocol_config(double drift, int sessions) {
  SynthConfig c;
  c.n_trials_per_block = 25;
  c.n_sessions = sessions;
  c.session_drift = drift;
  return c;
}

const std::vector<PreprocessedTrial>& no_drift_sessions() {
  static const auto trials = preprocess(protocol_config(0.0, 5));
  return trials;
}

const ModeSpec kHybrid{DecodeMode::Hybrid10, Hand::Right};
const ModeSpec kEeg{DecodeMode::Eeg4, Hand::Right};
const ModeSpec kEmg{DecodeMode::Emg5, Hand::Right};

// ---------------------------------------------------------------- 5
void separable_gate(Outcome& out) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& trials = gate_session();
  const double h = within_session_cv(trials, 1, kHybrid, eval_options()).accuracy;
  const double e = within_session_cv(trials, 1, kEeg, eval_options()).accuracy;
  const double m = within_session_cv(trials, 1, kEmg, eval_options()).accuracy;
  const double secs = seconds_since(t0);
  out.detail << "session 1, " << trials.size() << " trials: hbmi10 " << f4(h) << ", eeg4 " << f4(e) << ", emg5 " << f4(m)
             << ", " << f4(secs) << " s";
  out.require(h >= 0.90, "hbmi10 >= 0.90");
  out.require(e >= 0.80, "eeg4 >= 0.80");
  out.require(m >= 0.90, "emg5 >= 0.90");
  out.require(secs < 300.0, "runtime < 5 min");
}

// ---------------------------------------------------------------- 6
void chance_calibration(Outcome& out) {
  const auto permuted = permute_labels(gate_session(), 1);
  const std::array<std::pair<ModeSpec, double>, 3> modes{{{kEeg, 0.25}, {kEmg, 0.20}, {kHybrid, 0.10}}};
  for (const auto& [mode, p0] : modes) {
    std::size_t n = 0;
    for (const auto& t : permuted) n += mode.class_of(t.info.label) >= 0;
    const double acc = within_session_cv(permuted, 1, mode, eval_options()).accuracy;
    const auto [lo, hi] = binomial_interval(p0, n);
    out.detail << to_string(mode.mode) << " " << f4(acc) << " in [" << f4(lo) << ", " << f4(hi) << "] (n=" << n << "); ";
    out.require(acc >= lo && acc <= hi, std::string(to_string(mode.mode)) + " inside the chance interval");
  }
}

// ---------------------------------------------------------------- 7
void context_properties(Outcome& out) {
  const int test_session = 5;
  std::vector<ContextConfig> configs;
  configs.push_back({"certain", {{0, 1.0}, {1, 1.0}, {2, 1.0}, {3, 1.0}}});
  for (int level = 0; level < 4; ++level) configs.push_back({"uniform_l" + std::to_string(level), {{level, 0.5}}});
  for (const double p : {0.55, 0.9})
    for (int level = 0; level < 4; ++level)
      configs.push_back({"favor_l" + std::to_string(level) + "_" + f4(p), {{level, p}}});
  const auto standard = standard_context_configs();
  configs.insert(configs.end(), standard.begin(), standard.end());
  const SweepReport s = context_sweep(no_drift_sessions(), test_session, configs, eval_options());

  const auto& certain = s.rows[0];
  out.require(certain.report.accuracy == 1.0, "(a) p = 1 at all levels gives 100%");
  bool identical = true;
  for (int level = 0; level < 4; ++level) {
    const auto& row = s.rows[static_cast<std::size_t>(1 + level)];
    for (std::size_t i = 0; i < row.report.decisions.size(); ++i)
      identical &= row.report.decisions[i].predicted == s.baseline.decisions[i].predicted;
  }
  out.require(identical, "(b) uniform share reproduces baseline decisions");
  std::size_t regressions = 0;
  for (const auto& row : s.rows) regressions += row.newly_incorrect;
  out.require(regressions == 0, "(c) no correct window turns incorrect");
  out.detail << "baseline " << f4(s.baseline.accuracy) << " (session " << test_session << ", " << s.baseline.n_windows
             << " windows); (a) " << f4(certain.report.accuracy) << "; (b) " << (identical ? "identical" : "differs")
             << "; (c) " << regressions << " regressions; (d)";
  for (std::size_t i = s.rows.size() - standard.size(); i < s.rows.size(); ++i) {
    const auto& row = s.rows[i];
    out.detail << " L" << row.config.injections[0].level << "@" << row.config.injections[0].p << "=" << f4(row.report.accuracy);
    out.require(row.report.accuracy >= s.baseline.accuracy, "(d) " + row.config.name + " >= baseline");
  }
  const std::string table = format_context_table(s);
  out.require(std::count(table.begin(), table.end(), '\n') == static_cast<long>(configs.size()) + 1,
              "(d) one report row per configuration");
}

// ---------------------------------------------------------------- 8
void online_audit(Outcome& out) {
  const int test = 4;
  const auto& clean = no_drift_sessions();
  std::unordered_set<std::uint64_t> train_hashes, test_hashes;
  std::size_t train_trials = 0;
  for (const auto& t : clean) {
    if (t.info.session < test) ++train_trials;
    for (const auto& w : t.windows) (t.info.session < test ? train_hashes : test_hashes).insert(w.hash);
  }
  std::size_t overlap = 0;
  for (const auto h : test_hashes) overlap += train_hashes.count(h);
  out.require(overlap == 0, "test-session window hashes disjoint from training sessions");

  const AccuracyReport online = online_eval(clean, test, kHybrid, eval_options());
  const AccuracyReport within = within_session_cv(clean, test, kHybrid, eval_options());
  bool log_ok = online.fit_log.size() == 1 && online.leakage_free();
  if (log_ok) {
    const auto& f = online.fit_log[0];
    log_ok = f.sessions == std::set<int>{1, 2, 3} && f.n_trials == train_trials && f.test_windows_in_training == 0;
  }
  out.require(log_ok, "fitting log shows sessions {1,2,3} only");
  out.require(within.leakage_free(), "within-session folds leakage free");
  const double gap0 = std::abs(online.accuracy - within.accuracy);
  out.require(gap0 <= 0.05, "drift 0: online within 5 points of within-session");

  const auto drifted = preprocess(protocol_config(0.5, 4));
  const AccuracyReport online_d = online_eval(drifted, test, kHybrid, eval_options());
  const AccuracyReport within_d = within_session_cv(drifted, test, kHybrid, eval_options());
  out.require(online_d.accuracy < within_d.accuracy, "drift 0.5: online strictly below within-session");
  out.detail << "session " << test << " hbmi10; drift 0: online " << f4(online.accuracy) << " vs within " << f4(within.accuracy)
             << "; drift 0.5: online " << f4(online_d.accuracy) << " vs within " << f4(within_d.accuracy)
             << "; trained on " << online.fit_log[0].n_trials << " trials, " << overlap << " shared window hashes";
}

// ---------------------------------------------------------------- 9
std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[fs::relative(e.path(), root).string()] = ss.str();
  }
  return out;
}

void determinism(Outcome& out, const fs::path& work) {
  SynthConfig c;
  c.seed = 11;
  c.n_sessions = 2;
  c.n_blocks = 2;
  c.n_trials_per_block = 10;
  c.session_drift = 0.3;
  std::array<std::map<std::string, std::string>, 2> data, models;
  std::array<std::string, 2> reports;
  for (int run = 0; run < 2; ++run) {
    const fs::path root = work / ("determinism_" + std::to_string(run));
    fs::remove_all(root);
    generate_synthetic(c, root / "data");
    data[static_cast<std::size_t>(run)] = tree(root / "data");
    const DiskDataset disk(root / "data");
    const auto trials = preprocess_dataset(disk, PipelineConfig{}, {}, run == 0 ? 1 : kJobs);
    std::vector<const PreprocessedTrial*> ptrs;
    for (const auto& t : trials) ptrs.push_back(&t);
    ModelBundle bundle{fit_hierarchy(ptrs, kHybrid, PipelineConfig{}), PipelineConfig{}, kHybrid, {}};
    save_model_bundle(bundle, root / "model");
    models[static_cast<std::size_t>(run)] = tree(root / "model");
    EvalOptions o = eval_options();
    o.jobs = run == 0 ? 1 : kJobs;
    const AccuracyReport w = within_session_cv(trials, 1, kHybrid, o);
    const AccuracyReport on = online_eval(trials, 2, kEeg, o);
    const std::vector<AccuracyReport> both{w, on};
    reports[static_cast<std::size_t>(run)] = format_accuracy_table(both) + format_repetitions_csv(w) +
                                             format_confusion_csv(w) + format_decision_log(w) + format_decision_log(on);
    fs::remove_all(root);
  }
  out.require(data[0] == data[1], "datasets bit-identical");
  out.require(models[0] == models[1], "model bundles bit-identical");
  out.require(reports[0] == reports[1], "reports bit-identical");
  std::size_t bytes = 0;
  for (const auto& [k, v] : data[0]) bytes += v.size();
  out.detail << data[0].size() << " dataset files (" << bytes / 1024 << " KiB), " << models[0].size() << " model files, "
             << reports[0].size() << " report bytes compared across two runs (serial vs " << kJobs << " jobs)";
}

}  // namespace

int main(int argc, char** argv) {
  fs::path work = fs::temp_directory_path() / "hbmi_acceptance";
  std::set<int> only;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--workdir" && i + 1 < argc) work = argv[++i];
    else if (a == "--only" && i + 1 < argc) only.insert(std::stoi(argv[++i]));
    else {
      std::fprintf(stderr, "usage: acceptance [--workdir DIR] [--only N]...\n");
      return 2;
    }
  }
  fs::create_directories(work);

  const std::vector<std::pair<std::string, std::function<void(Outcome&)>>> criteria{
      {"factorization oracle", factorization_oracle},
      {"CSP correctness", csp_correctness},
      {"NMF correctness", nmf_correctness},
      {"KDE normalization", kde_normalization},
      {"end-to-end separable gate", separable_gate},
      {"chance calibration", chance_calibration},
      {"context properties", context_properties},
      {"online-protocol audit", online_audit},
      {"determinism", [&](Outcome& o) { determinism(o, work); }},
  };

  int failed = 0, run = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    ++run;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      criteria[i].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "[exception] " << e.what();
    }
    failed += !o.pass;
    std::printf("%s %d %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.str().c_str(),
                seconds_since(t0));
    std::fflush(stdout);
  }
  std::error_code ec;
  fs::remove_all(work, ec);
  std::printf("%d/%d criteria passed\n", run - failed, run);
  return failed == 0 ? 0 : 1;
}
