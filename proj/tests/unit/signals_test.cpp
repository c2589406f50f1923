#include "hbmi/errors.hpp"
#include "hbmi/signals.hpp"
#include "hbmi/trial.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace hbmi;

namespace {

constexpr double kPi = std::numbers::pi;

Recording sine(int channels, Eigen::Index n, double rate, double freq, double amp = 1.0, double phase = 0.0) {
  Recording r;
  r.rate = rate;
  r.samples.resize(channels, n);
  for (Eigen::Index t = 0; t < n; ++t) {
    const double v = amp * std::sin(2.0 * kPi * freq * static_cast<double>(t) / rate + phase);
    r.samples.col(t).setConstant(v);
  }
  return r;
}

// Analytic squared magnitude of a digital Butterworth designed through the
// prewarped bilinear transform.
double butter_mag2(const FilterSpec& spec, double f, double rate) {
  auto w = [&](double hz) { return std::tan(kPi * hz / rate); };
  double omega = 0.0;
  if (spec.kind == FilterSpec::Kind::Lowpass) {
    omega = w(f) / w(spec.low);
  } else {
    const double lo = w(spec.low), hi = w(spec.high), x = w(f);
    omega = (x * x - lo * hi) / (x * (hi - lo));
  }
  return 1.0 / (1.0 + std::pow(omega * omega, spec.order));
}

double max_abs_mid(const Eigen::RowVectorXd& x, Eigen::Index trim) {
  return x.segment(trim, x.size() - 2 * trim).cwiseAbs().maxCoeff();
}

Eigen::RowVectorXd test_signal(Eigen::Index n) {
  Eigen::RowVectorXd x(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = static_cast<double>(i);
    x[i] = std::sin(0.1 * t) + 0.5 * std::cos(0.37 * t) + 0.01 * t;
  }
  return x;
}

}  // namespace

TEST(Downsample, ShapeAtTargetRate) {
  std::mt19937_64 rng(1);
  Recording r;
  r.rate = 1200.0;
  r.samples = testkit::random_matrix(rng, 19, 4800);
  const Recording d = downsample(r, 300.0);
  EXPECT_EQ(d.channels(), 19);
  EXPECT_EQ(d.length(), 1200);
  EXPECT_DOUBLE_EQ(d.rate, 300.0);
}

TEST(Downsample, FactorOneIsIdentity) {
  std::mt19937_64 rng(2);
  Recording r;
  r.rate = 300.0;
  r.samples = testkit::random_matrix(rng, 3, 100);
  const Recording d = downsample(r, 300.0);
  EXPECT_EQ(d.samples, r.samples);
  EXPECT_DOUBLE_EQ(d.rate, 300.0);
}

TEST(Downsample, FloorOfLengthOverFactor) {
  Recording r = sine(1, 1203, 1200.0, 5.0);
  EXPECT_EQ(downsample(r, 300.0).length(), 300);
}

TEST(Downsample, SineMatchesAnalyticAtDecimatedInstants) {
  const Recording r = sine(2, 6000, 1200.0, 10.0);
  const Recording d = downsample(r, 300.0);
  const Eigen::Index trim = 150;
  double worst = 0.0;
  for (Eigen::Index k = trim; k < d.length() - trim; ++k) {
    const double expected = std::sin(2.0 * kPi * 10.0 * static_cast<double>(k) / 300.0);
    worst = std::max(worst, std::abs(d.samples(0, k) - expected));
  }
  EXPECT_LT(worst, 1e-3);
}

TEST(Downsample, NonIntegerRatioRejected) {
  const Recording r = sine(1, 1000, 1000.0, 5.0);
  try {
    downsample(r, 300.0);
    FAIL() << "expected rate mismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::RateMismatch);
  }
}

TEST(BaselineCorrect, ConstantChannelBecomesZero) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Constant(2, 1500, 4.25);
  const Recording out = baseline_correct(r);
  EXPECT_EQ(out.length(), 1200);
  EXPECT_EQ(out.samples.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BaselineCorrect, StepAfterZeroBaseline) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Zero(1, 1500);
  r.samples.rightCols(1200).setConstant(5.0);
  const Recording out = baseline_correct(r);
  EXPECT_TRUE((out.samples.array() == 5.0).all());
}

TEST(BaselineCorrect, MeanIdentityOnRandomTrial) {
  std::mt19937_64 rng(3);
  Recording r;
  r.rate = 300.0;
  r.samples = testkit::random_matrix(rng, 4, 1500);
  const Recording out = baseline_correct(r);
  for (int c = 0; c < 4; ++c) {
    const double expected = r.samples.row(c).segment(300, 1200).mean() - r.samples.row(c).head(300).mean();
    EXPECT_NEAR(out.samples.row(c).mean(), expected, 1e-12);
  }
}

TEST(BaselineCorrect, ShortTrialRejected) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Zero(1, 1400);
  try {
    baseline_correct(r);
    FAIL() << "expected insufficient duration";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::InsufficientDuration);
  }
}

TEST(SplitWindows, FourSecondsGiveSixteenWindows) {
  std::mt19937_64 rng(4);
  Recording r;
  r.rate = 300.0;
  r.samples = testkit::random_matrix(rng, 19, 1200);
  const WindowSplit split = split_windows(r, 0.25, 9);
  ASSERT_EQ(split.windows.size(), 16u);
  EXPECT_EQ(split.dropped_samples, 0);
  for (std::size_t k = 0; k < split.windows.size(); ++k) {
    const Window& w = split.windows[k];
    EXPECT_EQ(w.samples.rows(), 19);
    EXPECT_EQ(w.samples.cols(), 75);
    EXPECT_EQ(w.trial_index, 9);
    EXPECT_EQ(w.ordinal, static_cast<int>(k));
    EXPECT_EQ(w.samples, r.samples.middleCols(static_cast<Eigen::Index>(k) * 75, 75));
  }
}

TEST(SplitWindows, SingleWindowEqualsInput) {
  std::mt19937_64 rng(5);
  Recording r;
  r.rate = 300.0;
  r.samples = testkit::random_matrix(rng, 2, 75);
  const WindowSplit split = split_windows(r);
  ASSERT_EQ(split.windows.size(), 1u);
  EXPECT_EQ(split.windows[0].samples, r.samples);
}

TEST(SplitWindows, PartialTailDropped) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Zero(1, 1230);
  const WindowSplit split = split_windows(r);
  EXPECT_EQ(split.windows.size(), 16u);
  EXPECT_EQ(split.dropped_samples, 30);
}

TEST(Filters, MagnitudeMatchesAnalyticButterworth) {
  const std::vector<std::pair<FilterSpec, double>> cases{
      {FilterSpec::bandpass(4, 8.0, 15.0), 300.0},
      {FilterSpec::bandpass(4, 15.0, 30.0), 300.0},
      {FilterSpec::bandpass(4, 20.0, 500.0), 1200.0},
      {FilterSpec::lowpass(8, 120.0), 1200.0},
  };
  for (const auto& [spec, rate] : cases) {
    const SosFilter sos = design_filter(spec, rate);
    for (double f = 0.5; f < rate / 2.0; f += rate / 97.0) {
      const double got = std::norm(frequency_response(sos, f, rate));
      EXPECT_NEAR(got, butter_mag2(spec, f, rate), 1e-9) << "f=" << f << " rate=" << rate;
    }
  }
}

TEST(Filters, NotchResponse) {
  const SosFilter sos = design_filter(FilterSpec::notch(60.0, 30.0), 1200.0);
  EXPECT_LT(std::abs(frequency_response(sos, 60.0, 1200.0)), 1e-12);
  EXPECT_NEAR(std::abs(frequency_response(sos, 0.0, 1200.0)), 1.0, 1e-12);
  // -3 dB points sit at 60 +/- 1 Hz for Q = 30 (bilinear warping is negligible here).
  EXPECT_NEAR(std::norm(frequency_response(sos, 61.0, 1200.0)), 0.5, 0.01);
}

// Reference values computed with scipy.signal (butter / iirnotch + sosfiltfilt)
// on x[n] = sin(0.1 n) + 0.5 cos(0.37 n) + 0.01 n, n = 0..599.
TEST(Filters, ZeroPhaseMatchesReferenceImplementation) {
  const Eigen::RowVectorXd x = test_signal(600);
  const std::array<Eigen::Index, 5> at{0, 1, 100, 299, 599};
  struct Case {
    FilterSpec spec;
    double rate;
    std::array<double, 5> expected;
  };
  const std::vector<Case> cases{
      {FilterSpec::bandpass(4, 8.0, 15.0), 300.0,
       {0.04295997098810264, -0.06918585504105118, 0.02240718794443239, -0.011229752663057497, 0.0259152695988799}},
      {FilterSpec::notch(60.0, 30.0), 1200.0,
       {0.5058680460289502, 0.5916572301440504, 0.8395995128175334, 1.5949430313160853, 5.658067466384344}},
      {FilterSpec::lowpass(8, 120.0), 1200.0,
       {0.5011663209094946, 0.5269341525066511, 0.8386297657152819, 1.6009767568781743, 5.717171216537549}},
  };
  for (const auto& c : cases) {
    const Eigen::RowVectorXd y = sosfiltfilt(design_filter(c.spec, c.rate), x);
    for (std::size_t i = 0; i < at.size(); ++i) EXPECT_NEAR(y[at[i]], c.expected[i], 1e-9) << "index " << at[i];
  }
}

TEST(ApplyFilter, DcRejectedByBandpass) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Constant(1, 1500, 7.0);
  const Recording out = apply_filter(r, FilterSpec::bandpass(4, 8.0, 15.0));
  EXPECT_LT(max_abs_mid(out.samples.row(0), 300), 1e-6 * 7.0);
}

TEST(ApplyFilter, InBandSineKeepsAmplitude) {
  const Recording r = sine(1, 1500, 300.0, 11.0, 2.0);
  const Recording out = apply_filter(r, FilterSpec::bandpass(4, 8.0, 15.0));
  const double expected = 2.0 * butter_mag2(FilterSpec::bandpass(4, 8.0, 15.0), 11.0, 300.0);
  const double amp = max_abs_mid(out.samples.row(0), 300);
  EXPECT_NEAR(amp, 2.0, 0.05 * 2.0);
  EXPECT_NEAR(amp, expected, 0.01);
}

TEST(ApplyFilter, NotchRemovesLineNoise) {
  const Recording r = sine(1, 6000, 1200.0, 60.0, 3.0);
  const Recording out = apply_filter(r, FilterSpec::notch(60.0));
  EXPECT_LT(max_abs_mid(out.samples.row(0), 1200), 0.05 * 3.0);
}

TEST(ApplyFilter, BandEdgeAtNyquistRejected) {
  const Recording r = sine(1, 600, 300.0, 10.0);
  for (const auto& spec : {FilterSpec::bandpass(4, 8.0, 150.0), FilterSpec::bandpass(4, 15.0, 8.0),
                           FilterSpec::notch(200.0), FilterSpec::bandpass(0, 8.0, 15.0)}) {
    try {
      apply_filter(r, spec);
      FAIL() << "expected invalid filter";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::InvalidFilter);
    }
  }
}

TEST(ApplyFilter, Linear) {
  std::mt19937_64 rng(6);
  Recording x, y, mix;
  x.rate = y.rate = mix.rate = 1200.0;
  x.samples = testkit::random_matrix(rng, 3, 2000);
  y.samples = testkit::random_matrix(rng, 3, 2000);
  const double a = 1.7, b = -0.3;
  mix.samples = a * x.samples + b * y.samples;
  for (const auto& spec : {FilterSpec::bandpass(4, 20.0, 500.0), FilterSpec::notch(60.0)}) {
    const Eigen::MatrixXd lhs = apply_filter(mix, spec).samples;
    const Eigen::MatrixXd rhs = a * apply_filter(x, spec).samples + b * apply_filter(y, spec).samples;
    EXPECT_LE((lhs - rhs).cwiseAbs().maxCoeff(), 1e-9 * rhs.cwiseAbs().maxCoeff());
  }
}

TEST(ApplyFilter, Deterministic) {
  std::mt19937_64 rng(7);
  Recording x;
  x.rate = 300.0;
  x.samples = testkit::random_matrix(rng, 19, 1500);
  const auto spec = FilterSpec::bandpass(4, 15.0, 30.0);
  EXPECT_EQ(apply_filter(x, spec).samples, apply_filter(x, spec).samples);
}

TEST(WindowRms, Examples) {
  Window w;
  w.samples.resize(3, 4);
  w.samples << 3, -3, 3, -3, 0, 0, 0, 0, 1, 2, 3, 4;
  const Eigen::VectorXd r = window_rms(w);
  EXPECT_DOUBLE_EQ(r[0], 3.0);
  EXPECT_DOUBLE_EQ(r[1], 0.0);
  EXPECT_NEAR(r[2], std::sqrt(30.0 / 4.0), 1e-15);
  EXPECT_NEAR(r[2], 2.7386, 1e-4);
}

TEST(WindowRms, ScaleEquivariant) {
  std::mt19937_64 rng(8);
  Window w;
  w.samples = testkit::random_matrix(rng, 6, 300);
  const Eigen::VectorXd base = window_rms(w);
  for (const double c : {-2.5, 0.01, 13.0}) {
    Window s;
    s.samples = c * w.samples;
    EXPECT_LE((window_rms(s) - std::abs(c) * base).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, std::abs(c)));
  }
}

TEST(Recording, ValidateRejectsNonFinite) {
  Recording r;
  r.rate = 300.0;
  r.samples = Eigen::MatrixXd::Zero(2, 10);
  EXPECT_NO_THROW(validate(r));
  r.samples(1, 3) = std::nan("");
  EXPECT_THROW(validate(r), Error);
  r.samples(1, 3) = 0.0;
  r.rate = 0.0;
  EXPECT_THROW(validate(r), Error);
}

TEST(TrialRecording, DurationsMustAgree) {
  TrialRecording t;
  t.eeg.rate = t.emg.rate = 1200.0;
  t.eeg.samples = Eigen::MatrixXd::Zero(19, 6001);
  t.emg.samples = Eigen::MatrixXd::Zero(6, 6000);
  EXPECT_NO_THROW(t.validate());
  t.emg.samples = Eigen::MatrixXd::Zero(6, 5990);
  EXPECT_THROW(t.validate(), Error);
}
