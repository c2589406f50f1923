#include "hbmi/signals.hpp"

#include "hbmi/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace hbmi {

namespace {

using cplx = std::complex<double>;

[[noreturn]] void fail(ErrorKind kind, const std::string& msg) { throw Error(kind, "signals", msg); }

// ---------------------------------------------------------------------------
// Butterworth design through zeros/poles/gain, following the usual analog
// prototype -> frequency transform -> bilinear transform route. Frequencies are
// expressed with a design sampling rate of 2 so that 1.0 is Nyquist.

struct Zpk {
  std::vector<cplx> zeros;
  std::vector<cplx> poles;
  double gain = 1.0;
};

constexpr double kDesignFs = 2.0;

Zpk butter_prototype(int order) {
  Zpk proto;
  for (int m = -order + 1; m < order; m += 2) {
    proto.poles.push_back(-std::exp(cplx(0.0, std::numbers::pi * m / (2.0 * order))));
  }
  return proto;
}

double prewarp(double normalized) { return 2.0 * kDesignFs * std::tan(std::numbers::pi * normalized / kDesignFs); }

Zpk lowpass_transform(const Zpk& in, double wo) {
  Zpk out;
  const auto degree = static_cast<int>(in.poles.size() - in.zeros.size());
  for (const auto& z : in.zeros) out.zeros.push_back(z * wo);
  for (const auto& p : in.poles) out.poles.push_back(p * wo);
  out.gain = in.gain * std::pow(wo, degree);
  return out;
}

Zpk bandpass_transform(const Zpk& in, double wo, double bw) {
  Zpk out;
  const auto degree = static_cast<int>(in.poles.size() - in.zeros.size());
  auto split = [&](const std::vector<cplx>& roots, std::vector<cplx>& dst) {
    for (const auto& r : roots) {
      const cplx scaled = r * (bw / 2.0);
      const cplx disc = std::sqrt(scaled * scaled - wo * wo);
      dst.push_back(scaled + disc);
      dst.push_back(scaled - disc);
    }
  };
  split(in.zeros, out.zeros);
  split(in.poles, out.poles);
  for (int i = 0; i < degree; ++i) out.zeros.emplace_back(0.0, 0.0);
  out.gain = in.gain * std::pow(bw, degree);
  return out;
}

Zpk bilinear(const Zpk& in) {
  const double fs2 = 2.0 * kDesignFs;
  Zpk out;
  cplx num(1.0, 0.0);
  cplx den(1.0, 0.0);
  for (const auto& z : in.zeros) {
    out.zeros.push_back((fs2 + z) / (fs2 - z));
    num *= (fs2 - z);
  }
  for (const auto& p : in.poles) {
    out.poles.push_back((fs2 + p) / (fs2 - p));
    den *= (fs2 - p);
  }
  while (out.zeros.size() < out.poles.size()) out.zeros.emplace_back(-1.0, 0.0);
  out.gain = in.gain * (num / den).real();
  return out;
}

// Groups conjugate pairs / real pairs into quadratic factors {1, c1, c2}.
std::vector<std::array<double, 3>> quadratic_factors(std::vector<cplx> roots) {
  constexpr double tol = 1e-10;
  std::vector<std::array<double, 3>> factors;
  std::vector<double> reals;
  std::vector<cplx> upper;
  for (const auto& r : roots) {
    if (std::abs(r.imag()) <= tol * std::max(1.0, std::abs(r))) {
      reals.push_back(r.real());
    } else if (r.imag() > 0.0) {
      upper.push_back(r);
    }
  }
  std::sort(upper.begin(), upper.end(), [](const cplx& a, const cplx& b) {
    return std::abs(a) != std::abs(b) ? std::abs(a) < std::abs(b) : a.real() < b.real();
  });
  for (const auto& r : upper) factors.push_back({1.0, -2.0 * r.real(), std::norm(r)});
  std::sort(reals.begin(), reals.end());
  // Pair outermost with innermost so bandpass sections get one zero at +1 and one at -1.
  std::size_t lo = 0;
  std::size_t hi = reals.size();
  while (hi - lo >= 2) {
    const double a = reals[lo++];
    const double b = reals[--hi];
    factors.push_back({1.0, -(a + b), a * b});
  }
  if (hi - lo == 1) factors.push_back({1.0, -reals[lo], 0.0});
  return factors;
}

SosFilter zpk_to_sos(const Zpk& zpk) {
  auto num = quadratic_factors(zpk.zeros);
  auto den = quadratic_factors(zpk.poles);
  const std::size_t n = std::max(num.size(), den.size());
  num.resize(n, {1.0, 0.0, 0.0});
  den.resize(n, {1.0, 0.0, 0.0});
  SosFilter sos;
  for (std::size_t i = 0; i < n; ++i) {
    const double g = i == 0 ? zpk.gain : 1.0;
    sos.sections.push_back({g * num[i][0], g * num[i][1], g * num[i][2], 1.0, den[i][1], den[i][2]});
  }
  return sos;
}

// Steady-state section states for a unit step, scaled through the cascade.
std::vector<std::array<double, 2>> steady_state(const SosFilter& sos) {
  std::vector<std::array<double, 2>> zi;
  double scale = 1.0;
  for (const auto& s : sos.sections) {
    const double a_sum = s[3] + s[4] + s[5];
    const double dc = (s[0] + s[1] + s[2]) / a_sum;
    const double z1 = s[2] - s[5] * dc;
    const double z0 = s[1] - s[4] * dc + z1;
    zi.push_back({scale * z0, scale * z1});
    scale *= dc;
  }
  return zi;
}

void run_cascade(const SosFilter& sos, std::vector<std::array<double, 2>> state, double* data, Eigen::Index n,
                 Eigen::Index stride) {
  for (std::size_t k = 0; k < sos.sections.size(); ++k) {
    const auto& s = sos.sections[k];
    double z0 = state[k][0];
    double z1 = state[k][1];
    for (Eigen::Index i = 0; i < n; ++i) {
      double& v = data[i * stride];
      const double x = v;
      const double y = s[0] * x + z0;
      z0 = s[1] * x - s[4] * y + z1;
      z1 = s[2] * x - s[5] * y;
      v = y;
    }
  }
}

Eigen::Index pad_length(const SosFilter& sos, Eigen::Index length) {
  const auto nsec = static_cast<Eigen::Index>(sos.sections.size());
  Eigen::Index zero_b2 = 0;
  Eigen::Index zero_a2 = 0;
  for (const auto& s : sos.sections) {
    zero_b2 += s[2] == 0.0;
    zero_a2 += s[5] == 0.0;
  }
  const Eigen::Index taps = 2 * nsec + 1 - std::min(zero_b2, zero_a2);
  return std::max<Eigen::Index>(0, std::min(3 * taps, length - 1));
}

}  // namespace

void validate(const Recording& rec) {
  if (!(rec.rate > 0.0) || !std::isfinite(rec.rate)) fail(ErrorKind::InvalidArgument, "sampling rate must be positive");
  if (rec.channels() < 1) fail(ErrorKind::InvalidArgument, "recording has no channels");
  if (!rec.samples.allFinite()) fail(ErrorKind::Domain, "recording contains non-finite samples");
}

FilterSpec FilterSpec::bandpass(int order, double low_hz, double high_hz) {
  return FilterSpec{Kind::Bandpass, order, low_hz, high_hz, 30.0};
}

FilterSpec FilterSpec::lowpass(int order, double cutoff_hz) { return FilterSpec{Kind::Lowpass, order, cutoff_hz, 0.0, 30.0}; }

FilterSpec FilterSpec::notch(double center_hz, double quality) {
  return FilterSpec{Kind::Notch, 2, center_hz, 0.0, quality};
}

void FilterSpec::validate(double rate) const {
  const double nyquist = rate / 2.0;
  if (!(rate > 0.0)) fail(ErrorKind::InvalidFilter, "sampling rate must be positive");
  switch (kind) {
    case Kind::Bandpass:
      if (order < 1) fail(ErrorKind::InvalidFilter, "order must be positive");
      if (!(low > 0.0 && low < high && high < nyquist)) {
        fail(ErrorKind::InvalidFilter, "bandpass requires 0 < low < high < Nyquist (" + std::to_string(low) + ", " +
                                           std::to_string(high) + ", Nyquist " + std::to_string(nyquist) + ")");
      }
      break;
    case Kind::Lowpass:
      if (order < 1) fail(ErrorKind::InvalidFilter, "order must be positive");
      if (!(low > 0.0 && low < nyquist)) fail(ErrorKind::InvalidFilter, "lowpass cutoff must lie in (0, Nyquist)");
      break;
    case Kind::Notch:
      if (!(low > 0.0 && low < nyquist)) fail(ErrorKind::InvalidFilter, "notch center must lie in (0, Nyquist)");
      if (!(quality > 0.0)) fail(ErrorKind::InvalidFilter, "notch quality must be positive");
      break;
  }
}

SosFilter design_filter(const FilterSpec& spec, double rate) {
  spec.validate(rate);
  const double nyquist = rate / 2.0;
  switch (spec.kind) {
    case FilterSpec::Kind::Bandpass: {
      const double lo = prewarp(spec.low / nyquist);
      const double hi = prewarp(spec.high / nyquist);
      return zpk_to_sos(bilinear(bandpass_transform(butter_prototype(spec.order), std::sqrt(lo * hi), hi - lo)));
    }
    case FilterSpec::Kind::Lowpass:
      return zpk_to_sos(bilinear(lowpass_transform(butter_prototype(spec.order), prewarp(spec.low / nyquist))));
    case FilterSpec::Kind::Notch: {
      const double w0 = std::numbers::pi * spec.low / nyquist;
      const double bw = w0 / spec.quality;
      const double gain = 1.0 / (1.0 + std::tan(bw / 2.0));
      const double c = std::cos(w0);
      SosFilter sos;
      sos.sections.push_back({gain, -2.0 * gain * c, gain, 1.0, -2.0 * gain * c, 2.0 * gain - 1.0});
      return sos;
    }
  }
  fail(ErrorKind::InvalidFilter, "unknown filter kind");
}

std::complex<double> frequency_response(const SosFilter& sos, double freq_hz, double rate) {
  const cplx zinv = std::exp(cplx(0.0, -2.0 * std::numbers::pi * freq_hz / rate));
  cplx h(1.0, 0.0);
  for (const auto& s : sos.sections) {
    h *= (s[0] + zinv * (s[1] + zinv * s[2])) / (s[3] + zinv * (s[4] + zinv * s[5]));
  }
  return h;
}

void sosfilt(const SosFilter& sos, Eigen::Ref<Eigen::RowVectorXd> signal) {
  std::vector<std::array<double, 2>> zero(sos.sections.size(), {0.0, 0.0});
  run_cascade(sos, zero, signal.data(), signal.size(), signal.innerStride());
}

Eigen::RowVectorXd sosfiltfilt(const SosFilter& sos, const Eigen::Ref<const Eigen::RowVectorXd>& signal) {
  const Eigen::Index n = signal.size();
  if (n == 0) return Eigen::RowVectorXd();
  const Eigen::Index pad = pad_length(sos, n);

  Eigen::RowVectorXd ext(n + 2 * pad);
  for (Eigen::Index i = 0; i < pad; ++i) {
    ext[i] = 2.0 * signal[0] - signal[pad - i];
    ext[n + pad + i] = 2.0 * signal[n - 1] - signal[n - 2 - i];
  }
  ext.segment(pad, n) = signal;

  const auto zi = steady_state(sos);
  auto scaled = [&](double x0) {
    auto z = zi;
    for (auto& s : z) {
      s[0] *= x0;
      s[1] *= x0;
    }
    return z;
  };

  const Eigen::Index m = ext.size();
  run_cascade(sos, scaled(ext[0]), ext.data(), m, 1);
  run_cascade(sos, scaled(ext[m - 1]), ext.data() + (m - 1), m, -1);
  return ext.segment(pad, n);
}

Recording apply_filter(const Recording& rec, const FilterSpec& spec) {
  const SosFilter sos = design_filter(spec, rec.rate);
  Recording out{Eigen::MatrixXd(rec.channels(), rec.length()), rec.rate, rec.modality};
  for (Eigen::Index c = 0; c < rec.channels(); ++c) out.samples.row(c) = sosfiltfilt(sos, rec.samples.row(c));
  return out;
}

Recording downsample(const Recording& rec, double target_rate) {
  if (!(target_rate > 0.0) || !(rec.rate > 0.0)) fail(ErrorKind::RateMismatch, "rates must be positive");
  const double ratio = rec.rate / target_rate;
  const double factor = std::round(ratio);
  if (factor < 1.0 || std::abs(ratio - factor) > 1e-9 * ratio) {
    fail(ErrorKind::RateMismatch, std::to_string(rec.rate) + " Hz is not an integer multiple of " +
                                      std::to_string(target_rate) + " Hz");
  }
  if (factor == 1.0) return rec;

  const Recording smoothed = apply_filter(rec, FilterSpec::lowpass(8, 0.4 * target_rate));
  const auto step = static_cast<Eigen::Index>(factor);
  const Eigen::Index n = rec.length() / step;
  Recording out{Eigen::MatrixXd(rec.channels(), n), target_rate, rec.modality};
  for (Eigen::Index i = 0; i < n; ++i) out.samples.col(i) = smoothed.samples.col(i * step);
  return out;
}

Recording segment(const Recording& rec, double start_s, double end_s) {
  const auto first = static_cast<Eigen::Index>(std::llround(start_s * rec.rate));
  const auto last = static_cast<Eigen::Index>(std::llround(end_s * rec.rate));
  if (first < 0 || last < first) fail(ErrorKind::InvalidArgument, "segment bounds out of order");
  if (last > rec.length()) {
    fail(ErrorKind::InsufficientDuration, "need " + std::to_string(last) + " samples, recording has " +
                                              std::to_string(rec.length()));
  }
  return Recording{rec.samples.middleCols(first, last - first), rec.rate, rec.modality};
}

Recording baseline_correct(const Recording& trial, double baseline_s, double total_s) {
  if (!(baseline_s > 0.0 && baseline_s < total_s)) fail(ErrorKind::InvalidArgument, "baseline must lie inside the trial");
  const auto total = static_cast<Eigen::Index>(std::llround(total_s * trial.rate));
  if (trial.length() < total) {
    fail(ErrorKind::InsufficientDuration, "trial has " + std::to_string(trial.length()) + " samples, need " +
                                              std::to_string(total) + " (" + std::to_string(total_s) + " s)");
  }
  const Recording base = segment(trial, 0.0, baseline_s);
  Recording out = segment(trial, baseline_s, total_s);
  const Eigen::VectorXd mean = base.samples.rowwise().mean();
  out.samples.colwise() -= mean;
  return out;
}

WindowSplit split_windows(const Recording& rec, double window_s, int trial_index) {
  const auto len = static_cast<Eigen::Index>(std::llround(window_s * rec.rate));
  if (len < 1) fail(ErrorKind::InvalidArgument, "window shorter than one sample");
  WindowSplit split;
  const Eigen::Index count = rec.length() / len;
  split.dropped_samples = rec.length() - count * len;
  split.windows.reserve(static_cast<std::size_t>(count));
  for (Eigen::Index w = 0; w < count; ++w) {
    split.windows.push_back(Window{rec.samples.middleCols(w * len, len), trial_index, static_cast<int>(w)});
  }
  return split;
}

Eigen::VectorXd window_rms(const Window& w) {
  if (w.samples.size() == 0) fail(ErrorKind::InvalidArgument, "empty window");
  return (w.samples.array().square().rowwise().sum() / static_cast<double>(w.samples.cols())).sqrt();
}

}  // namespace hbmi
