#include "hbmi/evaluation.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>

namespace hbmi {

namespace {

std::string num(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

}  // namespace

// Modes as rows, sessions as columns, plus the mean across sessions.
std::string format_accuracy_table(std::span<const AccuracyReport> reports) {
  std::set<int> sessions;
  std::vector<std::pair<std::string, std::string>> row_keys;
  std::map<std::pair<std::string, std::string>, std::map<int, double>> cells;
  for (const auto& r : reports) {
    std::string mode(to_string(r.mode.mode));
    if (r.mode.mode == DecodeMode::Emg5) mode += "-" + std::string(to_string(r.mode.emg_hand));
    const auto key = std::make_pair(r.protocol, mode);
    if (!cells.count(key)) row_keys.push_back(key);
    cells[key][r.session] = r.accuracy;
    sessions.insert(r.session);
  }
  std::ostringstream out;
  out << "protocol,mode";
  for (const int s : sessions) out << ",session_" << s;
  out << ",mean\n";
  for (const auto& key : row_keys) {
    const auto& row = cells[key];
    out << key.first << ',' << key.second;
    double sum = 0.0;
    for (const int s : sessions) {
      const auto it = row.find(s);
      out << ',' << (it == row.end() ? std::string() : num(it->second));
      if (it != row.end()) sum += it->second;
    }
    out << ',' << num(sum / static_cast<double>(row.size())) << '\n';
  }
  return out.str();
}

std::string format_repetitions_csv(const AccuracyReport& report) {
  std::ostringstream out;
  out << "protocol,mode,session,repetition,accuracy\n";
  const std::string prefix = report.protocol + "," + std::string(to_string(report.mode.mode)) + "," +
                             std::to_string(report.session) + ",";
  double sum = 0.0;
  for (std::size_t r = 0; r < report.repetition_accuracy.size(); ++r) {
    out << prefix << r + 1 << ',' << num(report.repetition_accuracy[r]) << '\n';
    sum += report.repetition_accuracy[r];
  }
  out << prefix << "mean," << num(sum / static_cast<double>(report.repetition_accuracy.size())) << '\n';
  return out.str();
}

std::string format_decision_log(const AccuracyReport& report) {
  std::ostringstream out;
  out << "session,block,trial,label,window,repetition,fold,true_class,predicted_class,correct\n";
  for (const auto& d : report.decisions) {
    out << d.info.session << ',' << d.info.block << ',' << d.info.trial_index << ',' << to_string(d.info.label) << ','
        << d.window << ',' << d.repetition + 1 << ',' << d.fold + 1 << ','
        << report.class_names[static_cast<std::size_t>(d.truth)] << ','
        << report.class_names[static_cast<std::size_t>(d.predicted)] << ',' << (d.truth == d.predicted ? 1 : 0) << '\n';
  }
  return out.str();
}

std::string format_confusion_csv(const AccuracyReport& report) {
  std::ostringstream out;
  out << "true\\predicted";
  for (const auto& n : report.class_names) out << ',' << n;
  out << ",recall\n";
  for (Eigen::Index r = 0; r < report.confusion.rows(); ++r) {
    out << report.class_names[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < report.confusion.cols(); ++c) out << ',' << report.confusion(r, c);
    out << ',' << num(report.recall[static_cast<std::size_t>(r)]) << '\n';
  }
  return out.str();
}

std::string format_context_table(const SweepReport& sweep) {
  std::ostringstream out;
  out << "configuration,levels,p,session,accuracy,baseline_accuracy,delta,newly_correct,newly_incorrect\n";
  for (const auto& row : sweep.rows) {
    std::string levels, ps;
    for (const auto& inj : row.config.injections) {
      if (!levels.empty()) {
        levels += ';';
        ps += ';';
      }
      levels += std::to_string(inj.level);
      ps += num(inj.p);
    }
    out << row.config.name << ',' << levels << ',' << ps << ',' << row.report.session << ',' << num(row.report.accuracy)
        << ',' << num(sweep.baseline.accuracy) << ',' << num(row.report.accuracy - sweep.baseline.accuracy) << ','
        << row.newly_correct << ',' << row.newly_incorrect << '\n';
  }
  return out.str();
}

}  // namespace hbmi
