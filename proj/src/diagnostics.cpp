#include "gtnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <unordered_map>

#include "gtnn/trainer.hpp"

namespace gtnn {

namespace {

std::string format_real(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct RawRow {
  int epoch;
  std::string sample;
  double loss;
  double delta;
  bool hard;
};

DifficultyTrace assemble(const std::vector<RawRow>& rows) {
  if (rows.empty()) throw DiagnosticsError("empty trace");
  std::set<int> epoch_set;
  std::vector<std::string> samples;
  std::unordered_map<std::string, int> sample_index;
  for (const auto& r : rows) {
    epoch_set.insert(r.epoch);
    if (sample_index.emplace(r.sample, static_cast<int>(samples.size())).second) {
      samples.push_back(r.sample);
    }
  }
  DifficultyTrace t;
  t.epochs.assign(epoch_set.begin(), epoch_set.end());
  t.sample_ids = samples;
  const auto n_e = static_cast<Eigen::Index>(t.epochs.size());
  const auto n_s = static_cast<Eigen::Index>(samples.size());
  t.hard.setConstant(n_e, n_s, false);
  t.loss.setConstant(n_e, n_s, std::numeric_limits<double>::quiet_NaN());
  t.delta.setZero(n_e, n_s);
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> seen;
  seen.setConstant(n_e, n_s, false);
  for (const auto& r : rows) {
    const auto e = std::lower_bound(t.epochs.begin(), t.epochs.end(), r.epoch) - t.epochs.begin();
    const auto s = sample_index.at(r.sample);
    if (seen(e, s)) {
      throw DiagnosticsError("duplicate trace cell (epoch " + std::to_string(r.epoch) +
                             ", sample " + r.sample + ")");
    }
    seen(e, s) = true;
    t.hard(e, s) = r.hard;
    t.loss(e, s) = r.loss;
    t.delta(e, s) = r.delta;
  }
  if (!seen.all()) throw DiagnosticsError("trace is not rectangular: missing (epoch, sample) cells");
  return t;
}

}  // namespace

DifficultyTrace trace_from_rows(const std::vector<TraceRow>& rows) {
  std::vector<RawRow> raw;
  raw.reserve(rows.size());
  for (const auto& r : rows) {
    raw.push_back({r.epoch, std::to_string(r.sample), r.loss, r.delta, r.label == Difficulty::kHard});
  }
  return assemble(raw);
}

DifficultyTrace parse_trace_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  int row = 0;
  std::vector<RawRow> raw;
  const auto fail = [&row](const std::string& what) {
    throw DiagnosticsError("trace row " + std::to_string(row) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (line.rfind("epoch,", 0) == 0) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) cols.push_back(field);
    if (cols.size() != 6) fail("expected 6 columns");
    RawRow r{};
    try {
      std::size_t used = 0;
      r.epoch = std::stoi(cols[0], &used);
      if (used != cols[0].size()) fail("bad epoch");
      r.loss = std::stod(cols[2], &used);
      if (used != cols[2].size()) fail("bad loss");
      r.delta = std::stod(cols[3], &used);
      if (used != cols[3].size()) fail("bad delta");
    } catch (const std::logic_error&) {
      fail("unparsable number");
    }
    if (cols[1].empty()) fail("empty sample_id");
    r.sample = cols[1];
    if (cols[5] == "easy") {
      r.hard = false;
    } else if (cols[5] == "hard") {
      r.hard = true;
    } else {
      fail("label must be easy or hard");
    }
    raw.push_back(std::move(r));
  }
  return assemble(raw);
}

DifficultyTrace read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DiagnosticsError("cannot open trace '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_trace_csv(buf.str());
}

std::vector<double> inversion_fraction(const DifficultyTrace& t) {
  if (t.num_epochs() < 2) throw DiagnosticsError("inversion_fraction needs >= 2 epochs");
  std::vector<double> out;
  for (int e = 1; e < t.num_epochs(); ++e) {
    const auto flips = (t.hard.row(e).array() != t.hard.row(e - 1).array()).count();
    out.push_back(static_cast<double>(flips) / t.num_samples());
  }
  return out;
}

double curve_auc(const std::vector<double>& s) {
  double area = 0.0;
  for (std::size_t i = 1; i < s.size(); ++i) area += 0.5 * (s[i - 1] + s[i]);
  return area;
}

double curve_auc_normalized(const std::vector<double>& s) {
  if (s.size() < 2) return 0.0;
  return curve_auc(s) / static_cast<double>(s.size() - 1);
}

const char* to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::kE2E:
      return "E2E";
    case TransitionKind::kE2H:
      return "E2H";
    case TransitionKind::kH2E:
      return "H2E";
    case TransitionKind::kH2H:
      return "H2H";
  }
  return "?";
}

namespace {

int kind_index(bool was_hard, bool is_hard) { return (was_hard ? 2 : 0) + (is_hard ? 1 : 0); }

}  // namespace

std::vector<std::array<long, 4>> transition_counts(const DifficultyTrace& t) {
  std::vector<std::array<long, 4>> out;
  for (int e = 1; e < t.num_epochs(); ++e) {
    std::array<long, 4> c{};
    for (int s = 0; s < t.num_samples(); ++s) ++c[kind_index(t.hard(e - 1, s), t.hard(e, s))];
    out.push_back(c);
  }
  return out;
}

Eigen::MatrixXd normalized_losses(const DifficultyTrace& t) {
  Eigen::MatrixXd out(t.loss.rows(), t.loss.cols());
  for (Eigen::Index s = 0; s < t.loss.cols(); ++s) {
    const double lo = t.loss.col(s).minCoeff();
    const double hi = t.loss.col(s).maxCoeff();
    if (hi > lo) {
      out.col(s) = (t.loss.col(s).array() - lo) / (hi - lo);
    } else {
      out.col(s).setZero();
    }
  }
  return out;
}

std::array<TransitionProfile, 4> transition_profiles(const DifficultyTrace& t, int k) {
  if (k < 0) throw DiagnosticsError("window radius must be >= 0");
  if (t.num_epochs() < 2 * k + 1) {
    throw DiagnosticsError("transition window " + std::to_string(k) + " needs >= " +
                           std::to_string(2 * k + 1) + " epochs, trace has " +
                           std::to_string(t.num_epochs()));
  }
  const Eigen::MatrixXd norm = normalized_losses(t);
  std::array<Eigen::VectorXd, 4> sums;
  std::array<long, 4> counts{};
  for (auto& s : sums) s.setZero(2 * k + 1);
  for (int e = std::max(1, k); e + k < t.num_epochs(); ++e) {
    for (int s = 0; s < t.num_samples(); ++s) {
      const int kind = kind_index(t.hard(e - 1, s), t.hard(e, s));
      sums[kind] += norm.col(s).segment(e - k, 2 * k + 1);
      ++counts[kind];
    }
  }
  std::array<TransitionProfile, 4> out;
  for (int i = 0; i < 4; ++i) {
    out[i].kind = kTransitionKinds[i];
    out[i].events = counts[i];
    if (counts[i] > 0) {
      const Eigen::VectorXd mean = sums[i] / static_cast<double>(counts[i]);
      out[i].window.assign(mean.data(), mean.data() + mean.size());
    }
  }
  return out;
}

const char* to_string(HeatmapDirection d) {
  return d == HeatmapDirection::kE2HRising ? "E2H_rising" : "H2E_falling";
}

InversionHeatmap inversion_heatmap(const DifficultyTrace& t, HeatmapDirection dir) {
  const int n_e = t.num_epochs();
  InversionHeatmap h;
  h.direction = dir;
  h.fraction.setConstant(n_e, n_e, std::numeric_limits<double>::quiet_NaN());
  h.numerator.setZero(n_e, n_e);
  h.denominator.setZero(n_e, n_e);
  const bool rising = dir == HeatmapDirection::kE2HRising;
  for (int i = 0; i < n_e; ++i) {
    for (int j = i + 1; j < n_e; ++j) {
      int num = 0, den = 0;
      for (int s = 0; s < t.num_samples(); ++s) {
        const bool cond = rising ? (!t.hard(i, s) && t.delta(i, s) > 0)
                                 : (t.hard(i, s) && t.delta(i, s) < 0);
        if (!cond) continue;
        ++den;
        num += rising ? t.hard(j, s) : !t.hard(j, s);
      }
      h.numerator(i, j) = num;
      h.denominator(i, j) = den;
      h.fraction(i, j) = den > 0 ? static_cast<double>(num) / den : 0.0;
    }
  }
  for (int i = 0; i + 1 < n_e; ++i) h.consecutive.push_back(h.fraction(i, i + 1));
  h.consecutive_auc = curve_auc(h.consecutive);
  return h;
}

DiagnosticsOutputs render_diagnostics(const DifficultyTrace& t, int window) {
  DiagnosticsOutputs out;
  const auto inv = inversion_fraction(t);
  {
    std::ostringstream f;
    f << "epoch,fraction\n";
    for (std::size_t e = 0; e < inv.size(); ++e) {
      f << t.epochs[e + 1] << ',' << format_real(inv[e]) << '\n';
    }
    out.files["inversion_fraction.csv"] = f.str();
  }
  for (const auto& p : transition_profiles(t, window)) {
    std::ostringstream f;
    f << "offset,mean_normalized_loss,events\n";
    for (int o = -window; o <= window; ++o) {
      f << o << ',';
      if (!p.empty()) f << format_real(p.window[o + window]);
      f << ',' << p.events << '\n';
    }
    out.files[std::string("transition_") + to_string(p.kind) + ".csv"] = f.str();
  }
  std::ostringstream auc;
  auc << "metric,value\n";
  auc << "inversion_fraction_auc," << format_real(curve_auc(inv)) << '\n';
  auc << "inversion_fraction_auc_normalized," << format_real(curve_auc_normalized(inv)) << '\n';
  for (auto dir : {HeatmapDirection::kE2HRising, HeatmapDirection::kH2EFalling}) {
    const auto h = inversion_heatmap(t, dir);
    std::ostringstream f;
    f << "epoch_i,epoch_j,numerator,denominator,fraction\n";
    for (int i = 0; i < t.num_epochs(); ++i) {
      for (int j = i + 1; j < t.num_epochs(); ++j) {
        f << t.epochs[i] << ',' << t.epochs[j] << ',' << h.numerator(i, j) << ','
          << h.denominator(i, j) << ',' << format_real(h.fraction(i, j)) << '\n';
      }
    }
    out.files[std::string("heatmap_") + to_string(dir) + ".csv"] = f.str();
    auc << "heatmap_" << to_string(dir) << "_consecutive_auc," << format_real(h.consecutive_auc)
        << '\n';
    auc << "heatmap_" << to_string(dir) << "_consecutive_auc_normalized,"
        << format_real(curve_auc_normalized(h.consecutive)) << '\n';
  }
  out.files["auc_summary.csv"] = auc.str();
  return out;
}

}  // namespace gtnn
