#pragma once

#include <Eigen/Core>
#include <array>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "gtnn/curriculum.hpp"

namespace gtnn {

class DiagnosticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TraceRow;

/// Epoch x sample grid of difficulty labels, losses and trend deltas.
/// Rows are epochs in increasing order; columns are samples in order of
/// first appearance.
struct DifficultyTrace {
  std::vector<int> epochs;
  std::vector<std::string> sample_ids;
  Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic> hard;  // true = hard
  Eigen::MatrixXd loss;
  Eigen::MatrixXd delta;

  int num_epochs() const { return static_cast<int>(epochs.size()); }
  int num_samples() const { return static_cast<int>(sample_ids.size()); }
};

/// Builds a rectangular trace; throws if any (epoch, sample) cell is missing
/// or duplicated.
DifficultyTrace trace_from_rows(const std::vector<TraceRow>& rows);

/// Parses the `epoch,sample_id,loss,delta,sigma,label` CSV.
DifficultyTrace read_trace_csv(const std::string& path);
DifficultyTrace parse_trace_csv(const std::string& text);

/// Fraction of samples whose label changed between epochs e-1 and e, for
/// e = 1 .. E-1.
std::vector<double> inversion_fraction(const DifficultyTrace& trace);

/// Trapezoidal integral over unit-spaced indices.
double curve_auc(const std::vector<double>& series);

/// Same integral with the x-axis rescaled to [0, 1].
double curve_auc_normalized(const std::vector<double>& series);

enum class TransitionKind { kE2E, kE2H, kH2E, kH2H };
inline constexpr std::array<TransitionKind, 4> kTransitionKinds{
    TransitionKind::kE2E, TransitionKind::kE2H, TransitionKind::kH2E, TransitionKind::kH2H};

const char* to_string(TransitionKind k);

struct TransitionProfile {
  TransitionKind kind = TransitionKind::kE2E;
  std::vector<double> window;  // offsets -k..+k; empty when no event
  long events = 0;

  bool empty() const { return events == 0; }
};

/// Per-epoch counts of each kind at e = 1 .. E-1, indexed [e-1][kind].
std::vector<std::array<long, 4>> transition_counts(const DifficultyTrace& trace);

/// Per-sample min-max normalized losses (a constant series maps to 0).
Eigen::MatrixXd normalized_losses(const DifficultyTrace& trace);

/// Averages normalized losses at offsets -k..+k around each event epoch e
/// (label at e-1 vs e decides the kind). Only events whose whole window
/// lies inside the trace are used.
std::array<TransitionProfile, 4> transition_profiles(const DifficultyTrace& trace, int k);

enum class HeatmapDirection { kE2HRising, kH2EFalling };

const char* to_string(HeatmapDirection d);

struct InversionHeatmap {
  HeatmapDirection direction = HeatmapDirection::kE2HRising;
  /// fraction(i, j) for j > i; entries with j <= i are NaN.
  Eigen::MatrixXd fraction;
  Eigen::MatrixXi numerator;
  Eigen::MatrixXi denominator;  // samples meeting the epoch-i condition
  std::vector<double> consecutive;  // fraction(i, i + 1)
  double consecutive_auc = 0.0;
};

/// E2H rising: among samples easy with delta > 0 at epoch i, the share that
/// is hard at epoch j. H2E falling: hard with delta < 0 at i, easy at j.
/// An empty condition set yields 0.
InversionHeatmap inversion_heatmap(const DifficultyTrace& trace, HeatmapDirection direction);

struct DiagnosticsOutputs {
  std::map<std::string, std::string> files;  // file name -> contents
};

/// Renders every diagnostic as CSV text keyed by output file name.
DiagnosticsOutputs render_diagnostics(const DifficultyTrace& trace, int window);

}  // namespace gtnn
