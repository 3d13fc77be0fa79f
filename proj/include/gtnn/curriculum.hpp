#pragma once

#include <cstdint>
#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace gtnn {

class CurriculumError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Principal branch W0 of the Lambert W function on [-1/e, inf). Inputs up
/// to 1e-12 below -1/e are treated as the branch point.
double lambert_w0(double x);

/// Last k (iteration, loss) entries of one sample, oldest first.
class LossHistory {
 public:
  explicit LossHistory(int capacity = 1);

  void push(long iteration, double loss);
  int capacity() const { return capacity_; }
  std::size_t size() const { return losses_.size(); }
  const std::deque<double>& losses() const { return losses_; }
  const std::deque<long>& iterations() const { return iterations_; }

 private:
  int capacity_;
  std::deque<long> iterations_;
  std::deque<double> losses_;
};

/// Normalized net change over the window: sum of consecutive differences
/// divided by the sum of their magnitudes. 0 with fewer than two entries or
/// a flat window.
double trend_delta(const std::deque<double>& losses);
inline double trend_delta(const LossHistory& h) { return trend_delta(h.losses()); }

/// Closed-form minimizer of (l - (tau - alpha*delta)) * s + lambda * log(s)^2:
/// exp(-W0(max(-2/e, beta) / 2)), beta = (l - (tau - alpha*delta)) / lambda.
double sigma_star(double loss, double tau, double delta, double alpha, double lambda);

/// The objective minimized by sigma_star.
double confidence_objective(double sigma, double loss, double tau, double delta, double alpha,
                            double lambda);

enum class CurriculumMode { kNone, kSl, kTrendSl };

const char* to_string(CurriculumMode m);
CurriculumMode curriculum_mode_from_string(const std::string& s);

enum class Difficulty : std::uint8_t { kEasy, kHard };

struct DifficultyLabel {
  Difficulty label = Difficulty::kEasy;
  double threshold_used = 0.0;  // tau - alpha * delta
};

struct CurriculumSettings {
  CurriculumMode mode = CurriculumMode::kTrendSl;
  double alpha = 0.3;
  double lambda = 1.0;
  int k = 5;
  double ema_gamma = 0.9;

  void validate() const;
  /// alpha actually applied: forced to 0 outside trend_sl.
  double effective_alpha() const { return mode == CurriculumMode::kTrendSl ? alpha : 0.0; }
};

struct BatchWeights {
  std::vector<double> sigma;
  std::vector<DifficultyLabel> labels;
  std::vector<double> delta;
};

/// Batch-level EMA threshold plus per-sample loss histories.
class CurriculumState {
 public:
  explicit CurriculumState(CurriculumSettings settings);

  const CurriculumSettings& settings() const { return settings_; }
  bool tau_initialized() const { return tau_initialized_; }
  double tau() const { return tau_; }

  /// First call: tau = mean. Later: tau = gamma * tau + (1 - gamma) * mean.
  double update_tau(const std::vector<double>& batch_losses);

  /// Pushes each loss into its sample's history, updates tau once, then
  /// computes delta over the post-insertion window, sigma*, and labels.
  /// Unknown sample ids start a fresh history.
  BatchWeights weight_batch(const std::vector<std::uint64_t>& sample_ids,
                            const std::vector<double>& losses, long iteration);

  const LossHistory* history(std::uint64_t sample_id) const;

 private:
  CurriculumSettings settings_;
  double tau_ = 0.0;
  bool tau_initialized_ = false;
  std::unordered_map<std::uint64_t, LossHistory> histories_;
};

}  // namespace gtnn
