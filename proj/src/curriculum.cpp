#include "gtnn/curriculum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace gtnn {

namespace {

constexpr double kInvE = 1.0 / std::numbers::e;
constexpr int kMaxHalleyIterations = 50;
constexpr double kHalleyTolerance = 1e-14;

double initial_guess(double x) {
  if (x < -0.25) {
    // Series about the branch point in p = sqrt(2(e x + 1)).
    const double p = std::sqrt(std::max(0.0, 2.0 * (std::numbers::e * x + 1.0)));
    return -1.0 + p * (1.0 + p * (-1.0 / 3.0 + p * 11.0 / 72.0));
  }
  if (x < 3.0) {
    // Winitzki's approximation; good to a few percent on this range.
    const double l = std::log1p(x);
    return l * (1.0 - std::log1p(l) / (2.0 + l));
  }
  const double l1 = std::log(x);
  const double l2 = std::log(l1);
  return l1 - l2 + l2 / l1;
}

}  // namespace

double lambert_w0(double x) {
  if (std::isnan(x)) throw CurriculumError("lambert_w0: NaN input");
  if (x < -kInvE - 1e-12) {
    throw CurriculumError("lambert_w0: argument below -1/e");
  }
  if (x <= -kInvE) return -1.0;
  if (x == 0.0) return 0.0;
  if (std::isinf(x)) return x;

  double w = initial_guess(x);
  for (int it = 0; it < kMaxHalleyIterations; ++it) {
    const double ew = std::exp(w);
    const double f = w * ew - x;
    const double wp1 = w + 1.0;
    if (std::abs(wp1) < 1e-300) break;
    const double step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
    w -= step;
    if (std::abs(step) <= kHalleyTolerance * (1.0 + std::abs(w))) break;
  }
  return std::max(w, -1.0);
}

LossHistory::LossHistory(int capacity) : capacity_(capacity) {
  if (capacity < 1) throw CurriculumError("loss window k must be >= 1");
}

void LossHistory::push(long iteration, double loss) {
  if (!std::isfinite(loss)) throw CurriculumError("non-finite loss pushed into history");
  if (!iterations_.empty() && iteration < iterations_.back()) {
    throw CurriculumError("loss history iterations must be non-decreasing");
  }
  iterations_.push_back(iteration);
  losses_.push_back(loss);
  while (static_cast<int>(losses_.size()) > capacity_) {
    iterations_.pop_front();
    losses_.pop_front();
  }
}

double trend_delta(const std::deque<double>& losses) {
  if (losses.size() < 2) return 0.0;
  double net = 0.0, total = 0.0;
  for (std::size_t j = 1; j < losses.size(); ++j) {
    const double diff = losses[j] - losses[j - 1];
    net += diff;
    total += std::abs(diff);
  }
  if (total == 0.0) return 0.0;
  return std::clamp(net / total, -1.0, 1.0);
}

double sigma_star(double loss, double tau, double delta, double alpha, double lambda) {
  if (!(lambda > 0)) throw CurriculumError("sigma_star: lambda must be > 0");
  const double beta = (loss - (tau - alpha * delta)) / lambda;
  return std::exp(-lambert_w0(0.5 * std::max(-2.0 * kInvE, beta)));
}

double confidence_objective(double sigma, double loss, double tau, double delta, double alpha,
                            double lambda) {
  const double log_sigma = std::log(sigma);
  return (loss - (tau - alpha * delta)) * sigma + lambda * log_sigma * log_sigma;
}

const char* to_string(CurriculumMode m) {
  switch (m) {
    case CurriculumMode::kNone:
      return "none";
    case CurriculumMode::kSl:
      return "sl";
    case CurriculumMode::kTrendSl:
      return "trend_sl";
  }
  return "?";
}

CurriculumMode curriculum_mode_from_string(const std::string& s) {
  if (s == "none") return CurriculumMode::kNone;
  if (s == "sl") return CurriculumMode::kSl;
  if (s == "trend_sl") return CurriculumMode::kTrendSl;
  throw CurriculumError("unknown curriculum mode '" + s + "' (expected none, sl, trend_sl)");
}

void CurriculumSettings::validate() const {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw CurriculumError("curriculum.alpha must be in [0, 1]");
  if (!(lambda > 0.0)) throw CurriculumError("curriculum.lambda must be > 0");
  if (k < 1) throw CurriculumError("curriculum.k must be >= 1");
  if (!(ema_gamma > 0.0 && ema_gamma < 1.0)) {
    throw CurriculumError("curriculum.ema_gamma must be in (0, 1)");
  }
}

CurriculumState::CurriculumState(CurriculumSettings settings) : settings_(settings) {
  settings_.validate();
}

double CurriculumState::update_tau(const std::vector<double>& batch_losses) {
  if (batch_losses.empty()) throw CurriculumError("update_tau: empty batch");
  double sum = 0.0;
  for (double l : batch_losses) {
    if (!std::isfinite(l)) throw CurriculumError("update_tau: non-finite loss");
    sum += l;
  }
  const double mean = sum / static_cast<double>(batch_losses.size());
  if (!tau_initialized_) {
    tau_ = mean;
    tau_initialized_ = true;
  } else {
    tau_ = settings_.ema_gamma * tau_ + (1.0 - settings_.ema_gamma) * mean;
  }
  return tau_;
}

BatchWeights CurriculumState::weight_batch(const std::vector<std::uint64_t>& sample_ids,
                                           const std::vector<double>& losses, long iteration) {
  if (sample_ids.size() != losses.size()) {
    throw CurriculumError("weight_batch: ids/losses size mismatch");
  }
  for (std::size_t i = 0; i < losses.size(); ++i) {
    auto it = histories_.try_emplace(sample_ids[i], settings_.k).first;
    it->second.push(iteration, losses[i]);
  }
  update_tau(losses);

  const double alpha = settings_.effective_alpha();
  BatchWeights out;
  out.sigma.reserve(losses.size());
  out.labels.reserve(losses.size());
  out.delta.reserve(losses.size());
  for (std::size_t i = 0; i < losses.size(); ++i) {
    const double delta = trend_delta(histories_.at(sample_ids[i]));
    const double threshold = tau_ - alpha * delta;
    DifficultyLabel label;
    label.threshold_used = threshold;
    label.label = losses[i] <= threshold ? Difficulty::kEasy : Difficulty::kHard;
    const double sigma = settings_.mode == CurriculumMode::kNone
                             ? 1.0
                             : sigma_star(losses[i], tau_, delta, alpha, settings_.lambda);
    out.sigma.push_back(sigma);
    out.labels.push_back(label);
    out.delta.push_back(delta);
  }
  return out;
}

const LossHistory* CurriculumState::history(std::uint64_t sample_id) const {
  const auto it = histories_.find(sample_id);
  return it == histories_.end() ? nullptr : &it->second;
}

}  // namespace gtnn
