#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "dataset.hpp"

namespace slicelens {

inline constexpr double kLogLossEpsilon = 1e-15;

/// -[y ln p + (1-y) ln(1-p)] with p clamped to [eps, 1-eps].
double per_example_log_loss(int label, double score);

enum class LossKind { log_loss, generic_score };

struct LossVector {
  std::vector<double> values;
  LossKind kind = LossKind::log_loss;
};

/// Per-example log loss for probability scores, or the score column itself
/// when it already holds a loss.
LossVector compute_losses(const Dataset& dataset);

struct Moments {
  std::size_t size = 0;
  double mean = 0.0;
  double variance = 0.0;  // n-1 denominator, 0 when size == 1
};

/// Two-pass mean and sample variance. Throws on an empty input.
Moments moments(std::span<const double> values);
Moments slice_loss(std::span<const double> losses, std::span<const RowIndex> members);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 0.0;  // one-sided, H_a: mean(S) > mean(S')
};

/// Welch's unequal-variance t-test. Returns nullopt when either side has
/// fewer than min_size members or both variances are zero.
std::optional<WelchResult> welch_t(const Moments& slice, const Moments& counterpart,
                                   std::size_t min_size = 2);

/// sqrt(2) * (mean_S - mean_S') / sqrt(var_S + var_S'). Zero pooled variance
/// gives 0 for equal means and a signed infinity otherwise; NaN when either
/// side is empty.
double effect_size(const Moments& slice, const Moments& counterpart);

/// Upper tail P(T > t) of Student's t with df degrees of freedom.
double student_t_upper_tail(double t, double df);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation.
double regularized_incomplete_beta(double a, double b, double x);

enum class Testability {
  testable,
  too_small,             // |S| or |S'| below min_size
  degenerate_equal,      // both variances 0, equal means
  degenerate_separated,  // both variances 0, means differ
};

struct SliceStats {
  std::size_t size = 0;
  double mean_loss = 0.0;
  double var_loss = 0.0;
  std::size_t counterpart_size = 0;
  double counterpart_mean = 0.0;
  double counterpart_var = 0.0;
  double effect_size = 0.0;
  double t_stat = 0.0;
  double df = 0.0;
  double p_value = 1.0;
  Testability testability = Testability::too_small;

  bool testable() const { return testability == Testability::testable; }
};

SliceStats compare(const Moments& slice, const Moments& counterpart, std::size_t min_size = 2);

/// Precomputed loss totals so a slice and its counterpart can be summarized
/// from the slice members alone. Sums are shifted by the global mean to keep
/// the one-pass variance well conditioned.
class LossSummary {
 public:
  explicit LossSummary(std::vector<double> losses);

  std::size_t size() const { return losses_.size(); }
  std::span<const double> losses() const { return losses_; }
  double mean() const { return mean_; }

  SliceStats evaluate(std::span<const RowIndex> members, std::size_t min_size = 2) const;

 private:
  std::vector<double> losses_;
  double mean_ = 0.0;
  double total_shifted_ = 0.0;
  double total_shifted_sq_ = 0.0;
};

}  // namespace slicelens
