#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace slicelens {

struct TestDecision {
  double p_value = 1.0;
  double alpha_spent = 0.0;
  bool rejected = false;
};

/// Alpha-investing with the Best-foot-forward spend rule:
///   alpha_j = W / (1 + W); reject iff p <= alpha_j;
///   W <- W - alpha_j / (1 - alpha_j) + (rejected ? payout : 0).
/// Initial wealth is alpha; the payout defaults to alpha.
class AlphaInvesting {
 public:
  explicit AlphaInvesting(double alpha, std::optional<double> payout = std::nullopt);

  /// Tests one hypothesis. With zero wealth nothing is spent, nothing is
  /// rejected and no decision is recorded.
  TestDecision test(double p_value);

  double wealth() const { return wealth_; }
  double payout() const { return payout_; }
  double initial_alpha() const { return alpha_; }
  std::size_t tests() const { return decisions_.size(); }
  std::span<const TestDecision> decisions() const { return decisions_; }

  /// Restores a saved ledger (session snapshots).
  void restore(double wealth, std::vector<TestDecision> decisions);

 private:
  double alpha_;
  double payout_;
  double wealth_;
  std::vector<TestDecision> decisions_;
};

/// Reject iff p <= alpha / m.
std::vector<bool> bonferroni(std::span<const double> p_values, double alpha, std::size_t m);

/// Benjamini-Hochberg step-up at level alpha with m = p_values.size().
std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double alpha);

/// V / R for one run, 0 when nothing was rejected.
double mfdr(std::span<const bool> rejected, std::span<const bool> truly_null);

enum class FdrMode { investing, fixed, bonferroni, bh };

std::string_view to_string(FdrMode mode);
std::optional<FdrMode> parse_fdr_mode(std::string_view text);

/// Significance procedure used by the searchers. Sequential modes (investing,
/// fixed) test one p-value at a time in the given order; bonferroni and bh
/// treat each call as one batch.
class SignificanceGate {
 public:
  SignificanceGate(FdrMode mode, double alpha);

  /// Tests p-values in order. Sequential modes stop right after
  /// `rejections_wanted` rejections, so the returned vector may be shorter
  /// than the input; batch modes always decide the whole batch.
  std::vector<TestDecision> decide(std::span<const double> p_values,
                                   std::size_t rejections_wanted);

  FdrMode mode() const { return mode_; }
  double alpha() const { return alpha_; }
  const AlphaInvesting& investing() const { return investing_; }
  AlphaInvesting& investing() { return investing_; }

 private:
  FdrMode mode_;
  double alpha_;
  AlphaInvesting investing_;
};

}  // namespace slicelens
