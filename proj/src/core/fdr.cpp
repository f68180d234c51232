#include "fdr.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "error.hpp"

namespace slicelens {

namespace {

void check_p(double p) {
  require(p >= 0.0 && p <= 1.0, ErrorCode::invalid_argument, "p-value outside [0, 1]");
}

}  // namespace

AlphaInvesting::AlphaInvesting(double alpha, std::optional<double> payout)
    : alpha_(alpha), payout_(payout.value_or(alpha)), wealth_(alpha) {
  require(alpha > 0.0 && alpha < 1.0, ErrorCode::invalid_argument, "alpha must be in (0, 1)");
  require(payout_ >= 0.0, ErrorCode::invalid_argument, "payout must be non-negative");
}

TestDecision AlphaInvesting::test(double p_value) {
  check_p(p_value);
  TestDecision d;
  d.p_value = p_value;
  if (!(wealth_ > 0.0)) return d;

  const double level = wealth_ / (1.0 + wealth_);
  d.alpha_spent = level;
  d.rejected = p_value <= level;
  double next = wealth_ - level / (1.0 - level);
  // level / (1 - level) == wealth analytically; drop the rounding residue
  if (next < 1e-12 * wealth_) next = 0.0;
  if (d.rejected) next += payout_;
  wealth_ = next;
  decisions_.push_back(d);
  return d;
}

void AlphaInvesting::restore(double wealth, std::vector<TestDecision> decisions) {
  require(wealth >= 0.0, ErrorCode::invalid_argument, "wealth must be non-negative");
  wealth_ = wealth;
  decisions_ = std::move(decisions);
}

std::vector<bool> bonferroni(std::span<const double> p_values, double alpha, std::size_t m) {
  require(m > 0, ErrorCode::invalid_argument, "bonferroni needs m > 0");
  require(m >= p_values.size(), ErrorCode::invalid_argument,
          "bonferroni m is smaller than the number of p-values");
  std::vector<bool> out(p_values.size());
  const double threshold = alpha / static_cast<double>(m);
  for (std::size_t i = 0; i < p_values.size(); ++i) {
    check_p(p_values[i]);
    out[i] = p_values[i] <= threshold;
  }
  return out;
}

std::vector<bool> benjamini_hochberg(std::span<const double> p_values, double alpha) {
  require(!p_values.empty(), ErrorCode::invalid_argument, "benjamini_hochberg needs p-values");
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (double p : p_values) check_p(p);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::size_t cutoff = 0;  // number of ranks rejected
  for (std::size_t rank = 1; rank <= m; ++rank) {
    if (p_values[order[rank - 1]] <= static_cast<double>(rank) / static_cast<double>(m) * alpha) {
      cutoff = rank;
    }
  }
  std::vector<bool> out(m, false);
  for (std::size_t rank = 0; rank < cutoff; ++rank) out[order[rank]] = true;
  return out;
}

double mfdr(std::span<const bool> rejected, std::span<const bool> truly_null) {
  require(rejected.size() == truly_null.size(), ErrorCode::invalid_argument,
          "decision and ground-truth lengths differ");
  std::size_t v = 0;
  std::size_t r = 0;
  for (std::size_t i = 0; i < rejected.size(); ++i) {
    if (!rejected[i]) continue;
    ++r;
    if (truly_null[i]) ++v;
  }
  return r == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(r);
}

std::string_view to_string(FdrMode mode) {
  switch (mode) {
    case FdrMode::investing: return "investing";
    case FdrMode::fixed: return "fixed";
    case FdrMode::bonferroni: return "bonferroni";
    case FdrMode::bh: return "bh";
  }
  return "?";
}

std::optional<FdrMode> parse_fdr_mode(std::string_view text) {
  if (text == "investing" || text == "ai") return FdrMode::investing;
  if (text == "fixed") return FdrMode::fixed;
  if (text == "bonferroni" || text == "bf") return FdrMode::bonferroni;
  if (text == "bh" || text == "benjamini-hochberg") return FdrMode::bh;
  return std::nullopt;
}

SignificanceGate::SignificanceGate(FdrMode mode, double alpha)
    : mode_(mode), alpha_(alpha), investing_(alpha) {}

std::vector<TestDecision> SignificanceGate::decide(std::span<const double> p_values,
                                                   std::size_t rejections_wanted) {
  std::vector<TestDecision> out;
  switch (mode_) {
    case FdrMode::investing:
    case FdrMode::fixed: {
      std::size_t rejected = 0;
      for (double p : p_values) {
        if (rejected >= rejections_wanted) break;
        TestDecision d;
        if (mode_ == FdrMode::investing) {
          d = investing_.test(p);
        } else {
          check_p(p);
          d = {p, alpha_, p <= alpha_};
        }
        out.push_back(d);
        if (d.rejected) ++rejected;
      }
      break;
    }
    case FdrMode::bonferroni:
    case FdrMode::bh: {
      if (p_values.empty()) break;
      const auto decisions = mode_ == FdrMode::bonferroni
                                 ? bonferroni(p_values, alpha_, p_values.size())
                                 : benjamini_hochberg(p_values, alpha_);
      const double spent = mode_ == FdrMode::bonferroni
                               ? alpha_ / static_cast<double>(p_values.size())
                               : alpha_;
      for (std::size_t i = 0; i < p_values.size(); ++i) {
        out.push_back({p_values[i], spent, decisions[i]});
      }
      break;
    }
  }
  return out;
}

}  // namespace slicelens
