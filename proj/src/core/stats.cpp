#include "stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace slicelens {

double per_example_log_loss(int label, double score) {
  const double p = std::clamp(score, kLogLossEpsilon, 1.0 - kLogLossEpsilon);
  return label == 1 ? -std::log(p) : -std::log1p(-p);
}

LossVector compute_losses(const Dataset& dataset) {
  LossVector out;
  const auto labels = dataset.labels();
  const auto scores = dataset.scores();
  out.values.resize(dataset.size());
  if (dataset.score_kind() == ScoreKind::loss) {
    out.kind = LossKind::generic_score;
    std::copy(scores.begin(), scores.end(), out.values.begin());
  } else {
    out.kind = LossKind::log_loss;
    for (std::size_t i = 0; i < dataset.size(); ++i) {
      out.values[i] = per_example_log_loss(labels[i], scores[i]);
    }
  }
  return out;
}

Moments moments(std::span<const double> values) {
  require(!values.empty(), ErrorCode::invalid_argument, "moments of an empty sample");
  Moments m;
  m.size = values.size();
  double sum = 0.0;
  for (double v : values) sum += v;
  m.mean = sum / static_cast<double>(m.size);
  if (m.size > 1) {
    double ss = 0.0;
    for (double v : values) ss += (v - m.mean) * (v - m.mean);
    m.variance = ss / static_cast<double>(m.size - 1);
  }
  return m;
}

Moments slice_loss(std::span<const double> losses, std::span<const RowIndex> members) {
  require(!members.empty(), ErrorCode::invalid_argument, "slice_loss of an empty slice");
  Moments m;
  m.size = members.size();
  double sum = 0.0;
  for (auto r : members) sum += losses[r];
  m.mean = sum / static_cast<double>(m.size);
  if (m.size > 1) {
    double ss = 0.0;
    for (auto r : members) ss += (losses[r] - m.mean) * (losses[r] - m.mean);
    m.variance = ss / static_cast<double>(m.size - 1);
  }
  return m;
}

namespace {

// Modified Lentz evaluation of the incomplete beta continued fraction.
double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIterations = 10000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIterations; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double regularized_incomplete_beta(double a, double b, double x) {
  require(a > 0.0 && b > 0.0, ErrorCode::invalid_argument, "incomplete beta needs a, b > 0");
  if (std::isnan(x)) return x;
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) {
    return front * beta_continued_fraction(a, b, x) / a;
  }
  return 1.0 - front * beta_continued_fraction(b, a, 1.0 - x) / b;
}

double student_t_upper_tail(double t, double df) {
  require(df > 0.0, ErrorCode::invalid_argument, "degrees of freedom must be positive");
  if (std::isnan(t)) return t;
  if (std::isinf(t)) return t > 0 ? 0.0 : 1.0;
  const double x = df / (df + t * t);
  const double tail = 0.5 * regularized_incomplete_beta(df / 2.0, 0.5, x);
  return t >= 0.0 ? tail : 1.0 - tail;
}

std::optional<WelchResult> welch_t(const Moments& slice, const Moments& counterpart,
                                   std::size_t min_size) {
  min_size = std::max<std::size_t>(min_size, 2);
  if (slice.size < min_size || counterpart.size < min_size) return std::nullopt;
  const double r1 = slice.variance / static_cast<double>(slice.size);
  const double r2 = counterpart.variance / static_cast<double>(counterpart.size);
  const double se2 = r1 + r2;
  if (!(se2 > 0.0)) return std::nullopt;

  WelchResult out;
  out.t = (slice.mean - counterpart.mean) / std::sqrt(se2);
  out.df = se2 * se2 /
           (r1 * r1 / static_cast<double>(slice.size - 1) +
            r2 * r2 / static_cast<double>(counterpart.size - 1));
  out.p = student_t_upper_tail(out.t, out.df);
  return out;
}

double effect_size(const Moments& slice, const Moments& counterpart) {
  if (slice.size == 0 || counterpart.size == 0) return std::numeric_limits<double>::quiet_NaN();
  const double diff = slice.mean - counterpart.mean;
  const double pooled = slice.variance + counterpart.variance;
  if (!(pooled > 0.0)) {
    if (diff == 0.0) return 0.0;
    return diff > 0 ? std::numeric_limits<double>::infinity()
                    : -std::numeric_limits<double>::infinity();
  }
  return std::sqrt(2.0) * diff / std::sqrt(pooled);
}

SliceStats compare(const Moments& slice, const Moments& counterpart, std::size_t min_size) {
  SliceStats s;
  s.size = slice.size;
  s.mean_loss = slice.mean;
  s.var_loss = slice.variance;
  s.counterpart_size = counterpart.size;
  s.counterpart_mean = counterpart.mean;
  s.counterpart_var = counterpart.variance;
  s.effect_size = effect_size(slice, counterpart);
  s.t_stat = std::numeric_limits<double>::quiet_NaN();
  s.df = std::numeric_limits<double>::quiet_NaN();
  s.p_value = std::numeric_limits<double>::quiet_NaN();

  min_size = std::max<std::size_t>(min_size, 2);
  if (slice.size < min_size || counterpart.size < min_size) {
    s.testability = Testability::too_small;
    return s;
  }
  if (!(slice.variance + counterpart.variance > 0.0)) {
    s.testability = slice.mean == counterpart.mean ? Testability::degenerate_equal
                                                   : Testability::degenerate_separated;
    return s;
  }
  const auto welch = welch_t(slice, counterpart, min_size);
  s.t_stat = welch->t;
  s.df = welch->df;
  s.p_value = welch->p;
  s.testability = Testability::testable;
  return s;
}

LossSummary::LossSummary(std::vector<double> losses) : losses_(std::move(losses)) {
  if (losses_.empty()) return;
  const auto m = moments(losses_);
  mean_ = m.mean;
  long double t1 = 0.0L;
  long double t2 = 0.0L;
  for (double v : losses_) {
    const long double d = static_cast<long double>(v) - mean_;
    t1 += d;
    t2 += d * d;
  }
  total_shifted_ = static_cast<double>(t1);
  total_shifted_sq_ = static_cast<double>(t2);
}

SliceStats LossSummary::evaluate(std::span<const RowIndex> members, std::size_t min_size) const {
  Moments slice;
  slice.size = members.size();
  long double s1 = 0.0L;
  long double s2 = 0.0L;
  if (!members.empty()) {
    double sum = 0.0;
    for (auto r : members) sum += losses_[r];
    slice.mean = sum / static_cast<double>(slice.size);
    double ss = 0.0;
    for (auto r : members) {
      const double v = losses_[r];
      ss += (v - slice.mean) * (v - slice.mean);
      const long double d = static_cast<long double>(v) - mean_;
      s1 += d;
      s2 += d * d;
    }
    if (slice.size > 1) slice.variance = ss / static_cast<double>(slice.size - 1);
  }

  Moments counterpart;
  counterpart.size = losses_.size() - members.size();
  if (counterpart.size > 0) {
    const long double c1 = static_cast<long double>(total_shifted_) - s1;
    const long double c2 = static_cast<long double>(total_shifted_sq_) - s2;
    const auto m = static_cast<long double>(counterpart.size);
    counterpart.mean = static_cast<double>(mean_ + c1 / m);
    if (counterpart.size > 1) {
      long double var = (c2 - c1 * c1 / m) / (m - 1.0L);
      // cancellation residue; a counterpart with constant losses must come
      // out exactly zero so degeneracy is detected
      const long double floor =
          1e-12L * static_cast<long double>(total_shifted_sq_) / (m - 1.0L);
      if (var <= floor) var = 0.0L;
      counterpart.variance = static_cast<double>(var);
    }
  }
  return compare(slice, counterpart, min_size);
}

}  // namespace slicelens
