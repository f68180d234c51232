#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string_view>
#include <vector>

#include "dataset.hpp"
#include "stats.hpp"

namespace slicelens {

using SliceId = std::uint64_t;

enum class Decision {
  untested,      // never reached the significance procedure
  rejected,      // null rejected: a problematic slice
  accepted,      // tested, not significant
  not_testable,  // too small or zero pooled variance
};

std::string_view to_string(Decision decision);
std::optional<Decision> parse_decision(std::string_view text);

/// Canonical literal sequence: literals ordered by feature name, each packed
/// as (name rank, op, value). Compared lexicographically it realizes
/// "features sorted by name, values by domain order".
using CanonicalKey = std::vector<std::uint64_t>;

CanonicalKey canonical_key(const Dataset& dataset, std::span<const Literal> literals);

/// Everything the session keeps about one explored slice. Members are not
/// stored; they are re-derived from the literals when needed.
struct SliceRecord {
  SliceId id = 0;
  std::vector<Literal> literals;
  CanonicalKey key;
  SliceStats stats;
  Decision decision = Decision::untested;
  double alpha_spent = 0.0;
  /// Position in the session's significance-test sequence, if tested.
  std::optional<std::size_t> test_index;
  std::size_t depth = 0;

  std::size_t num_literals() const { return literals.size(); }
};

/// The ≺ order: fewer literals, then larger size, then larger effect size,
/// then canonical key. Finite effect sizes rank ahead of +inf (degenerate
/// slices sort last among equal sizes), then -inf, then NaN.
bool precedes(const SliceRecord& a, const SliceRecord& b);

/// Effect-size threshold test used everywhere: finite phi >= T.
inline bool passes_threshold(const SliceStats& stats, double threshold) {
  return stats.effect_size >= threshold &&
         stats.effect_size != std::numeric_limits<double>::infinity();
}

}  // namespace slicelens
