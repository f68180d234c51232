#include "slice_record.hpp"

#include <algorithm>
#include <cmath>

namespace slicelens {

std::string_view to_string(Decision decision) {
  switch (decision) {
    case Decision::untested: return "untested";
    case Decision::rejected: return "rejected";
    case Decision::accepted: return "accepted";
    case Decision::not_testable: return "not_testable";
  }
  return "?";
}

std::optional<Decision> parse_decision(std::string_view text) {
  for (auto d : {Decision::untested, Decision::rejected, Decision::accepted,
                 Decision::not_testable}) {
    if (to_string(d) == text) return d;
  }
  return std::nullopt;
}

CanonicalKey canonical_key(const Dataset& dataset, std::span<const Literal> literals) {
  CanonicalKey key;
  key.reserve(literals.size());
  for (const auto& l : literals) {
    key.push_back((static_cast<std::uint64_t>(dataset.name_rank(l.feature)) << 36) |
                  (static_cast<std::uint64_t>(l.op) << 32) | l.value);
  }
  std::sort(key.begin(), key.end());
  return key;
}

namespace {

// (class, value): class 0 = finite (higher value first), 1 = +inf,
// 2 = -inf, 3 = NaN
int effect_class(double phi) {
  if (std::isnan(phi)) return 3;
  if (std::isinf(phi)) return phi > 0 ? 1 : 2;
  return 0;
}

}  // namespace

bool precedes(const SliceRecord& a, const SliceRecord& b) {
  if (a.num_literals() != b.num_literals()) return a.num_literals() < b.num_literals();
  if (a.stats.size != b.stats.size) return a.stats.size > b.stats.size;
  const int ca = effect_class(a.stats.effect_size);
  const int cb = effect_class(b.stats.effect_size);
  if (ca != cb) return ca < cb;
  if (ca == 0 && a.stats.effect_size != b.stats.effect_size) {
    return a.stats.effect_size > b.stats.effect_size;
  }
  return a.key < b.key;
}

}  // namespace slicelens
