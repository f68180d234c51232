#include "lattice_search.hpp"

#include <algorithm>
#include <unordered_set>

#include "error.hpp"
#include "parallel.hpp"

namespace slicelens {

namespace {

struct KeyHash {
  std::size_t operator()(const CanonicalKey& key) const noexcept {
    std::size_t h = 0xcbf29ce484222325ULL;
    for (auto x : key) h = (h ^ std::hash<std::uint64_t>{}(x)) * 0x100000001b3ULL;
    return h;
  }
};

struct Candidate {
  std::size_t parent;
  Literal literal;
  std::vector<Literal> literals;  // sorted by feature index
};

bool uses_feature(std::span<const Literal> literals, FeatureIndex f) {
  return std::any_of(literals.begin(), literals.end(),
                     [f](const Literal& l) { return l.feature == f; });
}

bool subsumed(std::span<const Literal> literals,
              std::span<const std::vector<Literal>> problematic) {
  const auto by_feature = [](const Literal& a, const Literal& b) {
    return a.feature < b.feature || (a.feature == b.feature && a.value < b.value);
  };
  for (const auto& p : problematic) {
    if (std::includes(literals.begin(), literals.end(), p.begin(), p.end(), by_feature)) {
      return true;
    }
  }
  return false;
}

std::vector<Literal> sorted_by_feature(std::vector<Literal> literals) {
  std::sort(literals.begin(), literals.end(), [](const Literal& a, const Literal& b) {
    return a.feature < b.feature || (a.feature == b.feature && a.value < b.value);
  });
  return literals;
}

std::vector<Candidate> generate(const Dataset& dataset,
                                const std::vector<std::span<const Literal>>& parents,
                                std::span<const std::vector<Literal>> problematic) {
  std::vector<std::vector<Literal>> sorted_problematic;
  for (const auto& p : problematic) sorted_problematic.push_back(sorted_by_feature(p));

  std::vector<Candidate> out;
  std::unordered_set<CanonicalKey, KeyHash> seen;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    for (FeatureIndex f = 0; f < dataset.num_features(); ++f) {
      const auto& schema = dataset.schema(f);
      if (schema.degenerate || uses_feature(parents[i], f)) continue;
      for (ValueIndex v = 0; v < schema.domain_size(); ++v) {
        Literal literal{f, Op::eq, v};
        std::vector<Literal> literals(parents[i].begin(), parents[i].end());
        literals.push_back(literal);
        literals = sorted_by_feature(std::move(literals));
        if (subsumed(literals, sorted_problematic)) continue;
        if (!seen.insert(canonical_key(dataset, literals)).second) continue;
        out.push_back({i, literal, std::move(literals)});
      }
    }
  }
  return out;
}

}  // namespace

std::vector<Slice> expand_slices(const Dataset& dataset, std::span<const Slice> base,
                                 std::span<const std::vector<Literal>> problematic) {
  std::vector<std::span<const Literal>> parents;
  for (const auto& b : base) parents.emplace_back(b.literals);
  std::vector<Slice> out;
  for (auto& c : generate(dataset, parents, problematic)) {
    auto members = intersect(base[c.parent].members, dataset.posting(c.literal.feature,
                                                                     c.literal.value));
    if (members.empty()) continue;
    out.push_back({std::move(c.literals), std::move(members)});
  }
  return out;
}

LatticeSearcher::LatticeSearcher(std::shared_ptr<const Dataset> dataset,
                                 std::shared_ptr<const LossSummary> losses,
                                 SearchOptions options)
    : Searcher(std::move(dataset), std::move(losses), options) {}

std::size_t LatticeSearcher::depth_limit() const {
  const auto n = dataset_->num_features();
  return options_.max_depth == 0 ? n : std::min(options_.max_depth, n);
}

bool LatticeSearcher::expand_next_level() {
  if (depth_ >= depth_limit()) return false;

  // N: everything at the current level that was not found problematic
  std::vector<std::span<const Literal>> parents;
  std::vector<const std::vector<RowIndex>*> parent_members;
  std::vector<RowIndex> all_rows;
  if (depth_ == 0) {
    all_rows.resize(dataset_->size());
    for (std::size_t r = 0; r < all_rows.size(); ++r) all_rows[r] = static_cast<RowIndex>(r);
    parents.emplace_back();
    parent_members.push_back(&all_rows);
  } else {
    for (std::size_t i = 0; i < level_ids_.size(); ++i) {
      const auto& r = explored_[level_ids_[i]];
      if (r.decision == Decision::rejected) continue;
      parents.emplace_back(r.literals);
      parent_members.push_back(&level_members_[i]);
    }
  }

  auto candidates = generate(*dataset_, parents, problematic_);
  std::vector<std::vector<RowIndex>> members(candidates.size());
  std::vector<SliceStats> stats(candidates.size());
  parallel_for(candidates.size(), options_.workers, [&](std::size_t i) {
    const auto& c = candidates[i];
    members[i] = intersect(*parent_members[c.parent],
                           dataset_->posting(c.literal.feature, c.literal.value));
    if (!members[i].empty()) stats[i] = losses_->evaluate(members[i], options_.min_size);
  });

  ++depth_;
  std::vector<SliceId> next_ids;
  std::vector<std::vector<RowIndex>> next_members;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    if (members[i].empty()) continue;
    next_ids.push_back(add_record(std::move(candidates[i].literals), stats[i]));
    next_members.push_back(std::move(members[i]));
  }
  level_ids_ = std::move(next_ids);
  level_members_ = std::move(next_members);
  return !level_ids_.empty();
}

void LatticeSearcher::on_rejected(const SliceRecord& record) {
  problematic_.push_back(record.literals);
  for (std::size_t i = 0; i < level_ids_.size(); ++i) {
    if (level_ids_[i] == record.id) {
      level_members_[i].clear();
      level_members_[i].shrink_to_fit();
    }
  }
}

void LatticeSearcher::rebuild_level() {
  problematic_.clear();
  for (auto id : results_) problematic_.push_back(explored_[id].literals);
  level_members_.assign(level_ids_.size(), {});
  for (std::size_t i = 0; i < level_ids_.size(); ++i) {
    const auto& r = explored_[level_ids_[i]];
    if (r.decision != Decision::rejected) {
      level_members_[i] = conjunction_members(*dataset_, r.literals);
    }
  }
}

std::vector<SliceRecord> lattice_search(std::shared_ptr<const Dataset> dataset,
                                        std::shared_ptr<const LossSummary> losses,
                                        std::size_t k, const SearchOptions& options) {
  require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  LatticeSearcher searcher(std::move(dataset), std::move(losses), options);
  searcher.run_until(k);
  std::vector<SliceRecord> out;
  for (const auto* r : searcher.results()) {
    if (passes_threshold(r->stats, options.effect_threshold)) out.push_back(*r);
    if (out.size() == k) break;
  }
  return out;
}

}  // namespace slicelens
