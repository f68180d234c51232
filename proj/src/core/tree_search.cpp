#include "tree_search.hpp"

#include <algorithm>
#include <numeric>

#include "error.hpp"
#include "parallel.hpp"

namespace slicelens {

std::vector<std::uint8_t> tree_target(const Dataset& dataset) {
  std::vector<std::uint8_t> out(dataset.size());
  const auto labels = dataset.labels();
  const auto scores = dataset.scores();
  if (dataset.score_kind() == ScoreKind::loss) {
    const double mean =
        scores.empty() ? 0.0 : std::accumulate(scores.begin(), scores.end(), 0.0) /
                                   static_cast<double>(scores.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = scores[i] > mean;
  } else {
    for (std::size_t i = 0; i < out.size(); ++i) {
      out[i] = static_cast<std::uint8_t>(scores[i] >= 0.5) != labels[i];
    }
  }
  return out;
}

double gini(std::size_t positives, std::size_t total) {
  if (total == 0) return 0.0;
  const double p = static_cast<double>(positives) / static_cast<double>(total);
  return 2.0 * p * (1.0 - p);
}

std::optional<Split> best_split(const Dataset& dataset, std::span<const RowIndex> members,
                                std::span<const std::uint8_t> target, std::size_t min_leaf) {
  min_leaf = std::max<std::size_t>(min_leaf, 1);
  const std::size_t n = members.size();
  if (n < 2 * min_leaf) return std::nullopt;
  std::size_t positives = 0;
  for (auto r : members) positives += target[r];
  const double parent = gini(positives, n);
  if (parent <= 0.0) return std::nullopt;

  constexpr double kTie = 1e-12;
  std::optional<Split> best;
  std::string best_text;
  const auto consider = [&](Literal left, Literal right, std::size_t nl, std::size_t pl) {
    const std::size_t nr = n - nl;
    if (nl < min_leaf || nr < min_leaf) return;
    const double impurity = (static_cast<double>(nl) * gini(pl, nl) +
                             static_cast<double>(nr) * gini(positives - pl, nr)) /
                            static_cast<double>(n);
    if (impurity >= parent - kTie) return;
    auto text = literal_string(dataset, left);
    if (best) {
      if (impurity > best->impurity + kTie) return;
      if (impurity >= best->impurity - kTie && text >= best_text) return;
    }
    best = Split{left, right, nl, nr, impurity};
    best_text = std::move(text);
  };

  std::vector<std::size_t> count;
  std::vector<std::size_t> pos;
  for (FeatureIndex f = 0; f < dataset.num_features(); ++f) {
    const auto& schema = dataset.schema(f);
    if (schema.degenerate) continue;
    const auto column = dataset.column(f);
    count.assign(schema.domain_size(), 0);
    pos.assign(schema.domain_size(), 0);
    for (auto r : members) {
      ++count[column[r]];
      pos[column[r]] += target[r];
    }
    if (schema.kind == FeatureKind::categorical) {
      for (ValueIndex v = 0; v < schema.domain_size(); ++v) {
        if (count[v] == 0) continue;
        consider({f, Op::eq, v}, {f, Op::ne, v}, count[v], pos[v]);
      }
    } else {
      std::size_t nl = 0;
      std::size_t pl = 0;
      for (ValueIndex b = 0; b + 1 < schema.domain_size(); ++b) {
        nl += count[b];
        pl += pos[b];
        if (count[b] == 0) continue;  // same partition as the previous boundary
        consider({f, Op::le, b}, {f, Op::gt, b}, nl, pl);
      }
    }
  }
  return best;
}

TreeSearcher::TreeSearcher(std::shared_ptr<const Dataset> dataset,
                           std::shared_ptr<const LossSummary> losses, SearchOptions options)
    : Searcher(std::move(dataset), std::move(losses), options),
      target_(tree_target(*dataset_)) {}

bool TreeSearcher::expand_next_level() {
  if (depth_ >= options_.tree_max_depth) return false;

  std::vector<std::span<const Literal>> paths;
  std::vector<const std::vector<RowIndex>*> parent_members;
  std::vector<RowIndex> all_rows;
  if (depth_ == 0) {
    all_rows.resize(dataset_->size());
    std::iota(all_rows.begin(), all_rows.end(), RowIndex{0});
    paths.emplace_back();
    parent_members.push_back(&all_rows);
  } else {
    for (std::size_t i = 0; i < level_ids_.size(); ++i) {
      const auto& r = explored_[level_ids_[i]];
      if (r.decision == Decision::rejected) continue;
      paths.emplace_back(r.literals);
      parent_members.push_back(&level_members_[i]);
    }
  }

  std::vector<std::optional<Split>> splits(paths.size());
  parallel_for(paths.size(), options_.workers, [&](std::size_t i) {
    splits[i] = best_split(*dataset_, *parent_members[i], target_, options_.min_leaf);
  });

  struct Child {
    std::vector<Literal> path;
    std::vector<RowIndex> members;
  };
  std::vector<Child> children;
  const auto column_of = [&](FeatureIndex f) { return dataset_->column(f); };
  for (std::size_t i = 0; i < paths.size(); ++i) {
    if (!splits[i]) continue;
    const auto& s = *splits[i];
    const auto column = column_of(s.left.feature);
    Child left{{paths[i].begin(), paths[i].end()}, {}};
    Child right = left;
    left.path.push_back(s.left);
    right.path.push_back(s.right);
    left.members.reserve(s.left_size);
    right.members.reserve(s.right_size);
    for (auto r : *parent_members[i]) {
      (matches(s.left, column[r]) ? left.members : right.members).push_back(r);
    }
    children.push_back(std::move(left));
    children.push_back(std::move(right));
  }
  if (children.empty()) return false;

  std::vector<SliceStats> stats(children.size());
  parallel_for(children.size(), options_.workers, [&](std::size_t i) {
    stats[i] = losses_->evaluate(children[i].members, options_.min_size);
  });

  ++depth_;
  level_ids_.clear();
  level_members_.clear();
  for (std::size_t i = 0; i < children.size(); ++i) {
    level_ids_.push_back(add_record(std::move(children[i].path), stats[i]));
    level_members_.push_back(std::move(children[i].members));
  }
  return true;
}

void TreeSearcher::rebuild_level() {
  level_members_.assign(level_ids_.size(), {});
  for (std::size_t i = 0; i < level_ids_.size(); ++i) {
    level_members_[i] = conjunction_members(*dataset_, explored_[level_ids_[i]].literals);
  }
}

std::vector<SliceRecord> tree_search(std::shared_ptr<const Dataset> dataset,
                                     std::shared_ptr<const LossSummary> losses, std::size_t k,
                                     const SearchOptions& options) {
  require(k >= 1, ErrorCode::invalid_argument, "k must be >= 1");
  TreeSearcher searcher(std::move(dataset), std::move(losses), options);
  searcher.run_until(k);
  std::vector<SliceRecord> out;
  for (const auto* r : searcher.results()) {
    if (passes_threshold(r->stats, options.effect_threshold)) out.push_back(*r);
    if (out.size() == k) break;
  }
  return out;
}

}  // namespace slicelens
