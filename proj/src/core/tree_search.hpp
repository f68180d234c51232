#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "searcher.hpp"

namespace slicelens {

/// Misclassified indicator used as the tree target. Probability scores:
/// (score >= 0.5) != label. Loss scores: loss above the dataset mean.
std::vector<std::uint8_t> tree_target(const Dataset& dataset);

double gini(std::size_t positives, std::size_t total);

struct Split {
  Literal left;
  Literal right;
  std::size_t left_size = 0;
  std::size_t right_size = 0;
  double impurity = 0.0;  // weighted Gini of the children
};

/// Best binary split of `members` (sorted rows). Categorical features split
/// as F=v / F≠v, numeric features as F≤b / F>b on bin boundaries. Ties go to
/// the split whose left literal string is smallest.
std::optional<Split> best_split(const Dataset& dataset, std::span<const RowIndex> members,
                                std::span<const std::uint8_t> target, std::size_t min_leaf);

/// Level-wise CART growth; each level's new children are the candidate
/// slices for that level.
class TreeSearcher final : public Searcher {
 public:
  TreeSearcher(std::shared_ptr<const Dataset> dataset, std::shared_ptr<const LossSummary> losses,
               SearchOptions options);

 protected:
  bool expand_next_level() override;
  void rebuild_level() override;

 private:
  std::vector<std::uint8_t> target_;
  std::vector<std::vector<RowIndex>> level_members_;
};

std::vector<SliceRecord> tree_search(std::shared_ptr<const Dataset> dataset,
                                     std::shared_ptr<const LossSummary> losses, std::size_t k,
                                     const SearchOptions& options);

}  // namespace slicelens
