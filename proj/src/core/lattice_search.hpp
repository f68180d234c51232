#pragma once

#include <memory>
#include <vector>

#include "searcher.hpp"

namespace slicelens {

/// One lattice expansion step: every slice formed by adding one equality
/// literal over an unused, non-degenerate feature to a base slice,
/// deduplicated, with supersets of problematic literal sets and empty slices
/// removed. Output is in generation order (base order, then feature, then
/// value).
std::vector<Slice> expand_slices(const Dataset& dataset, std::span<const Slice> base,
                                 std::span<const std::vector<Literal>> problematic);

/// Breadth-first lattice search over equality-literal slices.
class LatticeSearcher final : public Searcher {
 public:
  LatticeSearcher(std::shared_ptr<const Dataset> dataset,
                  std::shared_ptr<const LossSummary> losses, SearchOptions options);

 protected:
  bool expand_next_level() override;
  void on_rejected(const SliceRecord& record) override;
  void rebuild_level() override;

 private:
  std::size_t depth_limit() const;

  // members of level_ids_, index-aligned; empty vectors for rejected entries
  std::vector<std::vector<RowIndex>> level_members_;
  std::vector<std::vector<Literal>> problematic_;
};

/// Runs a lattice search to completion for (k, T) and returns the ≺-sorted
/// problematic slices.
std::vector<SliceRecord> lattice_search(std::shared_ptr<const Dataset> dataset,
                                        std::shared_ptr<const LossSummary> losses,
                                        std::size_t k, const SearchOptions& options);

}  // namespace slicelens
