#pragma once

#include <cstddef>
#include <memory>
#include <vector>

#include <json.hpp>

#include "dataset.hpp"
#include "fdr.hpp"
#include "slice_record.hpp"
#include "stats.hpp"

namespace slicelens {

struct SearchOptions {
  double effect_threshold = 0.4;
  FdrMode fdr_mode = FdrMode::investing;
  double alpha = 0.05;
  std::size_t min_size = 2;
  /// Lattice depth cutoff; 0 means the number of features.
  std::size_t max_depth = 0;
  unsigned workers = 1;
  std::size_t min_leaf = 10;
  std::size_t tree_max_depth = 12;
};

/// Validates ranges shared by every search entry point.
void validate(const SearchOptions& options);

/// Level-synchronous top-down search. Each level is evaluated in full (in
/// parallel where the subclass supports it), then its effect-size-qualifying
/// candidates are significance-tested in ≺ order by a single consumer.
class Searcher {
 public:
  Searcher(std::shared_ptr<const Dataset> dataset, std::shared_ptr<const LossSummary> losses,
           SearchOptions options);
  virtual ~Searcher() = default;

  Searcher(const Searcher&) = delete;
  Searcher& operator=(const Searcher&) = delete;

  /// One unit of work: tests pending candidates of the current level until
  /// `rejections_wanted` more rejections, or evaluates the next level.
  /// Returns false once the search space is exhausted.
  bool step(std::size_t rejections_wanted);

  /// Steps until k rejected slices have phi >= the current threshold, or the
  /// space is exhausted.
  void run_until(std::size_t k);

  /// Affects candidates not yet tested, including the current level's.
  void set_effect_threshold(double threshold) { options_.effect_threshold = threshold; }
  double effect_threshold() const { return options_.effect_threshold; }

  /// Rejected slices in test order (which is ≺ order for a run with a fixed
  /// threshold).
  std::vector<const SliceRecord*> results() const;
  std::size_t count_results(double threshold) const;

  const std::vector<SliceRecord>& explored() const { return explored_; }
  const SliceRecord& record(SliceId id) const { return explored_.at(id); }
  std::size_t evaluations() const { return evaluations_; }
  bool exhausted() const { return exhausted_; }
  std::size_t depth() const { return depth_; }
  const SearchOptions& options() const { return options_; }
  const SignificanceGate& gate() const { return gate_; }
  const Dataset& dataset() const { return *dataset_; }

  nlohmann::json save_state() const;
  void restore_state(const nlohmann::json& state);

 protected:
  /// Replaces the current level with the next one. Returns false when no
  /// slice can be generated.
  virtual bool expand_next_level() = 0;
  virtual void on_rejected(const SliceRecord&) {}
  /// Recomputes per-level working state after restore_state.
  virtual void rebuild_level() = 0;

  SliceId add_record(std::vector<Literal> literals, const SliceStats& stats);

  std::shared_ptr<const Dataset> dataset_;
  std::shared_ptr<const LossSummary> losses_;
  SearchOptions options_;
  SignificanceGate gate_;
  std::vector<SliceRecord> explored_;
  std::vector<SliceId> level_ids_;
  std::vector<SliceId> results_;
  std::size_t evaluations_ = 0;
  std::size_t tests_ = 0;
  std::size_t depth_ = 0;
  bool started_ = false;
  bool exhausted_ = false;

 private:
  bool drain(std::size_t rejections_wanted);
};

nlohmann::json to_json(const SliceRecord& record);
SliceRecord record_from_json(const Dataset& dataset, const nlohmann::json& j);

}  // namespace slicelens
