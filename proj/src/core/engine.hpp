#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "baselines.hpp"
#include "dataset.hpp"
#include "searcher.hpp"
#include "stats.hpp"

namespace slicelens {

enum class Algorithm { lattice, tree, cluster };

std::string_view to_string(Algorithm algorithm);
std::optional<Algorithm> parse_algorithm(std::string_view text);

struct SessionConfig {
  Algorithm algorithm = Algorithm::lattice;
  SearchOptions search;
  double sample_fraction = 1.0;
  std::uint64_t seed = 0;
  ClusterOptions cluster;
};

void validate(const SessionConfig& config);

struct RankedSlice {
  SliceRecord record;
  std::string predicate;
  bool interpretable = true;  // false for clusters
};

struct QueryResult {
  std::vector<RankedSlice> slices;
  bool cache_only = false;
  /// k slices found, or nothing left to search.
  bool complete = false;
  bool exhausted = false;
  std::size_t evaluations = 0;
  std::size_t explored = 0;
  std::size_t tests = 0;
  std::size_t depth = 0;
};

struct ExampleRow {
  RowIndex row = 0;  // row number in the loaded table
  int label = 0;
  double score = 0.0;
  double loss = 0.0;
};

/// A search over one dataset that keeps every explored slice and its test
/// decision. Lowering T is answered from the cache; raising T, or asking for
/// more slices than the cache holds, resumes the search where it stopped.
///
/// One writer (search continuation) and any number of readers: readers see
/// the snapshot published after the last search step.
class SearchSession {
 public:
  SearchSession(std::shared_ptr<const Dataset> dataset, SessionConfig config);
  ~SearchSession();

  SearchSession(const SearchSession&) = delete;
  SearchSession& operator=(const SearchSession&) = delete;

  /// Full query: cache when the cache rule allows, otherwise search.
  QueryResult query(std::size_t k, double threshold);

  /// Answers from the cache if the cache rule applies (and records T as the
  /// latest query); nullopt means query() has to search.
  std::optional<QueryResult> try_cached(std::size_t k, double threshold);

  /// Current snapshot, never searches and never changes session state.
  QueryResult peek(std::size_t k, double threshold) const;

  bool needs_search(std::size_t k, double threshold) const;

  std::vector<ExampleRow> drill_down(SliceId id, std::size_t limit) const;
  /// Whether `id` names an explored slice (or cluster).
  bool has_slice(SliceId id) const;

  std::size_t evaluations() const;
  const Dataset& dataset() const { return *dataset_; }
  std::shared_ptr<const Dataset> dataset_ptr() const { return dataset_; }
  const SessionConfig& config() const { return config_; }

  nlohmann::json save() const;
  void save_file(const std::filesystem::path& path) const;
  /// `dataset` must be the same loaded (unsampled) dataset the session was
  /// created from.
  static std::unique_ptr<SearchSession> load(std::shared_ptr<const Dataset> dataset,
                                             const nlohmann::json& snapshot);
  static std::unique_ptr<SearchSession> load_file(std::shared_ptr<const Dataset> dataset,
                                                  const std::filesystem::path& path);

 private:
  struct Snapshot {
    std::vector<SliceRecord> results;  // rejected records, test order
    bool exhausted = false;
    std::size_t evaluations = 0;
    std::size_t explored = 0;
    std::size_t tests = 0;
    std::size_t depth = 0;
  };

  struct ClusterEntry {
    std::vector<RankedSlice> slices;
    std::vector<std::vector<RowIndex>> members;
  };

  void publish();
  QueryResult view(const Snapshot& snapshot, std::size_t k, double threshold) const;
  bool needs_search_locked(const Snapshot& snapshot, std::size_t k, double threshold) const;
  QueryResult query_clusters(std::size_t k, double threshold);
  std::shared_ptr<const Snapshot> snapshot() const;

  std::shared_ptr<const Dataset> source_;
  std::shared_ptr<const Dataset> dataset_;
  SessionConfig config_;
  std::shared_ptr<const LossSummary> losses_;
  std::unique_ptr<Searcher> searcher_;

  mutable std::mutex writer_;
  mutable std::mutex state_;
  std::shared_ptr<const Snapshot> snapshot_;
  std::optional<double> last_threshold_;
  std::map<std::size_t, ClusterEntry> clusters_;
  std::map<SliceId, std::pair<std::size_t, std::size_t>> cluster_ids_;
  std::size_t cluster_evaluations_ = 0;
};

/// One output record per slice; non-finite numbers are written as strings.
nlohmann::json slice_record_json(const Dataset& dataset, const RankedSlice& slice,
                                 std::size_t rank);

inline constexpr std::string_view kRecordSchema = "slicelens.slice.v1";

}  // namespace slicelens
