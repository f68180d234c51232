#include "engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "error.hpp"
#include "lattice_search.hpp"
#include "tree_search.hpp"

namespace slicelens {

namespace {

constexpr std::string_view kSnapshotFormat = "slicelens.session.v1";

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

std::unique_ptr<Searcher> make_searcher(Algorithm algorithm,
                                        std::shared_ptr<const Dataset> dataset,
                                        std::shared_ptr<const LossSummary> losses,
                                        const SearchOptions& options) {
  switch (algorithm) {
    case Algorithm::lattice:
      return std::make_unique<LatticeSearcher>(std::move(dataset), std::move(losses), options);
    case Algorithm::tree:
      return std::make_unique<TreeSearcher>(std::move(dataset), std::move(losses), options);
    case Algorithm::cluster:
      break;
  }
  return nullptr;
}

nlohmann::json feature_names(const Dataset& dataset) {
  auto names = nlohmann::json::array();
  for (const auto& s : dataset.schemas()) names.push_back(s.name);
  return names;
}

}  // namespace

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::lattice: return "lattice";
    case Algorithm::tree: return "tree";
    case Algorithm::cluster: return "cluster";
  }
  return "lattice";
}

std::optional<Algorithm> parse_algorithm(std::string_view text) {
  if (text == "lattice" || text == "ls") return Algorithm::lattice;
  if (text == "tree" || text == "dt") return Algorithm::tree;
  if (text == "cluster" || text == "cl") return Algorithm::cluster;
  return std::nullopt;
}

void validate(const SessionConfig& config) {
  validate(config.search);
  require(config.sample_fraction > 0.0 && config.sample_fraction <= 1.0,
          ErrorCode::invalid_argument, "sample fraction must be in (0, 1]");
}

SearchSession::SearchSession(std::shared_ptr<const Dataset> dataset, SessionConfig config)
    : source_(std::move(dataset)), config_(std::move(config)) {
  validate(config_);
  require(source_ != nullptr, ErrorCode::invalid_argument, "session needs a dataset");
  dataset_ = config_.sample_fraction < 1.0
                 ? std::make_shared<const Dataset>(
                       sample(*source_, config_.sample_fraction, config_.seed))
                 : source_;
  losses_ = std::make_shared<const LossSummary>(compute_losses(*dataset_).values);
  searcher_ = make_searcher(config_.algorithm, dataset_, losses_, config_.search);
  publish();
}

SearchSession::~SearchSession() = default;

void SearchSession::publish() {
  auto snap = std::make_shared<Snapshot>();
  if (searcher_) {
    for (const auto* r : searcher_->results()) snap->results.push_back(*r);
    snap->exhausted = searcher_->exhausted();
    snap->evaluations = searcher_->evaluations();
    snap->explored = searcher_->explored().size();
    snap->tests = searcher_->gate().investing().tests();
    snap->depth = searcher_->depth();
  } else {
    snap->evaluations = cluster_evaluations_;
    snap->explored = cluster_ids_.size();
  }
  std::lock_guard lock(state_);
  snapshot_ = std::move(snap);
}

std::shared_ptr<const SearchSession::Snapshot> SearchSession::snapshot() const {
  std::lock_guard lock(state_);
  return snapshot_;
}

QueryResult SearchSession::view(const Snapshot& snap, std::size_t k, double threshold) const {
  QueryResult out;
  out.exhausted = snap.exhausted;
  out.evaluations = snap.evaluations;
  out.explored = snap.explored;
  out.tests = snap.tests;
  out.depth = snap.depth;
  std::vector<const SliceRecord*> matching;
  for (const auto& r : snap.results) {
    if (passes_threshold(r.stats, threshold)) matching.push_back(&r);
  }
  std::sort(matching.begin(), matching.end(),
            [](const SliceRecord* a, const SliceRecord* b) { return precedes(*a, *b); });
  if (matching.size() > k) matching.resize(k);
  for (const auto* r : matching) {
    out.slices.push_back({*r, predicate_string(*dataset_, r->literals), true});
  }
  out.complete = out.slices.size() >= k || snap.exhausted;
  return out;
}

bool SearchSession::needs_search_locked(const Snapshot& snap, std::size_t k,
                                        double threshold) const {
  if (k == 0 || snap.exhausted) return false;
  if (last_threshold_ && threshold < *last_threshold_) return false;
  const auto have = static_cast<std::size_t>(
      std::count_if(snap.results.begin(), snap.results.end(),
                    [&](const SliceRecord& r) { return passes_threshold(r.stats, threshold); }));
  return have < k;
}

bool SearchSession::needs_search(std::size_t k, double threshold) const {
  std::lock_guard lock(state_);
  if (!searcher_) return k > 0 && !clusters_.contains(k);
  return needs_search_locked(*snapshot_, k, threshold);
}

std::optional<QueryResult> SearchSession::try_cached(std::size_t k, double threshold) {
  require(std::isfinite(threshold) && threshold > 0.0, ErrorCode::invalid_argument,
          "effect size threshold T must be > 0");
  if (!searcher_) {
    std::lock_guard lock(state_);
    if (k > 0 && !clusters_.contains(k)) return std::nullopt;
    QueryResult out;
    out.cache_only = true;
    out.complete = true;
    out.exhausted = true;
    out.evaluations = cluster_evaluations_;
    if (k > 0) {
      for (const auto& s : clusters_.at(k).slices) {
        if (std::isfinite(s.record.stats.effect_size) && s.record.stats.effect_size >= threshold) {
          out.slices.push_back(s);
        }
      }
    }
    return out;
  }
  std::lock_guard lock(state_);
  if (needs_search_locked(*snapshot_, k, threshold)) return std::nullopt;
  last_threshold_ = threshold;
  auto out = view(*snapshot_, k, threshold);
  out.cache_only = true;
  return out;
}

QueryResult SearchSession::peek(std::size_t k, double threshold) const {
  if (!searcher_) {
    std::lock_guard lock(state_);
    QueryResult out;
    out.cache_only = true;
    out.evaluations = cluster_evaluations_;
    auto it = clusters_.find(k);
    out.complete = k == 0 || it != clusters_.end();
    out.exhausted = out.complete;
    if (it != clusters_.end()) {
      for (const auto& s : it->second.slices) {
        if (std::isfinite(s.record.stats.effect_size) && s.record.stats.effect_size >= threshold) {
          out.slices.push_back(s);
        }
      }
    }
    return out;
  }
  auto out = view(*snapshot(), k, threshold);
  out.cache_only = true;
  return out;
}

QueryResult SearchSession::query_clusters(std::size_t k, double threshold) {
  std::lock_guard writer(writer_);
  if (auto cached = try_cached(k, threshold)) return *cached;
  const auto clusters =
      cluster_slices(*dataset_, *losses_, k, threshold, config_.seed, config_.cluster);
  ClusterEntry entry;
  {
    std::lock_guard lock(state_);
    for (std::size_t i = 0; i < clusters.size(); ++i) {
      RankedSlice s;
      s.record.id = cluster_ids_.size();
      s.record.stats = clusters[i].stats;
      s.record.decision = Decision::untested;
      s.predicate = "cluster " + std::to_string(i + 1) + "/" + std::to_string(clusters.size());
      s.interpretable = false;
      cluster_ids_[s.record.id] = {k, i};
      entry.slices.push_back(std::move(s));
      entry.members.push_back(clusters[i].members);
    }
    cluster_evaluations_ += clusters.size();
    clusters_[k] = std::move(entry);
  }
  publish();
  auto out = *try_cached(k, threshold);
  out.cache_only = false;
  return out;
}

QueryResult SearchSession::query(std::size_t k, double threshold) {
  if (auto cached = try_cached(k, threshold)) return *cached;
  if (!searcher_) return query_clusters(k, threshold);

  std::lock_guard writer(writer_);
  if (auto cached = try_cached(k, threshold)) return *cached;
  searcher_->set_effect_threshold(threshold);
  while (true) {
    const auto have = searcher_->count_results(threshold);
    if (have >= k) break;
    const bool progressed = searcher_->step(k - have);
    publish();
    if (!progressed) break;
  }
  publish();
  std::lock_guard lock(state_);
  last_threshold_ = threshold;
  return view(*snapshot_, k, threshold);
}

bool SearchSession::has_slice(SliceId id) const {
  {
    std::lock_guard lock(state_);
    if (!searcher_) return cluster_ids_.contains(id);
  }
  std::lock_guard writer(writer_);
  return id < searcher_->explored().size();
}

std::vector<ExampleRow> SearchSession::drill_down(SliceId id, std::size_t limit) const {
  std::vector<RowIndex> members;
  if (!searcher_) {
    std::lock_guard lock(state_);
    auto it = cluster_ids_.find(id);
    if (it == cluster_ids_.end()) fail(ErrorCode::not_found, "unknown slice id");
    members = clusters_.at(it->second.first).members.at(it->second.second);
  } else {
    std::vector<Literal> literals;
    bool found = false;
    for (const auto& r : snapshot()->results) {
      if (r.id == id) {
        literals = r.literals;
        found = true;
        break;
      }
    }
    if (!found) {
      std::lock_guard writer(writer_);
      if (id >= searcher_->explored().size()) fail(ErrorCode::not_found, "unknown slice id");
      literals = searcher_->record(id).literals;
    }
    members = conjunction_members(*dataset_, literals);
  }
  if (members.size() > limit) members.resize(limit);
  std::vector<ExampleRow> rows;
  rows.reserve(members.size());
  for (auto r : members) {
    rows.push_back({dataset_->source_row(r), dataset_->labels()[r], dataset_->scores()[r],
                    losses_->losses()[r]});
  }
  return rows;
}

std::size_t SearchSession::evaluations() const { return snapshot()->evaluations; }

nlohmann::json SearchSession::save() const {
  std::lock_guard writer(writer_);
  nlohmann::json j = {{"format", kSnapshotFormat},
                      {"algorithm", to_string(config_.algorithm)},
                      {"effect_threshold", config_.search.effect_threshold},
                      {"fdr_mode", to_string(config_.search.fdr_mode)},
                      {"alpha", config_.search.alpha},
                      {"min_size", config_.search.min_size},
                      {"max_depth", config_.search.max_depth},
                      {"min_leaf", config_.search.min_leaf},
                      {"tree_max_depth", config_.search.tree_max_depth},
                      {"sample_fraction", config_.sample_fraction},
                      {"seed", config_.seed},
                      {"rows", source_->size()},
                      {"features", feature_names(*source_)}};
  {
    std::lock_guard lock(state_);
    j["last_threshold"] = last_threshold_ ? nlohmann::json(*last_threshold_) : nlohmann::json();
    auto ks = nlohmann::json::array();
    for (const auto& [k, entry] : clusters_) ks.push_back(k);
    j["cluster_queries"] = std::move(ks);
  }
  if (searcher_) j["search"] = searcher_->save_state();
  return j;
}

void SearchSession::save_file(const std::filesystem::path& path) const {
  const auto j = save();
  std::ofstream out(path);
  if (!out) fail(ErrorCode::io, "cannot write snapshot '" + path.string() + "'");
  out << j.dump() << '\n';
  if (!out) fail(ErrorCode::io, "cannot write snapshot '" + path.string() + "'");
}

std::unique_ptr<SearchSession> SearchSession::load(std::shared_ptr<const Dataset> dataset,
                                                   const nlohmann::json& j) {
  require(dataset != nullptr, ErrorCode::invalid_argument, "session needs a dataset");
  try {
    require(j.at("format").get<std::string>() == kSnapshotFormat, ErrorCode::validation,
            "not a session snapshot");
    require(j.at("rows").get<std::size_t>() == dataset->size() &&
                j.at("features") == feature_names(*dataset),
            ErrorCode::validation, "snapshot was taken on a different dataset");
    SessionConfig config;
    const auto algorithm = parse_algorithm(j.at("algorithm").get<std::string>());
    const auto mode = parse_fdr_mode(j.at("fdr_mode").get<std::string>());
    require(algorithm && mode, ErrorCode::validation, "snapshot has unknown settings");
    config.algorithm = *algorithm;
    config.search.fdr_mode = *mode;
    config.search.effect_threshold = j.at("effect_threshold").get<double>();
    config.search.alpha = j.at("alpha").get<double>();
    config.search.min_size = j.at("min_size").get<std::size_t>();
    config.search.max_depth = j.at("max_depth").get<std::size_t>();
    config.search.min_leaf = j.at("min_leaf").get<std::size_t>();
    config.search.tree_max_depth = j.at("tree_max_depth").get<std::size_t>();
    config.sample_fraction = j.at("sample_fraction").get<double>();
    config.seed = j.at("seed").get<std::uint64_t>();
    auto session = std::make_unique<SearchSession>(std::move(dataset), config);
    if (!j.at("last_threshold").is_null()) {
      session->last_threshold_ = j.at("last_threshold").get<double>();
    }
    if (session->searcher_) {
      session->searcher_->restore_state(j.at("search"));
      session->publish();
    } else {
      const double t = session->config_.search.effect_threshold;
      for (const auto& k : j.at("cluster_queries")) session->query(k.get<std::size_t>(), t);
    }
    return session;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::validation, std::string("malformed session snapshot: ") + e.what());
  }
}

std::unique_ptr<SearchSession> SearchSession::load_file(std::shared_ptr<const Dataset> dataset,
                                                        const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::io, "cannot read snapshot '" + path.string() + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::validation, std::string("malformed session snapshot: ") + e.what());
  }
  return load(std::move(dataset), j);
}

nlohmann::json slice_record_json(const Dataset& dataset, const RankedSlice& slice,
                                 std::size_t rank) {
  const auto& r = slice.record;
  const auto& s = r.stats;
  auto predicate = nlohmann::json::array();
  for (const auto& l : r.literals) {
    const auto& schema = dataset.schema(l.feature);
    predicate.push_back({{"feature", schema.name},
                         {"op", op_symbol(l.op)},
                         {"value", schema.values.at(l.value)}});
  }
  return {{"schema", kRecordSchema},
          {"rank", rank},
          {"id", r.id},
          {"predicate", std::move(predicate)},
          {"predicate_text", slice.predicate},
          {"interpretable", slice.interpretable},
          {"num_literals", r.num_literals()},
          {"size", s.size},
          {"mean_loss", number(s.mean_loss)},
          {"counterpart_loss", number(s.counterpart_mean)},
          {"effect_size", number(s.effect_size)},
          {"t", number(s.t_stat)},
          {"df", number(s.df)},
          {"p", number(s.p_value)},
          {"alpha_spent", number(r.alpha_spent)},
          {"decision", to_string(r.decision)}};
}

}  // namespace slicelens
