#include "searcher.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace slicelens {

void validate(const SearchOptions& options) {
  require(options.effect_threshold > 0.0, ErrorCode::invalid_argument,
          "effect size threshold T must be > 0");
  require(options.alpha > 0.0 && options.alpha < 1.0, ErrorCode::invalid_argument,
          "alpha must be in (0, 1)");
  require(options.min_size >= 1, ErrorCode::invalid_argument, "min_size must be >= 1");
  require(options.min_leaf >= 1, ErrorCode::invalid_argument, "min_leaf must be >= 1");
}

Searcher::Searcher(std::shared_ptr<const Dataset> dataset,
                   std::shared_ptr<const LossSummary> losses, SearchOptions options)
    : dataset_(std::move(dataset)),
      losses_(std::move(losses)),
      options_(options),
      gate_(options.fdr_mode, options.alpha) {
  validate(options_);
  require(dataset_ && losses_, ErrorCode::invalid_argument, "searcher needs data");
  require(losses_->size() == dataset_->size(), ErrorCode::invalid_argument,
          "loss vector does not match dataset");
}

SliceId Searcher::add_record(std::vector<Literal> literals, const SliceStats& stats) {
  SliceRecord record;
  record.id = explored_.size();
  record.key = canonical_key(*dataset_, literals);
  record.literals = std::move(literals);
  record.stats = stats;
  record.depth = depth_;
  record.decision = stats.testable() ? Decision::untested : Decision::not_testable;
  explored_.push_back(std::move(record));
  ++evaluations_;
  return explored_.back().id;
}

bool Searcher::drain(std::size_t rejections_wanted) {
  std::vector<SliceId> candidates;
  for (auto id : level_ids_) {
    const auto& r = explored_[id];
    if (r.decision == Decision::untested && r.stats.testable() &&
        passes_threshold(r.stats, options_.effect_threshold)) {
      candidates.push_back(id);
    }
  }
  if (candidates.empty()) return false;
  std::sort(candidates.begin(), candidates.end(),
            [&](SliceId a, SliceId b) { return precedes(explored_[a], explored_[b]); });

  std::vector<double> p_values;
  p_values.reserve(candidates.size());
  for (auto id : candidates) p_values.push_back(explored_[id].stats.p_value);
  const auto decisions = gate_.decide(p_values, rejections_wanted);
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    auto& r = explored_[candidates[i]];
    r.decision = decisions[i].rejected ? Decision::rejected : Decision::accepted;
    r.alpha_spent = decisions[i].alpha_spent;
    r.test_index = tests_++;
    if (decisions[i].rejected) {
      results_.push_back(r.id);
      on_rejected(r);
    }
  }
  return true;
}

bool Searcher::step(std::size_t rejections_wanted) {
  if (exhausted_) return false;
  if (started_ && drain(std::max<std::size_t>(rejections_wanted, 1))) return true;
  started_ = true;
  if (!expand_next_level()) {
    exhausted_ = true;
    return false;
  }
  return true;
}

std::size_t Searcher::count_results(double threshold) const {
  return static_cast<std::size_t>(std::count_if(results_.begin(), results_.end(), [&](SliceId id) {
    return passes_threshold(explored_[id].stats, threshold);
  }));
}

void Searcher::run_until(std::size_t k) {
  while (true) {
    const auto have = count_results(options_.effect_threshold);
    if (have >= k) return;
    if (!step(k - have)) return;
  }
}

std::vector<const SliceRecord*> Searcher::results() const {
  std::vector<const SliceRecord*> out;
  out.reserve(results_.size());
  for (auto id : results_) out.push_back(&explored_[id]);
  return out;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

nlohmann::json number(double x) {
  if (std::isfinite(x)) return x;
  if (std::isnan(x)) return "nan";
  return x > 0 ? "inf" : "-inf";
}

double number_from(const nlohmann::json& j) {
  if (j.is_number()) return j.get<double>();
  const auto s = j.get<std::string>();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

nlohmann::json to_json(const SliceRecord& r) {
  nlohmann::json literals = nlohmann::json::array();
  for (const auto& l : r.literals) {
    literals.push_back({l.feature, static_cast<int>(l.op), l.value});
  }
  const auto& s = r.stats;
  return {{"id", r.id},
          {"literals", std::move(literals)},
          {"depth", r.depth},
          {"decision", to_string(r.decision)},
          {"alpha_spent", r.alpha_spent},
          {"test_index", r.test_index ? nlohmann::json(*r.test_index) : nlohmann::json()},
          {"stats",
           {{"size", s.size},
            {"mean", number(s.mean_loss)},
            {"var", number(s.var_loss)},
            {"counterpart_size", s.counterpart_size},
            {"counterpart_mean", number(s.counterpart_mean)},
            {"counterpart_var", number(s.counterpart_var)},
            {"effect_size", number(s.effect_size)},
            {"t", number(s.t_stat)},
            {"df", number(s.df)},
            {"p", number(s.p_value)},
            {"testability", static_cast<int>(s.testability)}}}};
}

SliceRecord record_from_json(const Dataset& dataset, const nlohmann::json& j) {
  SliceRecord r;
  r.id = j.at("id").get<SliceId>();
  for (const auto& l : j.at("literals")) {
    r.literals.push_back({l.at(0).get<FeatureIndex>(), static_cast<Op>(l.at(1).get<int>()),
                          l.at(2).get<ValueIndex>()});
  }
  for (const auto& l : r.literals) {
    require(l.feature < dataset.num_features() &&
                l.value < dataset.schema(l.feature).domain_size(),
            ErrorCode::validation, "snapshot literal does not fit the dataset");
  }
  r.key = canonical_key(dataset, r.literals);
  r.depth = j.at("depth").get<std::size_t>();
  const auto decision = parse_decision(j.at("decision").get<std::string>());
  require(decision.has_value(), ErrorCode::validation, "snapshot has an unknown decision");
  r.decision = *decision;
  r.alpha_spent = j.at("alpha_spent").get<double>();
  if (!j.at("test_index").is_null()) r.test_index = j.at("test_index").get<std::size_t>();
  const auto& s = j.at("stats");
  r.stats.size = s.at("size").get<std::size_t>();
  r.stats.mean_loss = number_from(s.at("mean"));
  r.stats.var_loss = number_from(s.at("var"));
  r.stats.counterpart_size = s.at("counterpart_size").get<std::size_t>();
  r.stats.counterpart_mean = number_from(s.at("counterpart_mean"));
  r.stats.counterpart_var = number_from(s.at("counterpart_var"));
  r.stats.effect_size = number_from(s.at("effect_size"));
  r.stats.t_stat = number_from(s.at("t"));
  r.stats.df = number_from(s.at("df"));
  r.stats.p_value = number_from(s.at("p"));
  r.stats.testability = static_cast<Testability>(s.at("testability").get<int>());
  return r;
}

nlohmann::json Searcher::save_state() const {
  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : explored_) records.push_back(to_json(r));
  nlohmann::json ledger = nlohmann::json::array();
  for (const auto& d : gate_.investing().decisions()) {
    ledger.push_back({d.p_value, d.alpha_spent, d.rejected});
  }
  return {{"explored", std::move(records)},
          {"level", level_ids_},
          {"results", results_},
          {"evaluations", evaluations_},
          {"tests", tests_},
          {"depth", depth_},
          {"started", started_},
          {"exhausted", exhausted_},
          {"effect_threshold", options_.effect_threshold},
          {"wealth", gate_.investing().wealth()},
          {"ledger", std::move(ledger)}};
}

void Searcher::restore_state(const nlohmann::json& state) {
  explored_.clear();
  for (const auto& r : state.at("explored")) explored_.push_back(record_from_json(*dataset_, r));
  for (std::size_t i = 0; i < explored_.size(); ++i) {
    require(explored_[i].id == i, ErrorCode::validation, "snapshot record ids are not dense");
  }
  level_ids_ = state.at("level").get<std::vector<SliceId>>();
  results_ = state.at("results").get<std::vector<SliceId>>();
  for (auto id : level_ids_) {
    require(id < explored_.size(), ErrorCode::validation, "snapshot level id out of range");
  }
  for (auto id : results_) {
    require(id < explored_.size(), ErrorCode::validation, "snapshot result id out of range");
  }
  evaluations_ = state.at("evaluations").get<std::size_t>();
  tests_ = state.at("tests").get<std::size_t>();
  depth_ = state.at("depth").get<std::size_t>();
  started_ = state.at("started").get<bool>();
  exhausted_ = state.at("exhausted").get<bool>();
  options_.effect_threshold = state.at("effect_threshold").get<double>();
  std::vector<TestDecision> ledger;
  for (const auto& d : state.at("ledger")) {
    ledger.push_back({d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<bool>()});
  }
  gate_.investing().restore(state.at("wealth").get<double>(), std::move(ledger));
  rebuild_level();
}

}  // namespace slicelens
