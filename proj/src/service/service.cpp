#include "service.hpp"

#include <charconv>
#include <cmath>
#include <deque>
#include <future>
#include <random>
#include <sstream>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"
#include "parallel.hpp"

namespace slicelens::service {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string new_token() {
  static thread_local std::random_device device;
  std::ostringstream os;
  os << std::hex;
  for (int i = 0; i < 4; ++i) {
    const std::uint32_t word = device();
    os.width(8);
    os.fill('0');
    os << word;
  }
  return os.str();
}

/// A SearchSession plus the single background worker that runs its search
/// continuations, one (k, T) request at a time.
class ApiSession {
 public:
  ApiSession(std::string dataset_id, std::unique_ptr<SearchSession> session)
      : dataset_id_(std::move(dataset_id)),
        session_(std::move(session)),
        last_access_(Clock::now()),
        worker_([this] { work(); }) {}

  ~ApiSession() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
  }

  std::shared_future<QueryResult> submit(std::size_t k, double threshold) {
    std::lock_guard lock(mutex_);
    const auto key = std::make_pair(k, threshold);
    if (auto it = inflight_.find(key); it != inflight_.end()) return it->second;
    auto job = std::make_shared<Job>();
    job->k = k;
    job->threshold = threshold;
    auto future = job->promise.get_future().share();
    inflight_[key] = future;
    queue_.push_back(std::move(job));
    cv_.notify_all();
    return future;
  }

  bool busy() const {
    std::lock_guard lock(mutex_);
    return !inflight_.empty();
  }

  SearchSession& session() { return *session_; }
  const std::string& dataset_id() const { return dataset_id_; }

  void touch() {
    std::lock_guard lock(mutex_);
    last_access_ = Clock::now();
  }

  Clock::time_point last_access() const {
    std::lock_guard lock(mutex_);
    return last_access_;
  }

 private:
  struct Job {
    std::size_t k = 0;
    double threshold = 0.0;
    std::promise<QueryResult> promise;
  };

  void work() {
    while (true) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_) return;
        job = std::move(queue_.front());
        queue_.pop_front();
      }
      try {
        job->promise.set_value(session_->query(job->k, job->threshold));
      } catch (...) {
        job->promise.set_exception(std::current_exception());
      }
      std::lock_guard lock(mutex_);
      inflight_.erase(std::make_pair(job->k, job->threshold));
    }
  }

  std::string dataset_id_;
  std::unique_ptr<SearchSession> session_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::shared_ptr<Job>> queue_;
  std::map<std::pair<std::size_t, double>, std::shared_future<QueryResult>> inflight_;
  Clock::time_point last_access_;
  bool stopping_ = false;
  std::thread worker_;
};

struct Service::DatasetEntry {
  Table table;
  LoadOptions options;
  std::shared_ptr<const Dataset> dataset;
  IngestionReport report;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

class BadRequest : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
T parse_number(const std::string& text, const char* what) {
  T value{};
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw BadRequest(std::string("bad value for '") + what + "'");
  }
  return value;
}

template <typename T>
T query_param(const httplib::Request& req, const char* key, T fallback) {
  if (!req.has_param(key)) return fallback;
  return parse_number<T>(req.get_param_value(key), key);
}

template <typename T>
T body_field(const json& body, const char* key, T fallback) {
  if (!body.contains(key) || body.at(key).is_null()) return fallback;
  try {
    return body.at(key).get<T>();
  } catch (const json::exception&) {
    throw BadRequest(std::string("bad value for '") + key + "'");
  }
}

char delimiter_from(const std::string& d) {
  if (d.empty() || d == ",") return ',';
  if (d == "tab" || d == "\t" || d == "\\t") return '\t';
  if (d.size() == 1) return d[0];
  throw BadRequest("bad delimiter '" + d + "'");
}

ScoreKind score_kind_from(const std::string& s) {
  if (s.empty() || s == "probability") return ScoreKind::probability;
  if (s == "loss") return ScoreKind::loss;
  throw BadRequest("score_kind must be 'probability' or 'loss'");
}

json progress_json(const QueryResult& r) {
  return {{"evaluations", r.evaluations},
          {"explored", r.explored},
          {"tests", r.tests},
          {"depth", r.depth},
          {"exhausted", r.exhausted},
          {"token", std::to_string(r.explored) + "." + std::to_string(r.tests)}};
}

json slices_json(const Dataset& dataset, const QueryResult& r) {
  auto slices = json::array();
  for (std::size_t i = 0; i < r.slices.size(); ++i) {
    auto j = slice_record_json(dataset, r.slices[i], i + 1);
    j["metric"] = j["mean_loss"];
    slices.push_back(std::move(j));
  }
  return slices;
}

}  // namespace

Service::Service(ServiceOptions options)
    : options_(std::move(options)), server_(std::make_unique<httplib::Server>()) {
  install_routes();
  reaper_ = std::thread([this] {
    const auto period = std::max<std::chrono::milliseconds>(
        std::chrono::milliseconds(100),
        std::min<std::chrono::milliseconds>(std::chrono::seconds(5), options_.session_ttl / 4));
    std::unique_lock lock(reaper_mutex_);
    while (!stopping_) {
      reaper_cv_.wait_for(lock, period);
      if (stopping_) break;
      lock.unlock();
      reap_expired();
      lock.lock();
    }
  });
}

Service::~Service() {
  stop();
  {
    std::lock_guard lock(reaper_mutex_);
    stopping_ = true;
  }
  reaper_cv_.notify_all();
  reaper_.join();
  std::map<std::string, std::shared_ptr<ApiSession>> doomed;
  {
    std::lock_guard lock(mutex_);
    doomed.swap(sessions_);
  }
}

bool Service::listen(const std::string& host, int port) { return server_->listen(host, port); }

int Service::bind_to_any_port(const std::string& host) {
  return server_->bind_to_any_port(host);
}

bool Service::listen_after_bind() { return server_->listen_after_bind(); }

void Service::wait_until_ready() const { server_->wait_until_ready(); }

void Service::stop() { server_->stop(); }

std::size_t Service::session_count() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

std::size_t Service::reap_expired() {
  const auto now = Clock::now();
  std::vector<std::shared_ptr<ApiSession>> doomed;
  {
    std::lock_guard lock(mutex_);
    for (auto it = sessions_.begin(); it != sessions_.end();) {
      if (now - it->second->last_access() > options_.session_ttl) {
        doomed.push_back(std::move(it->second));
        it = sessions_.erase(it);
      } else {
        ++it;
      }
    }
  }
  return doomed.size();  // sessions are torn down here, outside the lock
}

std::shared_ptr<ApiSession> Service::find_session(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) return nullptr;
  it->second->touch();
  return it->second;
}

std::shared_ptr<Service::DatasetEntry> Service::find_dataset(const std::string& id) {
  std::lock_guard lock(mutex_);
  auto it = datasets_.find(id);
  return it == datasets_.end() ? nullptr : it->second;
}

void Service::install_routes() {
  auto& s = *server_;
  s.set_payload_max_length(options_.max_body_bytes);
  s.set_default_headers({{"Access-Control-Allow-Origin", options_.cors_origin},
                         {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                         {"Access-Control-Allow-Headers", "Content-Type"},
                         {"Access-Control-Expose-Headers", "X-Cache-Only"}});
  s.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  s.set_exception_handler([](const httplib::Request&, httplib::Response& res,
                             std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const BadRequest& e) {
      reply_error(res, 400, e.what());
    } catch (const LoadError& e) {
      reply(res, 400, {{"error", e.what()}, {"report", e.report().to_json()}});
    } catch (const Error& e) {
      switch (e.code()) {
        case ErrorCode::not_found: reply_error(res, 404, e.what()); break;
        case ErrorCode::state: reply_error(res, 409, e.what()); break;
        default: reply_error(res, 400, e.what());
      }
    } catch (const std::exception& e) {
      reply_error(res, 500, e.what());
    } catch (...) {
      reply_error(res, 500, "internal error");
    }
  });

  s.Get("/v1/health", [](const httplib::Request&, httplib::Response& res) {
    reply(res, 200, {{"status", "ok"}});
  });

  s.Post("/v1/datasets", [this](const httplib::Request& req, httplib::Response& res) {
    auto entry = std::make_shared<DatasetEntry>();
    const bool is_json = req.get_header_value("Content-Type").starts_with("application/json");
    json body = json::object();
    if (is_json) {
      try {
        body = json::parse(req.body);
      } catch (const json::exception&) {
        throw BadRequest("body is not valid JSON");
      }
      if (!body.is_object()) throw BadRequest("body must be a JSON object");
    } else {
      for (const auto& [key, value] : req.params) body[key] = value;
    }
    const auto field = [&](const char* key, const std::string& fallback) {
      return body_field<std::string>(body, key, fallback);
    };
    const auto int_field = [&](const char* key, int fallback) {
      if (!is_json && body.contains(key)) {
        return parse_number<int>(body.at(key).get<std::string>(), key);
      }
      return body_field<int>(body, key, fallback);
    };
    entry->options.label_column = field("label_column", "label");
    entry->options.score_column = field("score_column", "score");
    entry->options.score_kind = score_kind_from(field("score_kind", ""));
    entry->options.schema.num_bins = int_field("bins", 10);
    entry->options.schema.top_values = int_field("top_values", 50);
    if (entry->options.schema.num_bins < 2) throw BadRequest("bins must be >= 2");
    if (entry->options.schema.top_values < 1) throw BadRequest("top_values must be >= 1");
    const char delimiter = delimiter_from(field("delimiter", ","));

    if (!is_json) {
      entry->table = parse_table(req.body, delimiter);
    } else if (body.contains("csv")) {
      entry->table = parse_table(field("csv", ""), delimiter);
    } else if (body.contains("path")) {
      if (!options_.allow_paths) throw BadRequest("server-side paths are disabled");
      entry->table = read_table_file(field("path", ""), delimiter);
    } else {
      throw BadRequest("expected 'csv' or 'path'");
    }
    auto loaded = load(entry->table, entry->options);
    entry->dataset = std::move(loaded.dataset);
    entry->report = std::move(loaded.report);
    const auto id = new_token();
    {
      std::lock_guard lock(mutex_);
      datasets_[id] = entry;
    }
    reply(res, 201, {{"dataset_id", id}, {"report", entry->report.to_json()}});
  });

  s.Post("/v1/sessions", [this](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::exception&) {
      throw BadRequest("body is not valid JSON");
    }
    if (!body.is_object()) throw BadRequest("body must be a JSON object");
    const auto dataset_id = body_field<std::string>(body, "dataset_id", "");
    if (dataset_id.empty()) throw BadRequest("missing 'dataset_id'");
    auto entry = find_dataset(dataset_id);
    if (!entry) {
      reply_error(res, 404, "unknown dataset");
      return;
    }

    SessionConfig config;
    const auto algorithm = parse_algorithm(body_field<std::string>(body, "algorithm", "lattice"));
    if (!algorithm) throw BadRequest("unknown algorithm");
    config.algorithm = *algorithm;
    const auto mode = parse_fdr_mode(body_field<std::string>(body, "fdr_mode", "investing"));
    if (!mode) throw BadRequest("unknown fdr_mode");
    config.search.fdr_mode = *mode;
    config.search.alpha = body_field<double>(body, "alpha", 0.05);
    if (!(config.search.alpha > 0.0 && config.search.alpha < 1.0)) {
      throw BadRequest("alpha must be in (0, 1)");
    }
    config.search.effect_threshold =
        body_field<double>(body, "min_effect_size", options_.default_threshold);
    config.search.min_size = body_field<std::size_t>(body, "min_size", 2);
    config.search.max_depth = body_field<std::size_t>(body, "max_depth", 0);
    config.search.min_leaf = body_field<std::size_t>(body, "min_leaf", 10);
    config.search.tree_max_depth = body_field<std::size_t>(body, "tree_max_depth", 12);
    config.sample_fraction = body_field<double>(body, "sample_fraction", 1.0);
    config.seed = body_field<std::uint64_t>(body, "seed", 0);
    const auto workers = body_field<unsigned>(body, "workers", 0);
    config.search.workers = workers == 0 ? default_workers() : workers;
    config.cluster.workers = config.search.workers;
    validate(config);

    auto dataset = entry->dataset;
    const int bins = body_field<int>(body, "bins", entry->options.schema.num_bins);
    const int top = body_field<int>(body, "N", body_field<int>(body, "top_values",
                                                               entry->options.schema.top_values));
    if (bins != entry->options.schema.num_bins || top != entry->options.schema.top_values) {
      if (bins < 2) throw BadRequest("bins must be >= 2");
      if (top < 1) throw BadRequest("N must be >= 1");
      auto options = entry->options;
      options.schema.num_bins = bins;
      options.schema.top_values = top;
      dataset = load(entry->table, options).dataset;
    }
    const auto k = body_field<std::size_t>(body, "k", options_.default_k);

    auto session = std::make_shared<ApiSession>(
        dataset_id, std::make_unique<SearchSession>(dataset, config));
    const auto id = new_token();
    {
      std::lock_guard lock(mutex_);
      sessions_[id] = session;
    }
    if (k > 0) session->submit(k, config.search.effect_threshold);
    reply(res, 202, {{"session_id", id}, {"dataset_id", dataset_id}, {"status", "searching"}});
  });

  s.Get(R"(/v1/sessions/([0-9a-f]+))", [this](const httplib::Request& req,
                                             httplib::Response& res) {
    auto session = find_session(req.matches[1]);
    if (!session) {
      reply_error(res, 404, "unknown or expired session");
      return;
    }
    auto& ss = session->session();
    const auto snapshot = ss.peek(0, ss.config().search.effect_threshold);
    reply(res, 200,
          {{"session_id", std::string(req.matches[1])},
           {"dataset_id", session->dataset_id()},
           {"algorithm", to_string(ss.config().algorithm)},
           {"rows", ss.dataset().size()},
           {"searching", session->busy()},
           {"progress", progress_json(snapshot)}});
  });

  s.Delete(R"(/v1/sessions/([0-9a-f]+))", [this](const httplib::Request& req,
                                                httplib::Response& res) {
    std::shared_ptr<ApiSession> doomed;
    {
      std::lock_guard lock(mutex_);
      auto it = sessions_.find(req.matches[1]);
      if (it != sessions_.end()) {
        doomed = std::move(it->second);
        sessions_.erase(it);
      }
    }
    if (!doomed) {
      reply_error(res, 404, "unknown or expired session");
      return;
    }
    res.status = 204;
  });

  s.Get(R"(/v1/sessions/([0-9a-f]+)/slices)", [this](const httplib::Request& req,
                                                    httplib::Response& res) {
    auto session = find_session(req.matches[1]);
    if (!session) {
      reply_error(res, 404, "unknown or expired session");
      return;
    }
    auto& ss = session->session();
    const auto k = query_param<std::size_t>(req, "k", options_.default_k);
    const auto threshold =
        query_param<double>(req, "min_effect_size", ss.config().search.effect_threshold);
    if (!(std::isfinite(threshold) && threshold > 0.0)) {
      throw BadRequest("min_effect_size must be > 0");
    }
    auto budget = options_.wait_budget;
    if (req.has_param("wait_ms")) {
      budget = std::min(budget, std::chrono::milliseconds(
                                    query_param<std::uint64_t>(req, "wait_ms", 0)));
    }

    QueryResult result;
    std::string status = "complete";
    if (k == 0) {
      result = ss.peek(0, threshold);
      result.slices.clear();
      result.cache_only = true;
    } else if (auto cached = ss.try_cached(k, threshold)) {
      result = std::move(*cached);
    } else {
      auto future = session->submit(k, threshold);
      if (future.wait_for(budget) == std::future_status::ready) {
        result = future.get();
      } else {
        result = ss.peek(k, threshold);
        result.cache_only = false;
        status = "searching";
      }
    }
    res.set_header("X-Cache-Only", result.cache_only ? "true" : "false");
    reply(res, 200,
          {{"status", status},
           {"k", k},
           {"min_effect_size", threshold},
           {"cache_only", result.cache_only},
           {"slices", slices_json(ss.dataset(), result)},
           {"progress", progress_json(result)}});
  });

  s.Get(R"(/v1/sessions/([0-9a-f]+)/slices/([0-9]+)/examples)",
        [this](const httplib::Request& req, httplib::Response& res) {
          auto session = find_session(req.matches[1]);
          if (!session) {
            reply_error(res, 404, "unknown or expired session");
            return;
          }
          const auto slice_id = parse_number<std::uint64_t>(req.matches[2], "slice_id");
          const auto limit = query_param<std::size_t>(req, "limit", 100);
          auto& ss = session->session();
          if (!ss.has_slice(slice_id)) {
            reply_error(res, 404, "unknown slice");
            return;
          }
          auto rows = json::array();
          for (const auto& r : ss.drill_down(slice_id, limit)) {
            rows.push_back(
                {{"row", r.row}, {"label", r.label}, {"score", r.score}, {"loss", r.loss}});
          }
          reply(res, 200, {{"slice_id", slice_id}, {"limit", limit}, {"rows", std::move(rows)}});
        });
}

}  // namespace slicelens::service
