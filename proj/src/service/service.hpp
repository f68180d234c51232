#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "dataset.hpp"
#include "engine.hpp"

namespace httplib {
class Server;
}

namespace slicelens::service {

struct ServiceOptions {
  /// Longest a request waits on a search before answering with partial
  /// results and status "searching".
  std::chrono::milliseconds wait_budget{2000};
  std::chrono::seconds session_ttl{1800};
  std::string cors_origin = "*";
  std::size_t default_k = 10;
  double default_threshold = 0.4;
  /// Whether POST /v1/datasets may name a server-side file.
  bool allow_paths = true;
  std::size_t max_body_bytes = 256u << 20;
};

class ApiSession;

/// HTTP/JSON facade over SearchSession.
///
///   POST   /v1/datasets                          -> 201 {dataset_id, report}
///   POST   /v1/sessions                          -> 202 {session_id}
///   GET    /v1/sessions/{id}                     -> session status
///   DELETE /v1/sessions/{id}
///   GET    /v1/sessions/{id}/slices?k=&min_effect_size=
///   GET    /v1/sessions/{id}/slices/{slice}/examples?limit=
class Service {
 public:
  explicit Service(ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Blocking; returns when stop() is called or binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to a free port and returns it (or -1); then call
  /// listen_after_bind() from the serving thread.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

  /// Drops sessions idle for longer than the TTL.
  std::size_t reap_expired();
  std::size_t session_count() const;

 private:
  struct DatasetEntry;

  void install_routes();
  std::shared_ptr<ApiSession> find_session(const std::string& id);
  std::shared_ptr<DatasetEntry> find_dataset(const std::string& id);

  ServiceOptions options_;
  std::unique_ptr<httplib::Server> server_;

  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<DatasetEntry>> datasets_;
  std::map<std::string, std::shared_ptr<ApiSession>> sessions_;

  std::mutex reaper_mutex_;
  std::condition_variable reaper_cv_;
  bool stopping_ = false;
  std::thread reaper_;
};

/// 128-bit random hex token.
std::string new_token();

}  // namespace slicelens::service
