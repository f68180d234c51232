// HTTP service for interactive slice exploration.
#include <csignal>
#include <iostream>

#include <CLI11.hpp>

#include "service.hpp"

namespace {
slicelens::service::Service* running = nullptr;
void on_signal(int) {
  if (running) running->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"slicelens HTTP service"};
  std::string host = "127.0.0.1";
  int port = 8765;
  long wait_ms = 2000;
  long ttl_s = 1800;
  slicelens::service::ServiceOptions options;
  bool no_paths = false;
  app.add_option("--host", host)->envname("SLICELENS_HOST");
  app.add_option("--port", port)->check(CLI::Range(0, 65535))->envname("SLICELENS_PORT");
  app.add_option("--wait-budget-ms", wait_ms, "longest a request waits on a search")
      ->check(CLI::NonNegativeNumber);
  app.add_option("--session-ttl", ttl_s, "idle seconds before a session is dropped")
      ->check(CLI::PositiveNumber);
  app.add_option("--cors-origin", options.cors_origin);
  app.add_flag("--no-server-paths", no_paths, "reject datasets named by server-side path");
  CLI11_PARSE(app, argc, argv);

  options.wait_budget = std::chrono::milliseconds(wait_ms);
  options.session_ttl = std::chrono::seconds(ttl_s);
  options.allow_paths = !no_paths;
  slicelens::service::Service service(options);
  running = &service;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "listening on " << host << ":" << port << '\n';
  if (!service.listen(host, port)) {
    std::cerr << "cannot listen on " << host << ":" << port << '\n';
    return 1;
  }
  return 0;
}
