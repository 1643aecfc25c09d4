#pragma once

#include <memory>
#include <string>

#include "lmprobe/scorer.hpp"

namespace lmprobe {

struct WireServerOptions {
  bool enable_batch = true;  // expose /v1/masked_logprob_batch
};

// Serves a Scorer over the scoring wire protocol (see docs/formats.md).
// Responses always declare natural log base.  Used by the `serve` subcommand
// and by tests that exercise the HTTP client against a real socket.
class WireServer {
 public:
  explicit WireServer(Scorer& scorer, WireServerOptions options = {});
  ~WireServer();

  WireServer(const WireServer&) = delete;
  WireServer& operator=(const WireServer&) = delete;

  // Bind an OS-assigned port, serve on a background thread, return the port.
  int start_on_any_port(const std::string& host = "127.0.0.1");

  // Serve on the calling thread until stop() (for the CLI).
  void serve_blocking(const std::string& host, int port);

  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace lmprobe
