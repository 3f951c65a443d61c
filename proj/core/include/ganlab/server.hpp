#pragma once

#include <atomic>
#include <string>

#include "ganlab/provider.hpp"

namespace ganlab::server {

// Newline-delimited JSON over TCP, one document per line, UTF-8.
// Requests:  {"op":"query","n":N} | {"op":"codes","codes":[[..],..]} |
//            {"op":"real","fraction":f} | {"op":"dlogit","x":[a,b]}
// Responses: {"ok":true,"samples":[[x,y],..]} | {"ok":true,"logit":v} |
//            {"ok":false,"error":"quota"|"permission"|"bad_request"}
std::string handle_request_line(provider::Provider& p, const std::string& line);

struct ServerOptions {
  int port = 0;              // 0 = ephemeral
  std::atomic<bool>* stop = nullptr;
};

// Serves one connection at a time until *stop (or forever). Returns the
// bound port through `bound_port` before blocking on accept.
void serve(provider::Provider& p, const ServerOptions& options, int* bound_port = nullptr,
           std::atomic<bool>* ready = nullptr);

// Minimal line-oriented client for tests and tooling.
class LineClient {
 public:
  LineClient(const std::string& host, int port);
  ~LineClient();
  LineClient(const LineClient&) = delete;
  LineClient& operator=(const LineClient&) = delete;

  std::string request(const std::string& line);  // sends line, reads one line back

 private:
  int fd_ = -1;
  std::string buffer_;
};

}  // namespace ganlab::server
