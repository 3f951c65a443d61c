#include "ganlab/server.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <json.hpp>

namespace ganlab::server {

using nlohmann::json;

namespace {

json batch_response(const worlds::SampleBatch& batch) {
  json samples = json::array();
  for (long r = 0; r < batch.points.rows(); ++r)
    samples.push_back({batch.points(r, 0), batch.points(r, 1)});
  json j;
  j["ok"] = true;
  j["samples"] = std::move(samples);
  return j;
}

json error_response(const std::string& code) {
  json j;
  j["ok"] = false;
  j["error"] = code;
  return j;
}

}  // namespace

std::string handle_request_line(provider::Provider& p, const std::string& line) {
  json req;
  try {
    req = json::parse(line);
  } catch (const json::exception&) {
    return error_response("bad_request").dump();
  }
  try {
    const std::string op = req.at("op").get<std::string>();
    if (op == "query") {
      const long n = req.at("n").get<long>();
      if (n < 0) return error_response("bad_request").dump();
      return batch_response(p.query(n)).dump();
    }
    if (op == "codes") {
      const json& jc = req.at("codes");
      if (!jc.is_array()) return error_response("bad_request").dump();
      Mat codes(static_cast<long>(jc.size()), p.latent_dim());
      long r = 0;
      for (const json& row : jc) {
        if (!row.is_array() || static_cast<int>(row.size()) != p.latent_dim())
          return error_response("bad_request").dump();
        for (int c = 0; c < p.latent_dim(); ++c) codes(r, c) = row[c].get<double>();
        ++r;
      }
      return batch_response(p.query_with_codes(codes)).dump();
    }
    if (op == "real") {
      const double fraction = req.at("fraction").get<double>();
      return batch_response(p.real_data(fraction)).dump();
    }
    if (op == "dlogit") {
      const json& jx = req.at("x");
      if (!jx.is_array() || jx.size() != 2) return error_response("bad_request").dump();
      json j;
      j["ok"] = true;
      j["logit"] = p.discriminator_logit(
          Vector2d(jx[0].get<double>(), jx[1].get<double>()));
      return j.dump();
    }
    return error_response("bad_request").dump();
  } catch (const QuotaError&) {
    return error_response("quota").dump();
  } catch (const PermissionError&) {
    return error_response("permission").dump();
  } catch (const json::exception&) {
    return error_response("bad_request").dump();
  } catch (const std::exception&) {
    return error_response("bad_request").dump();
  }
}

namespace {

bool stop_requested(const ServerOptions& o) { return o.stop && o.stop->load(); }

void serve_connection(provider::Provider& p, int fd, const ServerOptions& options) {
  std::string buffer;
  char chunk[4096];
  while (!stop_requested(options)) {
    pollfd pfd{fd, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc < 0) break;
    if (rc == 0) continue;
    const ssize_t got = ::recv(fd, chunk, sizeof(chunk), 0);
    if (got <= 0) break;
    buffer.append(chunk, static_cast<std::size_t>(got));
    std::size_t pos;
    while ((pos = buffer.find('\n')) != std::string::npos) {
      const std::string line = buffer.substr(0, pos);
      buffer.erase(0, pos + 1);
      if (line.empty()) continue;
      const std::string response = handle_request_line(p, line) + "\n";
      std::size_t sent = 0;
      while (sent < response.size()) {
        const ssize_t w = ::send(fd, response.data() + sent, response.size() - sent, 0);
        if (w <= 0) return;
        sent += static_cast<std::size_t>(w);
      }
    }
  }
}

}  // namespace

void serve(provider::Provider& p, const ServerOptions& options, int* bound_port,
           std::atomic<bool>* ready) {
  const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listener < 0) throw std::runtime_error("serve: socket() failed");
  const int one = 1;
  ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(static_cast<std::uint16_t>(options.port));
  if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(listener);
    throw std::runtime_error("serve: bind() failed");
  }
  if (::listen(listener, 1) != 0) {
    ::close(listener);
    throw std::runtime_error("serve: listen() failed");
  }
  if (bound_port) {
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&bound), &len);
    *bound_port = ntohs(bound.sin_port);
  }
  if (ready) ready->store(true);

  // One connection at a time; the experiment harness is single-client.
  while (!stop_requested(options)) {
    pollfd pfd{listener, POLLIN, 0};
    const int rc = ::poll(&pfd, 1, 100);
    if (rc < 0) break;
    if (rc == 0) continue;
    const int fd = ::accept(listener, nullptr, nullptr);
    if (fd < 0) continue;
    serve_connection(p, fd, options);
    ::close(fd);
  }
  ::close(listener);
}

LineClient::LineClient(const std::string& host, int port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw std::runtime_error("LineClient: socket() failed");
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(static_cast<std::uint16_t>(port));
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
    ::close(fd_);
    throw std::runtime_error("LineClient: bad host " + host);
  }
  if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd_);
    throw std::runtime_error("LineClient: connect() failed");
  }
}

LineClient::~LineClient() {
  if (fd_ >= 0) ::close(fd_);
}

std::string LineClient::request(const std::string& line) {
  const std::string payload = line + "\n";
  std::size_t sent = 0;
  while (sent < payload.size()) {
    const ssize_t w = ::send(fd_, payload.data() + sent, payload.size() - sent, 0);
    if (w <= 0) throw std::runtime_error("LineClient: send failed");
    sent += static_cast<std::size_t>(w);
  }
  char chunk[4096];
  std::size_t pos;
  while ((pos = buffer_.find('\n')) == std::string::npos) {
    const ssize_t got = ::recv(fd_, chunk, sizeof(chunk), 0);
    if (got <= 0) throw std::runtime_error("LineClient: connection closed");
    buffer_.append(chunk, static_cast<std::size_t>(got));
  }
  const std::string response = buffer_.substr(0, pos);
  buffer_.erase(0, pos + 1);
  return response;
}

}  // namespace ganlab::server
