#include "cloudfort/remote.hpp"

#include <netdb.h>
#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstring>

#include "cloudfort/error.hpp"

namespace cloudfort {

namespace wire {

std::string encode_request(const PointCloud& cloud) {
  std::string out = "CLOUD " + std::to_string(cloud.size()) + "\n";
  char buf[96];
  for (const auto& p : cloud.points) {
    std::snprintf(buf, sizeof buf, "%.12g %.12g %.12g\n", p.x, p.y, p.z);
    out += buf;
  }
  return out;
}

Response parse_response(std::string_view line) {
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  Response r;
  if (line.starts_with("LABEL ")) {
    r.ok = true;
    r.label = std::string(line.substr(6));
    if (r.label.empty() || r.label.find(' ') != std::string::npos)
      throw classifier_failure("malformed LABEL response: '" + std::string(line) + "'");
    return r;
  }
  if (line.starts_with("ERR ")) {
    auto rest = line.substr(4);
    const auto space = rest.find(' ');
    const auto code_text = rest.substr(0, space);
    auto [ptr, ec] = std::from_chars(code_text.data(), code_text.data() + code_text.size(), r.code);
    if (ec != std::errc() || ptr != code_text.data() + code_text.size())
      throw classifier_failure("malformed ERR response: '" + std::string(line) + "'");
    r.message = space == std::string_view::npos ? "" : std::string(rest.substr(space + 1));
    return r;
  }
  throw classifier_failure("unrecognized response from classifier: '" + std::string(line) + "'");
}

}  // namespace wire

Endpoint Endpoint::parse(const std::string& spec) {
  Endpoint e;
  if (spec.starts_with("stdio:")) {
    e.kind = Kind::Stdio;
    e.command = spec.substr(6);
    if (e.command.empty()) throw invalid_input("stdio endpoint needs a command: '" + spec + "'");
    return e;
  }
  if (spec.starts_with("tcp:")) {
    e.kind = Kind::Tcp;
    const auto rest = spec.substr(4);
    const auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon == 0) throw invalid_input("tcp endpoint must be tcp:<host>:<port>: '" + spec + "'");
    e.host = rest.substr(0, colon);
    const auto port_text = rest.substr(colon + 1);
    auto [ptr, ec] = std::from_chars(port_text.data(), port_text.data() + port_text.size(), e.port);
    if (ec != std::errc() || ptr != port_text.data() + port_text.size() || e.port <= 0 || e.port > 65535)
      throw invalid_input("bad port in endpoint '" + spec + "'");
    return e;
  }
  throw invalid_input("endpoint must start with 'stdio:' or 'tcp:': '" + spec + "'");
}

// ---------------------------------------------------------------------------

class RemoteClassifier::Channel {
 public:
  explicit Channel(const Endpoint& endpoint) {
    // Writes to a dead peer must surface as EPIPE, not kill the process.
    ::signal(SIGPIPE, SIG_IGN);
    if (endpoint.kind == Endpoint::Kind::Stdio) {
      spawn(endpoint.command);
    } else {
      connect_tcp(endpoint.host, endpoint.port);
    }
  }

  ~Channel() {
    if (write_fd_ >= 0 && write_fd_ != read_fd_) ::close(write_fd_);
    if (read_fd_ >= 0) ::close(read_fd_);
    if (child_ > 0) {
      int status = 0;
      ::waitpid(child_, &status, 0);
    }
  }

  Channel(const Channel&) = delete;
  Channel& operator=(const Channel&) = delete;

  void send(const std::string& data) {
    std::size_t sent = 0;
    while (sent < data.size()) {
      const auto n = ::write(write_fd_, data.data() + sent, data.size() - sent);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw classifier_failure(std::string("write to classifier failed: ") + std::strerror(errno));
      }
      sent += static_cast<std::size_t>(n);
    }
  }

  std::string read_line(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (remaining.count() <= 0) throw classifier_failure("classifier response timed out");
      pollfd pfd{read_fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(remaining.count()));
      if (ready < 0) {
        if (errno == EINTR) continue;
        throw classifier_failure(std::string("poll failed: ") + std::strerror(errno));
      }
      if (ready == 0) throw classifier_failure("classifier response timed out");
      char chunk[4096];
      const auto n = ::read(read_fd_, chunk, sizeof chunk);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw classifier_failure(std::string("read from classifier failed: ") + std::strerror(errno));
      }
      if (n == 0) throw classifier_failure("classifier closed the connection");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  void spawn(const std::string& command) {
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) throw classifier_failure("pipe() failed");
    if (::pipe(from_child) != 0) {
      ::close(to_child[0]);
      ::close(to_child[1]);
      throw classifier_failure("pipe() failed");
    }
    const pid_t pid = ::fork();
    if (pid < 0) {
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      throw classifier_failure("fork() failed");
    }
    if (pid == 0) {
      ::dup2(to_child[0], STDIN_FILENO);
      ::dup2(from_child[1], STDOUT_FILENO);
      for (int fd : {to_child[0], to_child[1], from_child[0], from_child[1]}) ::close(fd);
      ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(to_child[0]);
    ::close(from_child[1]);
    child_ = pid;
    write_fd_ = to_child[1];
    read_fd_ = from_child[0];
  }

  void connect_tcp(const std::string& host, int port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* result = nullptr;
    const auto port_text = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), port_text.c_str(), &hints, &result); rc != 0)
      throw classifier_failure("cannot resolve " + host + ": " + ::gai_strerror(rc));
    int fd = -1;
    for (auto* ai = result; ai != nullptr; ai = ai->ai_next) {
      fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
      if (fd < 0) continue;
      if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
      ::close(fd);
      fd = -1;
    }
    ::freeaddrinfo(result);
    if (fd < 0) throw classifier_failure("cannot connect to " + host + ":" + port_text);
    read_fd_ = write_fd_ = fd;
  }

  pid_t child_ = -1;
  int read_fd_ = -1;
  int write_fd_ = -1;
  std::string buffer_;
};

RemoteClassifier::RemoteClassifier(const Endpoint& endpoint, std::chrono::milliseconds timeout,
                                   std::vector<Label> alphabet)
    : channel_(std::make_unique<Channel>(endpoint)), timeout_(timeout) {
  std::sort(alphabet.begin(), alphabet.end());
  alphabet.erase(std::unique(alphabet.begin(), alphabet.end()), alphabet.end());
  descriptor_ = {"remote", std::move(alphabet)};
}

RemoteClassifier::~RemoteClassifier() = default;

Label RemoteClassifier::classify(const PointCloud& cloud, const CallContext&) const {
  std::lock_guard lock(mutex_);
  channel_->send(wire::encode_request(cloud));
  const auto response = wire::parse_response(channel_->read_line(timeout_));
  if (!response.ok)
    throw classifier_failure("classifier returned ERR " + std::to_string(response.code) + " " + response.message);
  return response.label;
}

}  // namespace cloudfort
