#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>

#include "cloudfort/classifier.hpp"

namespace cloudfort {

/// Line protocol spoken with an external model server:
///
///   request:  "CLOUD <n>\n" followed by n lines "x y z\n" (12 significant digits)
///   response: "LABEL <name>\n" or "ERR <code> <message>\n"
///
/// One response per request, in request order.
namespace wire {

std::string encode_request(const PointCloud& cloud);

struct Response {
  bool ok = false;
  Label label;   // when ok
  int code = 0;  // when !ok
  std::string message;
};

/// Throws ClassifierFailure on a line that is neither LABEL nor ERR.
Response parse_response(std::string_view line);

}  // namespace wire

/// Where the model server lives.
///   "stdio:<shell command>"  spawn the command, talk over its stdin/stdout
///   "tcp:<host>:<port>"      connect to a listening server
struct Endpoint {
  enum class Kind { Stdio, Tcp } kind = Kind::Stdio;
  std::string command;  // Stdio
  std::string host;     // Tcp
  int port = 0;         // Tcp

  static Endpoint parse(const std::string& spec);
};

/// Environment variable consulted when no endpoint is configured.
inline constexpr const char* kEndpointEnvVar = "CLOUDFORT_CLASSIFIER_ENDPOINT";

/// Client for the line protocol. Single-caller: concurrent_safe() is false
/// and a mutex serializes any concurrent use. Transport failures, timeouts,
/// and ERR responses raise ClassifierFailure.
class RemoteClassifier final : public Classifier {
 public:
  RemoteClassifier(const Endpoint& endpoint, std::chrono::milliseconds timeout,
                   std::vector<Label> alphabet = {});
  ~RemoteClassifier() override;

  RemoteClassifier(const RemoteClassifier&) = delete;
  RemoteClassifier& operator=(const RemoteClassifier&) = delete;

  Label classify(const PointCloud& cloud, const CallContext& context) const override;
  const ClassifierDescriptor& descriptor() const noexcept override { return descriptor_; }
  bool concurrent_safe() const noexcept override { return false; }

 private:
  class Channel;

  std::unique_ptr<Channel> channel_;
  std::chrono::milliseconds timeout_;
  ClassifierDescriptor descriptor_;
  mutable std::mutex mutex_;
};

}  // namespace cloudfort
