#pragma once

#include <atomic>
#include <optional>
#include <string>
#include <thread>

namespace cbfw::serve {

/**
 * Playground bridge over TCP with length-prefixed JSON frames. Each
 * connection owns its sessions; running sessions stream "step_event" frames.
 */
class FramedServer {
public:
    FramedServer() = default;
    FramedServer(const FramedServer&) = delete;
    FramedServer& operator=(const FramedServer&) = delete;
    ~FramedServer();

    /// Binds and listens. Port 0 picks a free port. Returns false with a
    /// reason on failure (port in use, bad host).
    bool listen(const std::string& host, int port, std::string& error);
    int port() const { return port_; }

    /// Accepts connections until stop is requested.
    void serve(std::stop_token stop);

private:
    int fd_ = -1;
    int port_ = 0;
};

struct HttpOptions {
    std::string host = "127.0.0.1";
    int port = 0;
    std::optional<std::string> static_dir;
};

/// Static frontend plus POST /api (one JSON request, one JSON reply).
/// Blocks until stop is requested. Returns false when binding fails.
bool run_http(const HttpOptions& opts, std::stop_token stop, std::string& error,
              std::atomic<int>* bound_port = nullptr);

}  // namespace cbfw::serve
