#include "serve.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <list>

#include "cbfw/playground.hpp"

// After Eigen: <resolv.h>, pulled in by httplib, defines a _res macro.
#include <httplib.h>

namespace cbfw::serve {

namespace {

bool write_all(int fd, const std::string& bytes)
{
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) return false;
        sent += static_cast<std::size_t>(n);
    }
    return true;
}

void serve_connection(int fd, std::stop_token stop)
{
    playground::SessionManager sessions;
    playground::FrameDecoder decoder;
    auto last = std::chrono::steady_clock::now();
    char buf[65536];
    bool open = true;
    while (open && !stop.stop_requested()) {
        pollfd p{fd, POLLIN, 0};
        const int ready = ::poll(&p, 1, 10);
        if (ready < 0 && errno != EINTR) break;
        if (ready > 0) {
            const ssize_t n = ::recv(fd, buf, sizeof buf, 0);
            if (n <= 0) break;
            decoder.feed(std::string_view(buf, static_cast<std::size_t>(n)));
            try {
                while (auto frame = decoder.next()) {
                    if (!write_all(fd, playground::encode_frame(sessions.handle_text(*frame)))) {
                        open = false;
                        break;
                    }
                }
            } catch (const playground::ProtocolError& e) {
                // An oversized frame leaves the stream unsynchronized; report and hang up.
                write_all(fd, playground::encode_frame(
                                  playground::error_reply(nullptr, "", e.code(), e.what()).dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)));
                break;
            }
        }
        const auto now = std::chrono::steady_clock::now();
        const double elapsed = std::chrono::duration<double>(now - last).count();
        last = now;
        for (const auto& event : sessions.pump(elapsed)) {
            if (!write_all(fd, playground::encode_frame(event.dump(-1, ' ', false, nlohmann::json::error_handler_t::replace)))) {
                open = false;
                break;
            }
        }
    }
    ::close(fd);
}

}  // namespace

FramedServer::~FramedServer()
{
    if (fd_ >= 0) ::close(fd_);
}

bool FramedServer::listen(const std::string& host, int port, std::string& error)
{
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) {
        error = std::strerror(errno);
        return false;
    }
    const int reuse = 1;
    ::setsockopt(fd_, SOL_SOCKET, SO_REUSEADDR, &reuse, sizeof reuse);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<std::uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        error = "invalid host address " + host;
        return false;
    }
    if (::bind(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd_, 16) != 0) {
        error = "cannot listen on " + host + ":" + std::to_string(port) + ": " + std::strerror(errno);
        return false;
    }
    socklen_t len = sizeof addr;
    ::getsockname(fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    return true;
}

void FramedServer::serve(std::stop_token stop)
{
    std::list<std::jthread> connections;
    while (!stop.stop_requested()) {
        pollfd p{fd_, POLLIN, 0};
        if (::poll(&p, 1, 50) <= 0) continue;
        const int client = ::accept(fd_, nullptr, nullptr);
        if (client < 0) continue;
        connections.emplace_back([client, stop] { serve_connection(client, stop); });
    }
}

bool run_http(const HttpOptions& opts, std::stop_token stop, std::string& error, std::atomic<int>* bound_port)
{
    httplib::Server server;
    playground::SessionManager sessions;
    if (opts.static_dir && !server.set_mount_point("/", *opts.static_dir)) {
        error = "static directory not found: " + *opts.static_dir;
        return false;
    }
    server.Post("/api", [&](const httplib::Request& req, httplib::Response& res) {
        res.set_content(sessions.handle_text(req.body), "application/json");
    });
    int port = opts.port;
    if (port == 0) {
        port = server.bind_to_any_port(opts.host);
    } else if (!server.bind_to_port(opts.host, port)) {
        port = -1;
    }
    if (port < 0) {
        error = "cannot listen on " + opts.host + ":" + std::to_string(opts.port);
        return false;
    }
    if (bound_port) *bound_port = port;
    std::stop_callback halt(stop, [&] { server.stop(); });
    server.listen_after_bind();
    return true;
}

}  // namespace cbfw::serve
