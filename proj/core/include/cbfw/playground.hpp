#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "cbfw/bench.hpp"

namespace cbfw::playground {

inline constexpr int kProtocolVersion = 1;
inline constexpr std::size_t kTraceCapacity = 5000;
inline constexpr int kMaxStepCount = 1000;
inline constexpr int kMaxFieldResolution = 200;

/// Error reply raised by a handler. The code is machine readable
/// ("bad_request", "invalid_params", "unknown_type", ...).
class ProtocolError : public std::runtime_error {
public:
    ProtocolError(std::string code, const std::string& message, std::string field = {})
        : std::runtime_error(message), code_(std::move(code)), field_(std::move(field))
    {
    }
    const std::string& code() const { return code_; }
    const std::string& field() const { return field_; }

private:
    std::string code_;
    std::string field_;
};

/**
 * One simulation owned by one client. Every mutation goes through handle();
 * stepping uses the same ClosedLoop as bench::run_trial, so a session that
 * only steps from its initial state reproduces that trial's trace.
 */
class Session {
public:
    Session(std::string id, TrialConfig cfg);

    const std::string& id() const { return id_; }

    /// Dispatch one request (already known to address this session).
    nlohmann::json handle(const std::string& type, const nlohmann::json& payload);

    nlohmann::json snapshot() const;

    /// Advance a running session by the steps owed after `elapsed` seconds
    /// at the client-set rate. Returns nothing when paused.
    std::vector<StepRecord> pump(double elapsed);

    bool running() const { return running_; }
    const State& state() const { return x_; }
    const TrialConfig& config() const { return cfg_; }

private:
    nlohmann::json on_set_params(const nlohmann::json& payload);
    nlohmann::json on_set_state(const nlohmann::json& payload);
    nlohmann::json on_step(const nlohmann::json& payload);
    nlohmann::json on_run(const nlohmann::json& payload);
    nlohmann::json on_feasibility_field(const nlohmann::json& payload) const;
    nlohmann::json on_input_set() const;
    nlohmann::json on_get_trace(const nlohmann::json& payload) const;
    nlohmann::json on_reset();

    StepRecord advance();
    void rebuild();

    std::string id_;
    TrialConfig cfg_;
    std::unique_ptr<ClosedLoop> loop_;
    State x_;
    int k_ = 0;
    bool running_ = false;
    double rate_hz_ = 100.0;
    double owed_ = 0.0;
    bool collided_ = false;
    int infeasible_steps_ = 0;
    std::deque<StepRecord> trace_;
};

/// Builds the initial config of a session from an init payload.
TrialConfig init_config(const nlohmann::json& payload);

/**
 * Routes requests to sessions. Requests carry
 * {"type", "id", "session" (all but hello/init), "payload"}; every request
 * gets exactly one reply {"protocol_version", "id", "type", "ok", ...}.
 * Safe to call from several threads; each session is serialized by its own lock.
 */
class SessionManager {
public:
    nlohmann::json handle(const nlohmann::json& request);
    /// Parses text first; malformed JSON gets a parse_error reply.
    std::string handle_text(std::string_view text);

    /// Step events of every running session, for transports that stream.
    std::vector<nlohmann::json> pump(double elapsed);

    std::size_t session_count() const;

private:
    struct Entry {
        std::mutex lock;
        std::unique_ptr<Session> session;
        std::optional<std::int64_t> last_id;
    };

    std::shared_ptr<Entry> find(const std::string& id) const;

    mutable std::mutex lock_;
    std::map<std::string, std::shared_ptr<Entry>> sessions_;
    std::uint64_t next_id_ = 1;
};

/// Handshake payload: protocol version, models and filter families.
nlohmann::json hello();

nlohmann::json error_reply(const nlohmann::json& request_id, const std::string& type, const std::string& code,
                           const std::string& message, const std::string& field = {});

// ---------------------------------------------------------------------------
// Wire framing: 4-byte big-endian length, then that many bytes of UTF-8 JSON.

inline constexpr std::size_t kMaxFrameBytes = 16u << 20;

std::string encode_frame(std::string_view payload);

class FrameDecoder {
public:
    void feed(std::string_view bytes);
    /// Next complete payload, if any. Throws ProtocolError on an oversized frame.
    std::optional<std::string> next();

private:
    std::string buffer_;
};

}  // namespace cbfw::playground
