#pragma once

#include "equiorb/group_io.hpp"
#include "equiorb/optimizer.hpp"

#include <json.hpp>

#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace equiorb {

/// Request-level failure carrying the HTTP status it maps to.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

/// Session parameters used when a create request leaves them out.
struct SessionDefaults {
  int s = 12;
  std::optional<int> nu;
  MinimizeConfig config = [] {
    MinimizeConfig c;
    c.max_iters = 1000000;
    return c;
  }();
  int snapshot_interval = 25;
  int ui_points_per_segment = 256;
};

class Session;

/// Owns the live sessions. Commands on one session run in arrival order on
/// that session's worker; sessions never share mutable state.
///
/// All methods take and return JSON payloads as exchanged over HTTP and throw
/// ServiceError (404 unknown id, 409 wrong state, 400 invalid request).
class SessionManager {
 public:
  explicit SessionManager(SessionDefaults defaults = {});
  ~SessionManager();

  SessionManager(const SessionManager&) = delete;
  SessionManager& operator=(const SessionManager&) = delete;

  /// Body: {"group": definition, "s", "nu", "seed", "amplitude", "config",
  /// "snapshot_interval", "ui_points"}. Returns {"id", "state",
  /// "coercive", "warnings"}.
  nlohmann::json create(const nlohmann::json& body);

  /// Run up to `iterations` descent iterations. With wait=false the chunk
  /// is queued and the call returns at once.
  nlohmann::json step(const std::string& id, int iterations, bool wait = true);
  /// Stop the running chunk at the next iteration boundary.
  nlohmann::json pause(const std::string& id);
  nlohmann::json perturb(const std::string& id, double amplitude,
                         std::optional<std::uint64_t> seed = std::nullopt);
  nlohmann::json reshape(const std::string& id, std::optional<int> s, std::optional<int> nu,
                         bool truncate = false);
  nlohmann::json state(const std::string& id, bool with_trajectory = true);
  /// Orbit record text, byte-identical to what the CLI writes.
  std::string export_orbit(const std::string& id);
  void remove(const std::string& id);

  /// Events with sequence number > since, waiting up to `wait` for one.
  /// Empty result with `closed` set means the session is gone.
  std::vector<nlohmann::json> events(const std::string& id, std::uint64_t since,
                                     std::chrono::milliseconds wait, bool* closed = nullptr);

  std::vector<std::string> ids() const;
  const SessionDefaults& defaults() const { return defaults_; }

 private:
  std::shared_ptr<Session> get(const std::string& id) const;

  SessionDefaults defaults_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t counter_ = 0;
};

struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 8080;  ///< 0 picks a free port
};

/// HTTP front end for a SessionManager.
class HttpService {
 public:
  explicit HttpService(SessionManager& manager);
  ~HttpService();

  /// Bind the socket; returns the bound port. Throws Error when in use.
  int bind(const ServeOptions& opts);
  /// Serve until stop(); call after bind().
  void listen();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace equiorb
