#include "equiorb/service.hpp"

#include "equiorb/errors.hpp"
#include "equiorb/orbit_io.hpp"

#include <httplib.h>

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <future>
#include <limits>
#include <random>
#include <sstream>
#include <thread>

namespace equiorb {

using nlohmann::json;

namespace {

constexpr std::size_t kHistoryCapacity = 10000;
constexpr std::size_t kEventCapacity = 4096;
constexpr int kSnapshotPointsPerSegment = 64;
constexpr double kSnapshotSymmetryTol = 1e-8;

json number(double x) {
  return std::isfinite(x) ? json(x) : json(nullptr);
}

json trajectory_json(const FourierPath& path, int points_per_segment) {
  const FullPeriodTrajectory traj = extend_to_full_period(
      path, QuadratureParams{points_per_segment}, std::numeric_limits<double>::infinity());
  const MassSystem& sys = path.system();
  json bodies = json::array();
  for (int j = 0; j < sys.n(); ++j) {
    json pts = json::array();
    for (const auto& q : traj.samples) {
      json p = json::array();
      for (int c = 0; c < sys.d(); ++c) p.push_back(q(c, j));
      pts.push_back(std::move(p));
    }
    bodies.push_back(std::move(pts));
  }
  return {{"times", traj.times},
          {"bodies", std::move(bodies)},
          {"junction_mismatch", traj.max_junction_mismatch}};
}

json coeff_blocks(const FourierPath& path) {
  json blocks = json::array();
  const int dim = path.block_size();
  for (int k = 0; k < path.block_count(); ++k) {
    const double* p = path.coeffs().data() + static_cast<std::ptrdiff_t>(k) * dim;
    blocks.push_back(std::vector<double>(p, p + dim));
  }
  return blocks;
}

}  // namespace

// ------------------------------------------------------------------ Session

class Session {
 public:
  struct View {
    FourierPath path;
    QuadratureParams quad;
    ActionReport report;
    Status status;
    std::string message;
    int iter;
    std::string run_state;
  };

  Session(std::string id, LoadedGroup group, std::unique_ptr<Minimizer> minimizer,
          std::uint64_t seed, int snapshot_interval, int ui_points)
      : id_(std::move(id)),
        group_(std::move(group)),
        minimizer_(std::move(minimizer)),
        cfg_(minimizer_->config()),
        seed_(seed),
        snapshot_interval_(snapshot_interval),
        ui_points_(ui_points),
        view_(make_view("idle")) {
    publish(settled_state());
    worker_ = std::thread([this] { work(); });
  }

  ~Session() { close(); }

  void close() {
    {
      std::lock_guard lk(queue_mutex_);
      if (stopping_) return;
      stopping_ = true;
    }
    pause_gen_.fetch_add(1);
    queue_cv_.notify_all();
    if (worker_.joinable()) worker_.join();
    std::lock_guard lk(event_mutex_);
    closed_ = true;
    event_cv_.notify_all();
  }

  const std::string& id() const { return id_; }
  const LoadedGroup& group() const { return group_; }

  std::future<json> submit(std::function<json()> fn) {
    auto task = std::make_shared<std::packaged_task<json()>>(std::move(fn));
    auto fut = task->get_future();
    {
      std::lock_guard lk(queue_mutex_);
      if (stopping_) throw ServiceError(404, "session " + id_ + " is closed");
      queue_.push_back([task] { (*task)(); });
    }
    queue_cv_.notify_one();
    return fut;
  }

  std::uint64_t pause_generation() const { return pause_gen_.load(); }
  void pause() { pause_gen_.fetch_add(1); }

  View view() const {
    std::lock_guard lk(view_mutex_);
    return view_;
  }

  std::vector<HistoryEntry> history() const {
    std::lock_guard lk(view_mutex_);
    return {history_.begin(), history_.end()};
  }

  // Worker-side operations -------------------------------------------------

  json run_chunk(int iterations, std::uint64_t generation) {
    const std::string rs = view().run_state;
    if (rs == "failed")
      throw ServiceError(409, "session " + id_ + " is in the failed state; perturb or reshape first");
    if (iterations == 0 || minimizer_->finished()) {
      emit_snapshot();
      return state_json(true);
    }
    publish("running");
    emit_status();
    int since_snapshot = 0;
    minimizer_->step(iterations, [&](const HistoryEntry& h) {
      record(h);
      emit({{"type", "progress"},
            {"iter", h.iter},
            {"action", number(h.action)},
            {"grad_norm", number(h.grad_norm)},
            {"min_distance", number(h.min_distance)}});
      if (++since_snapshot >= snapshot_interval_) {
        since_snapshot = 0;
        publish("running");
        emit_snapshot();
      }
      return pause_gen_.load() == generation;
    });
    publish(settled_state());
    emit_snapshot();
    emit_status();
    return state_json(true);
  }

  json perturb(double amplitude, std::optional<std::uint64_t> seed) {
    if (amplitude < 0.0) throw ServiceError(400, "amplitude must be non-negative");
    if (amplitude == 0.0) return state_json(true);
    ContinueChanges ch;
    ch.perturb_amplitude = amplitude;
    ch.seed = seed.value_or(seed_ + 1 + perturb_count_++);
    restart(continue_with(minimizer_->path(), minimizer_->quad(), ch));
    return state_json(true);
  }

  json reshape(std::optional<int> s, std::optional<int> nu, bool truncate) {
    ContinueChanges ch;
    ch.s = s;
    ch.nu = nu;
    ch.truncate = truncate;
    restart(continue_with(minimizer_->path(), minimizer_->quad(), ch));
    return state_json(true);
  }

  std::string export_orbit() const {
    const View v = view();
    return dump_orbit_record(make_orbit_record(group_.definition, v.path, v.quad, v.report));
  }

  // Read side ----------------------------------------------------------------

  json state_json(bool with_trajectory) const {
    const View v = view();
    const MassSystem& sys = v.path.system();
    json j = {{"id", id_},
              {"state", v.run_state},
              {"status", to_string(v.status)},
              {"message", v.message},
              {"iteration", v.iter},
              {"group", group_.definition.name},
              {"n", sys.n()},
              {"d", sys.d()},
              {"l", v.path.group().l()},
              {"s", v.path.s()},
              {"nu", v.quad.nu},
              {"coeffs", coeff_blocks(v.path)},
              {"action", number(v.report.action)},
              {"grad_norm", number(v.report.grad_norm)},
              {"min_distance", number(v.report.min_mutual_distance)},
              {"symmetry_violation", coefficient_symmetry_violation(v.path)},
              {"config", to_json(cfg_)}};
    if (with_trajectory) {
      try {
        j["trajectory"] = trajectory_json(v.path, ui_points_);
      } catch (const Error& e) {
        j["trajectory"] = nullptr;
        j["trajectory_error"] = e.what();
      }
    }
    return j;
  }

  std::vector<json> events_after(std::uint64_t since, std::chrono::milliseconds wait,
                                 bool* closed) {
    std::unique_lock lk(event_mutex_);
    auto ready = [&] { return closed_ || (!events_.empty() && events_.back()["seq"] > since); };
    event_cv_.wait_for(lk, wait, ready);
    if (closed) *closed = closed_;
    std::vector<json> out;
    for (const auto& e : events_)
      if (e["seq"].get<std::uint64_t>() > since) out.push_back(e);
    return out;
  }

 private:
  void work() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lk(queue_mutex_);
        queue_cv_.wait(lk, [&] { return stopping_ || !queue_.empty(); });
        if (stopping_ && queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  View make_view(std::string run_state) const {
    return {minimizer_->path(),   minimizer_->quad(),    minimizer_->report(),
            minimizer_->status(), minimizer_->message(), minimizer_->iterations(),
            std::move(run_state)};
  }

  void publish(std::string run_state) {
    View v = make_view(std::move(run_state));
    std::lock_guard lk(view_mutex_);
    view_ = std::move(v);
  }

  void record(const HistoryEntry& h) {
    std::lock_guard lk(view_mutex_);
    history_.push_back(h);
    if (history_.size() > kHistoryCapacity) history_.pop_front();
  }

  std::string settled_state() const {
    switch (minimizer_->status()) {
      case Status::Running: return "idle";
      case Status::Converged: return "converged";
      default: return "failed";
    }
  }

  void restart(Continuation c) {
    auto m = std::make_unique<Minimizer>(std::move(c.path), c.quad, cfg_);
    minimizer_ = std::move(m);
    {
      std::lock_guard lk(view_mutex_);
      history_.clear();
    }
    publish(settled_state());
    emit_snapshot();
    emit_status();
  }

  void emit(json e) {
    std::lock_guard lk(event_mutex_);
    e["seq"] = ++seq_;
    events_.push_back(std::move(e));
    if (events_.size() > kEventCapacity) events_.pop_front();
    event_cv_.notify_all();
  }

  void emit_status() {
    const View v = view();
    emit({{"type", "status"},
          {"state", v.run_state},
          {"status", to_string(v.status)},
          {"message", v.message},
          {"iter", v.iter},
          {"action", number(v.report.action)},
          {"grad_norm", number(v.report.grad_norm)},
          {"min_distance", number(v.report.min_mutual_distance)}});
  }

  void emit_snapshot() {
    const FourierPath& path = minimizer_->path();
    try {
      json traj = trajectory_json(path, kSnapshotPointsPerSegment);
      const double violation = std::max(coefficient_symmetry_violation(path),
                                         traj["junction_mismatch"].get<double>());
      if (!(violation < kSnapshotSymmetryTol)) {
        emit({{"type", "status"},
              {"state", view().run_state},
              {"status", "symmetry-check-failed"},
              {"message", "snapshot withheld: symmetry violation " + format_double(violation)},
              {"iter", minimizer_->iterations()}});
        return;
      }
      emit({{"type", "snapshot"},
            {"iter", minimizer_->iterations()},
            {"action", number(minimizer_->report().action)},
            {"trajectory", std::move(traj)}});
    } catch (const Error& e) {
      emit({{"type", "status"},
            {"state", view().run_state},
            {"status", "snapshot-failed"},
            {"message", e.what()},
            {"iter", minimizer_->iterations()}});
    }
  }

  std::string id_;
  LoadedGroup group_;
  std::unique_ptr<Minimizer> minimizer_;  // worker thread only
  MinimizeConfig cfg_;
  std::uint64_t seed_;
  int snapshot_interval_;
  int ui_points_;
  std::uint64_t perturb_count_ = 0;

  mutable std::mutex view_mutex_;
  View view_;
  std::deque<HistoryEntry> history_;

  std::mutex queue_mutex_;
  std::condition_variable queue_cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::thread worker_;
  std::atomic<std::uint64_t> pause_gen_{0};

  std::mutex event_mutex_;
  std::condition_variable event_cv_;
  std::deque<json> events_;
  std::uint64_t seq_ = 0;
  bool closed_ = false;
};

// ----------------------------------------------------------- SessionManager

namespace {

json wait_for(std::future<json> fut) {
  try {
    return fut.get();
  } catch (const ServiceError&) {
    throw;
  } catch (const ParseError& e) {
    throw ServiceError(400, e.what());
  } catch (const ShapeError& e) {
    throw ServiceError(400, e.what());
  } catch (const Error& e) {
    throw ServiceError(422, e.what());
  }
}

}  // namespace

SessionManager::SessionManager(SessionDefaults defaults) : defaults_(std::move(defaults)) {}

SessionManager::~SessionManager() {
  std::map<std::string, std::shared_ptr<Session>> all;
  {
    std::lock_guard lk(mutex_);
    all.swap(sessions_);
  }
  for (auto& [id, s] : all) s->close();
}

std::shared_ptr<Session> SessionManager::get(const std::string& id) const {
  std::lock_guard lk(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw ServiceError(404, "no session " + id);
  return it->second;
}

json SessionManager::create(const json& body) {
  if (!body.is_object()) throw ServiceError(400, "request body must be a JSON object");
  LoadedGroup group;
  int s = defaults_.s;
  MinimizeConfig cfg = defaults_.config;
  int snapshot_interval = defaults_.snapshot_interval;
  int ui_points = defaults_.ui_points_per_segment;
  std::optional<int> nu = defaults_.nu;
  try {
    if (body.contains("group") && body["group"].is_object())
      group = build_group(parse_group_definition(body["group"]));
    else if (body.contains("group_file") && body["group_file"].is_string())
      group = load_group(body["group_file"].get<std::string>());
    else
      throw ParseError("missing field 'group' (definition object) or 'group_file'");
    if (body.contains("config")) cfg = parse_minimize_config(body["config"], cfg);
    if (body.contains("seed")) cfg.seed = body["seed"].get<std::uint64_t>();
    if (body.contains("amplitude")) cfg.amplitude = body["amplitude"].get<double>();
    if (body.contains("s")) s = body["s"].get<int>();
    if (body.contains("nu")) nu = body["nu"].get<int>();
    if (body.contains("snapshot_interval"))
      snapshot_interval = body["snapshot_interval"].get<int>();
    if (body.contains("ui_points")) ui_points = body["ui_points"].get<int>();
    cfg.validate();
  } catch (const json::exception& e) {
    throw ServiceError(400, std::string("invalid request: ") + e.what());
  } catch (const Error& e) {
    throw ServiceError(400, e.what());
  }
  if (s < 0) throw ServiceError(400, "s must be non-negative");
  const QuadratureParams quad{nu.value_or(default_nu(s))};
  if (quad.nu < 1) throw ServiceError(400, "nu must be at least 1");
  if (snapshot_interval < 1) throw ServiceError(400, "snapshot_interval must be positive");
  if (ui_points < 1) throw ServiceError(400, "ui_points must be positive");

  std::unique_ptr<Minimizer> minimizer;
  try {
    FourierPath start = random_init(group.group, s, cfg.seed, cfg.amplitude, quad,
                                    cfg.collision_floor);
    minimizer = std::make_unique<Minimizer>(std::move(start), quad, cfg);
  } catch (const Error& e) {
    throw ServiceError(422, e.what());
  }

  const bool coercive = is_coercive(*group.group);
  json warnings = json::array();
  if (!coercive) warnings.push_back("not coercive: minimizing sequences may escape");

  std::string id;
  {
    std::lock_guard lk(mutex_);
    std::random_device rd;
    std::ostringstream os;
    os << std::hex << ((static_cast<std::uint64_t>(rd()) << 32) ^ rd()) << '-' << ++counter_;
    id = os.str();
  }
  auto session = std::make_shared<Session>(id, std::move(group), std::move(minimizer), cfg.seed,
                                           snapshot_interval, ui_points);
  {
    std::lock_guard lk(mutex_);
    sessions_[id] = session;
  }
  return {{"id", id}, {"state", "idle"}, {"coercive", coercive}, {"warnings", warnings}};
}

json SessionManager::step(const std::string& id, int iterations, bool wait) {
  if (iterations < 0) throw ServiceError(400, "iterations must be non-negative");
  auto s = get(id);
  const std::uint64_t gen = s->pause_generation();
  auto fut = s->submit([s, iterations, gen] { return s->run_chunk(iterations, gen); });
  if (!wait) return {{"id", id}, {"queued", true}, {"iterations", iterations}};
  return wait_for(std::move(fut));
}

json SessionManager::pause(const std::string& id) {
  auto s = get(id);
  s->pause();
  return {{"id", id}, {"paused", true}};
}

json SessionManager::perturb(const std::string& id, double amplitude,
                             std::optional<std::uint64_t> seed) {
  auto s = get(id);
  return wait_for(s->submit([s, amplitude, seed] { return s->perturb(amplitude, seed); }));
}

json SessionManager::reshape(const std::string& id, std::optional<int> s_new,
                             std::optional<int> nu, bool truncate) {
  auto s = get(id);
  return wait_for(
      s->submit([s, s_new, nu, truncate] { return s->reshape(s_new, nu, truncate); }));
}

json SessionManager::state(const std::string& id, bool with_trajectory) {
  auto s = get(id);
  json j = s->state_json(with_trajectory);
  json hist = json::array();
  for (const auto& h : s->history())
    hist.push_back({h.iter, number(h.action), number(h.grad_norm)});
  j["history"] = std::move(hist);
  return j;
}

std::string SessionManager::export_orbit(const std::string& id) {
  auto s = get(id);
  // Queue behind pending commands so the export reflects them.
  return wait_for(s->submit([s] { return json(s->export_orbit()); })).get<std::string>();
}

void SessionManager::remove(const std::string& id) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "no session " + id);
    s = it->second;
    sessions_.erase(it);
  }
  s->close();
}

std::vector<json> SessionManager::events(const std::string& id, std::uint64_t since,
                                         std::chrono::milliseconds wait, bool* closed) {
  std::shared_ptr<Session> s;
  {
    std::lock_guard lk(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) {
      if (closed) *closed = true;
      return {};
    }
    s = it->second;
  }
  return s->events_after(since, wait, closed);
}

std::vector<std::string> SessionManager::ids() const {
  std::lock_guard lk(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

// -------------------------------------------------------------- HttpService

struct HttpService::Impl {
  SessionManager& manager;
  httplib::Server server;
  explicit Impl(SessionManager& m) : manager(m) {}
};

namespace {

void send_json(httplib::Response& res, const json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw ServiceError(400, std::string("malformed JSON body: ") + e.what());
  }
}

template <class T>
std::optional<T> opt(const json& body, const char* name) {
  if (!body.contains(name) || body[name].is_null()) return std::nullopt;
  try {
    return body[name].get<T>();
  } catch (const json::exception&) {
    throw ServiceError(400, std::string("field '") + name + "' has the wrong type");
  }
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler h) {
  return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
    try {
      h(req, res);
    } catch (const ServiceError& e) {
      send_json(res, {{"error", e.what()}}, e.status());
    } catch (const std::exception& e) {
      send_json(res, {{"error", e.what()}}, 500);
    }
  };
}

}  // namespace

HttpService::HttpService(SessionManager& manager) : impl_(std::make_unique<Impl>(manager)) {
  auto& srv = impl_->server;
  SessionManager& mgr = manager;

  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"}});
  srv.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

  srv.Post("/sessions", guarded([&mgr](const auto& req, auto& res) {
             send_json(res, mgr.create(parse_body(req)), 201);
           }));
  srv.Get("/sessions", guarded([&mgr](const auto&, auto& res) {
            send_json(res, {{"sessions", mgr.ids()}});
          }));
  srv.Post(R"(/sessions/([^/]+)/step)", guarded([&mgr](const auto& req, auto& res) {
             const json body = parse_body(req);
             const int iters = opt<int>(body, "iterations").value_or(25);
             const bool wait = opt<bool>(body, "wait").value_or(true);
             send_json(res, mgr.step(req.matches[1], iters, wait), wait ? 200 : 202);
           }));
  srv.Post(R"(/sessions/([^/]+)/pause)", guarded([&mgr](const auto& req, auto& res) {
             send_json(res, mgr.pause(req.matches[1]));
           }));
  srv.Post(R"(/sessions/([^/]+)/perturb)", guarded([&mgr](const auto& req, auto& res) {
             const json body = parse_body(req);
             send_json(res, mgr.perturb(req.matches[1], opt<double>(body, "amplitude").value_or(0.0),
                                        opt<std::uint64_t>(body, "seed")));
           }));
  srv.Post(R"(/sessions/([^/]+)/reshape)", guarded([&mgr](const auto& req, auto& res) {
             const json body = parse_body(req);
             send_json(res, mgr.reshape(req.matches[1], opt<int>(body, "s"), opt<int>(body, "nu"),
                                        opt<bool>(body, "truncate").value_or(false)));
           }));
  srv.Get(R"(/sessions/([^/]+))", guarded([&mgr](const auto& req, auto& res) {
            const bool traj = req.get_param_value("trajectory") != "false";
            send_json(res, mgr.state(req.matches[1], traj));
          }));
  srv.Get(R"(/sessions/([^/]+)/orbit)", guarded([&mgr](const auto& req, auto& res) {
            res.set_content(mgr.export_orbit(req.matches[1]), "application/json");
            res.set_header("Content-Disposition", "attachment; filename=\"orbit.json\"");
          }));
  srv.Delete(R"(/sessions/([^/]+))", guarded([&mgr](const auto& req, auto& res) {
               mgr.remove(req.matches[1]);
               send_json(res, {{"deleted", std::string(req.matches[1])}});
             }));
  srv.Get(R"(/sessions/([^/]+)/events)", guarded([&mgr](const auto& req, auto& res) {
            const std::string id = req.matches[1];
            mgr.state(id, false);  // 404 for unknown ids
            std::uint64_t since = 0;
            if (req.has_param("since")) since = std::stoull(req.get_param_value("since"));
            if (req.has_header("Last-Event-ID"))
              since = std::stoull(req.get_header_value("Last-Event-ID"));
            auto cursor = std::make_shared<std::uint64_t>(since);
            res.set_header("Cache-Control", "no-cache");
            res.set_chunked_content_provider(
                "text/event-stream", [&mgr, id, cursor](std::size_t, httplib::DataSink& sink) {
                  bool closed = false;
                  auto evs = mgr.events(id, *cursor, std::chrono::milliseconds(1000), &closed);
                  if (evs.empty()) {
                    if (closed) {
                      sink.done();
                      return true;
                    }
                    static const std::string ping = ": keep-alive\n\n";
                    return sink.write(ping.data(), ping.size());
                  }
                  for (const auto& e : evs) {
                    *cursor = e["seq"].get<std::uint64_t>();
                    const std::string msg =
                        "id: " + std::to_string(*cursor) + "\ndata: " + e.dump() + "\n\n";
                    if (!sink.write(msg.data(), msg.size())) return false;
                  }
                  return true;
                });
          }));
}

HttpService::~HttpService() { stop(); }

int HttpService::bind(const ServeOptions& opts) {
  auto& srv = impl_->server;
  if (opts.port == 0) {
    const int port = srv.bind_to_any_port(opts.host);
    if (port < 0) throw Error("cannot bind " + opts.host);
    return port;
  }
  if (!srv.bind_to_port(opts.host, opts.port))
    throw Error("cannot bind " + opts.host + ":" + std::to_string(opts.port) +
                " (port in use?)");
  return opts.port;
}

void HttpService::listen() { impl_->server.listen_after_bind(); }

void HttpService::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace equiorb
