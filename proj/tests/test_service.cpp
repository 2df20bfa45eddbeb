#include "equiorb/cli.hpp"
#include "equiorb/service.hpp"
#include "support.hpp"

#include <gtest/gtest.h>
#include <httplib.h>

#include <filesystem>
#include <fstream>
#include <thread>

using namespace equiorb;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json group_json(const std::string& name) {
  std::ifstream in(test_support::group_file(name));
  return json::parse(in);
}

json create_body(const std::string& name, int s, int nu, std::uint64_t seed = 0) {
  return {{"group", group_json(name)}, {"s", s}, {"nu", nu}, {"seed", seed}};
}

int error_status(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const ServiceError& e) {
    return e.status();
  }
  return 0;
}

}  // namespace

TEST(Service, CreateFigureEight) {
  SessionManager mgr;
  const json created = mgr.create(create_body("figure_eight", 12, 256));
  EXPECT_TRUE(created["coercive"].get<bool>());
  EXPECT_TRUE(created["warnings"].empty());
  const json st = mgr.state(created["id"]);
  EXPECT_EQ(st["state"], "idle");
  EXPECT_LT(st["symmetry_violation"].get<double>(), 1e-10);
  EXPECT_LT(st["trajectory"]["junction_mismatch"].get<double>(), 1e-10);
  EXPECT_EQ(st["trajectory"]["times"].size(), 256u * 12 + 1);
  EXPECT_EQ(st["trajectory"]["bodies"].size(), 3u);
  EXPECT_EQ(st["coeffs"].size(), 14u);
}

TEST(Service, NonCoerciveWarns) {
  SessionManager mgr;
  const json created = mgr.create(create_body("trivial", 4, 32));
  EXPECT_FALSE(created["coercive"].get<bool>());
  ASSERT_EQ(created["warnings"].size(), 1u);
  EXPECT_NE(created["warnings"][0].get<std::string>().find("not coercive"), std::string::npos);
}

TEST(Service, BadMatrixNamesGenerator) {
  SessionManager mgr;
  json body = create_body("figure_eight", 6, 64);
  body["group"]["generators"]["h1"]["mat"] = {{1, 0.3}, {0, -1}};
  try {
    mgr.create(body);
    FAIL();
  } catch (const ServiceError& e) {
    EXPECT_EQ(e.status(), 400);
    EXPECT_NE(std::string(e.what()).find("generators.h1"), std::string::npos);
  }
}

TEST(Service, ZeroIterationsOnlySnapshots) {
  SessionManager mgr;
  const std::string id = mgr.create(create_body("figure_eight", 8, 64))["id"];
  const json before = mgr.state(id, false);
  const json after = mgr.step(id, 0);
  EXPECT_EQ(after["coeffs"], before["coeffs"]);
  EXPECT_EQ(after["iteration"], 0);
  const auto events = mgr.events(id, 0, std::chrono::milliseconds(0));
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0]["type"], "snapshot");
}

TEST(Service, ChunkedStepsEqualMinimize) {
  SessionManager mgr;
  const std::string id = mgr.create(create_body("figure_eight", 12, 256, 4))["id"];
  json st;
  for (int i = 0; i < 400; ++i) {
    st = mgr.step(id, 25);
    if (st["state"] != "idle") break;
  }
  ASSERT_EQ(st["state"], "converged");

  const QuadratureParams quad{256};
  MinimizeConfig cfg = mgr.defaults().config;
  const auto out = minimize(random_init(test_support::bundled("figure_eight").group, 12, 4, 1.0, quad),
                            quad, cfg);
  ASSERT_EQ(out.status, Status::Converged);
  EXPECT_EQ(st["iteration"].get<int>(), out.history.back().iter);
  const auto flat = st["coeffs"].get<std::vector<std::vector<double>>>();
  for (std::size_t k = 0; k < flat.size(); ++k)
    for (std::size_t i = 0; i < flat[k].size(); ++i)
      EXPECT_EQ(flat[k][i], out.path.coeffs()[static_cast<Eigen::Index>(k * flat[k].size() + i)]);

  // Progress events are monotone in the action and snapshots stay symmetric.
  const auto events = mgr.events(id, 0, std::chrono::milliseconds(0));
  double last = std::numeric_limits<double>::infinity();
  int snapshots = 0;
  for (const auto& e : events) {
    if (e["type"] == "progress") {
      EXPECT_LE(e["action"].get<double>(), last);
      last = e["action"].get<double>();
    }
    if (e["type"] == "snapshot") {
      ++snapshots;
      EXPECT_LT(e["trajectory"]["junction_mismatch"].get<double>(), 1e-8);
    }
  }
  EXPECT_GE(snapshots, 1);
  EXPECT_EQ(events.back()["type"], "status");
  EXPECT_EQ(events.back()["state"], "converged");
}

TEST(Service, ExportMatchesCommandLine) {
  const fs::path dir = fs::temp_directory_path() / "equiorb_service_export";
  fs::remove_all(dir);
  RunManifest m;
  m.group_file = test_support::group_file("choreography2");
  m.s = 8;
  m.nu = 128;
  m.out_dir = dir;
  std::ostringstream log;
  const auto runs = cmd_minimize(m, log);
  ASSERT_TRUE(runs[0].record_file.has_value());
  std::ifstream in(*runs[0].record_file, std::ios::binary);
  const std::string cli_record{std::istreambuf_iterator<char>(in), {}};

  SessionManager mgr;
  const std::string id = mgr.create(create_body("choreography2", 8, 128, 0))["id"];
  while (mgr.step(id, 25)["state"] == "idle") {
  }
  EXPECT_EQ(mgr.export_orbit(id), cli_record);
}

TEST(Service, PerturbAndReshape) {
  SessionManager mgr;
  const std::string id = mgr.create(create_body("figure_eight", 6, 64))["id"];
  mgr.step(id, 10);
  const json base = mgr.state(id, false);
  const json same = mgr.perturb(id, 0.0);
  EXPECT_EQ(same["coeffs"], base["coeffs"]);
  EXPECT_EQ(same["iteration"], base["iteration"]);

  const json wider = mgr.reshape(id, 10, std::nullopt);
  EXPECT_EQ(wider["s"], 10);
  EXPECT_NEAR(wider["action"].get<double>(), base["action"].get<double>(), 1e-12);
  EXPECT_EQ(error_status([&] { mgr.reshape(id, 2, std::nullopt); }), 400);

  const json moved = mgr.perturb(id, 0.1);
  EXPECT_NE(moved["coeffs"], wider["coeffs"]);
  EXPECT_LT(moved["symmetry_violation"].get<double>(), 1e-10);
  EXPECT_EQ(moved["state"], "idle");
}

TEST(Service, FailedStateNeedsPerturb) {
  SessionManager mgr;
  json body = create_body("trivial", 4, 32);
  body["config"] = {{"max_iters", 3}};
  const std::string id = mgr.create(body)["id"];
  EXPECT_EQ(mgr.step(id, 10)["state"], "failed");
  EXPECT_EQ(error_status([&] { mgr.step(id, 1); }), 409);
  mgr.perturb(id, 0.01);
  EXPECT_EQ(mgr.state(id, false)["state"], "idle");
  EXPECT_EQ(mgr.step(id, 10)["state"], "failed");
}

TEST(Service, UnknownSession) {
  SessionManager mgr;
  EXPECT_EQ(error_status([&] { mgr.step("nope", 1); }), 404);
  EXPECT_EQ(error_status([&] { mgr.state("nope"); }), 404);
  const std::string id = mgr.create(create_body("choreography2", 4, 32))["id"];
  mgr.remove(id);
  EXPECT_EQ(error_status([&] { mgr.state(id); }), 404);
  bool closed = false;
  EXPECT_TRUE(mgr.events(id, 0, std::chrono::milliseconds(0), &closed).empty());
  EXPECT_TRUE(closed);
}

TEST(Service, SessionsAreIndependent) {
  SessionManager mgr;
  const std::string a = mgr.create(create_body("choreography2", 8, 128, 1))["id"];
  const std::string b = mgr.create(create_body("choreography2", 8, 128, 1))["id"];
  std::thread ta([&] { mgr.step(a, 1000); });
  std::thread tb([&] { mgr.step(b, 1000); });
  ta.join();
  tb.join();
  EXPECT_EQ(mgr.state(a, false)["coeffs"], mgr.state(b, false)["coeffs"]);
}

TEST(Service, AsyncStepAndPause) {
  SessionManager mgr;
  const std::string id = mgr.create(create_body("figure_eight", 12, 256, 2))["id"];
  const json queued = mgr.step(id, 1000000, false);
  EXPECT_TRUE(queued["queued"].get<bool>());
  mgr.pause(id);
  // Commands queue behind the paused chunk and see a consistent state.
  const json st = mgr.perturb(id, 0.0);
  EXPECT_NE(st["state"], "running");
  EXPECT_LT(st["symmetry_violation"].get<double>(), 1e-10);
}

TEST(Service, HttpEndpoints) {
  SessionManager mgr;
  HttpService http(mgr);
  const int port = http.bind({"127.0.0.1", 0});
  std::thread server([&] { http.listen(); });
  httplib::Client client("127.0.0.1", port);

  auto res = client.Post("/sessions", create_body("choreography2", 8, 128).dump(),
                         "application/json");
  ASSERT_TRUE(res);
  ASSERT_EQ(res->status, 201);
  const std::string id = json::parse(res->body)["id"];

  res = client.Post("/sessions/" + id + "/step", R"({"iterations": 200})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(json::parse(res->body)["state"], "converged");

  res = client.Get("/sessions/" + id + "?trajectory=false");
  ASSERT_TRUE(res);
  EXPECT_FALSE(json::parse(res->body).contains("trajectory"));

  res = client.Get("/sessions/" + id + "/orbit");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->body, mgr.export_orbit(id));

  std::string stream;
  client.Get("/sessions/" + id + "/events?since=0",
             [&](const char* data, std::size_t len) {
               stream.append(data, len);
               return stream.find("\n\n") == std::string::npos;
             });
  EXPECT_EQ(stream.rfind("id: 1\ndata: {", 0), 0u);

  res = client.Post("/sessions/" + id + "/perturb", "{not json", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 400);
  res = client.Post("/sessions/" + id + "/reshape", R"({"s": 12})", "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(json::parse(res->body)["s"], 12);

  res = client.Delete("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  res = client.Get("/sessions/" + id);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);

  http.stop();
  server.join();
}
