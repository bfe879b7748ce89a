#include <chrono>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include <gtest/gtest.h>

#include "kvopt/error.hpp"
#include "kvopt/serialize.hpp"
#include "kvopt/server.hpp"
#include "test_support.hpp"

// After Eigen: <resolv.h> defines a _res macro that collides with it.
#include <httplib.h>

namespace kvopt {
namespace {

class ServerTest : public ::testing::Test {
 protected:
  void SetUp() override {
    ServerOptions opts;
    opts.monitor_period = std::chrono::milliseconds(20);
    server_ = std::make_unique<Server>(store_, opts);
    server_->start();
    client_ = std::make_unique<httplib::Client>(server_->endpoint());
  }
  void TearDown() override { server_->stop(); }

  std::string create_toy() {
    const json body = {{"system", system_to_json(testing::nnls_toy())},
                       {"meta", {{"rho_filter_default", 0.5}}}};
    auto res = client_->Post("/v1/problems", body.dump(), "application/json");
    EXPECT_TRUE(res);
    EXPECT_EQ(res->status, 200);
    return json::parse(res->body).at("pid").get<std::string>();
  }

  json get(const std::string& path, int expected = 200) {
    auto res = client_->Get(path);
    EXPECT_TRUE(res) << path;
    if (!res) return {};
    EXPECT_EQ(res->status, expected) << path << ": " << res->body;
    return json::parse(res->body);
  }

  int send(const std::string& method, const std::string& path, const std::string& body) {
    httplib::Result res = method == "PUT"
                              ? client_->Put(path, body, "application/json")
                              : client_->Post(path, body, "application/json");
    return res ? res->status : -1;
  }

  Store store_;
  std::unique_ptr<Server> server_;
  std::unique_ptr<httplib::Client> client_;
};

TEST_F(ServerTest, CreateAndRead) {
  const auto pid = create_toy();
  const json list = get("/v1/problems");
  ASSERT_EQ(list.size(), 1u);
  EXPECT_EQ(list[0].at("pid"), pid);
  const json meta = get("/v1/problems/" + pid + "/meta");
  EXPECT_EQ(meta.at("K"), 2);
  EXPECT_EQ(meta.at("kind"), "nnls");
  EXPECT_EQ(meta.at("status"), "running");
  EXPECT_EQ(get("/v1/problems/" + pid + "/c").at("values"), json({0.0, 0.0}));

  const json var = get("/v1/problems/" + pid + "/var/0");
  EXPECT_EQ(var.at("j"), 0);
  EXPECT_EQ(var.at("m").at("kind"), "ABS");
  EXPECT_NEAR(var.at("Grow")[0].get<double>(), 0.0, 1e-15);
  EXPECT_NEAR(var.at("Grow")[1].get<double>(), -1.0, 1e-15);
}

TEST_F(ServerTest, IdempotentCreateByRequestId) {
  const json body = {{"system", system_to_json(testing::nnls_toy())}, {"request_id", "abc"}};
  auto a = client_->Post("/v1/problems", body.dump(), "application/json");
  auto b = client_->Post("/v1/problems", body.dump(), "application/json");
  ASSERT_TRUE(a && b);
  EXPECT_EQ(json::parse(a->body).at("pid"), json::parse(b->body).at("pid"));
}

TEST_F(ServerTest, WriteAndAnalytics) {
  const auto pid = create_toy();
  auto reg = client_->Post("/v1/problems/" + pid + "/workers", R"({"platform":"curl"})",
                           "application/json");
  ASSERT_TRUE(reg);
  const auto wid = json::parse(reg->body).at("wid").get<std::string>();
  const std::string base = "/v1/problems/" + pid;
  EXPECT_EQ(send("PUT", base + "/c/0", json({{"value", 3.0}, {"wid", wid}}).dump()), 200);
  EXPECT_EQ(send("PUT", base + "/c/1", json({{"value", -3.0}, {"wid", wid}}).dump()), 200);
  EXPECT_EQ(get(base + "/c").at("values"), json({3.0, -3.0}));

  const json an = get(base + "/analytics");
  EXPECT_EQ(an.at("total_updates"), 2);
  EXPECT_EQ(an.at("workers")[0].at("platform"), "curl");

  const json ro = get(base + "/readout");
  EXPECT_NEAR(ro.at("x")[0].get<double>(), 3.0, 1e-12);
  EXPECT_LE(ro.at("residual").get<double>(), 1e-12);
}

TEST_F(ServerTest, ErrorCodes) {
  const auto pid = create_toy();
  const std::string base = "/v1/problems/" + pid;
  const auto wid = store_.register_worker(pid, "x");
  get("/v1/problems/nope/meta", 404);
  get(base + "/var/7", 404);
  EXPECT_EQ(send("PUT", base + "/c/0", R"({"value":null,"wid":")" + wid + "\"}"), 400);
  EXPECT_EQ(send("PUT", base + "/c/0", "{not json"), 400);
  EXPECT_EQ(send("PUT", base + "/c/0", R"({"value":1.0})"), 400);
  EXPECT_EQ(send("PUT", base + "/c/9", json({{"value", 1.0}, {"wid", wid}}).dump()), 404);
  EXPECT_EQ(send("PUT", base + "/c/0", json({{"value", 1.0}, {"wid", "w77"}}).dump()), 404);
  EXPECT_EQ(send("POST", base + "/control", R"({"action":"explode"})"), 400);
  EXPECT_EQ(send("POST", base + "/observation", R"({"y":[1,2]})"), 400);
  EXPECT_EQ(send("POST", "/v1/problems", R"({"system":{"format":"other"}})"), 400);
  // Rejected writes leave the slot untouched.
  EXPECT_EQ(get(base + "/c").at("values"), json({0.0, 0.0}));
}

TEST_F(ServerTest, ControlAndObservation) {
  const auto pid = create_toy();
  const std::string base = "/v1/problems/" + pid;
  EXPECT_EQ(send("POST", base + "/control", R"({"action":"pause"})"), 200);
  EXPECT_EQ(get(base + "/meta").at("status"), "paused");
  EXPECT_EQ(send("POST", base + "/control", R"({"action":"resume"})"), 200);
  EXPECT_EQ(get(base + "/meta").at("status"), "running");
  EXPECT_EQ(send("POST", base + "/control", R"({"action":"set_rho","rho":0.25})"), 200);
  EXPECT_EQ(get(base + "/meta").at("rho_filter_default"), 0.25);

  EXPECT_EQ(send("POST", base + "/observation", R"({"y":[-2]})"), 200);
  EXPECT_EQ(get(base + "/var/1").at("m"), json::parse(R"({"kind":"CONST","v":2.0})"));
}

TEST_F(ServerTest, ResidualSeriesGrows) {
  const auto pid = create_toy();
  std::this_thread::sleep_for(std::chrono::milliseconds(150));
  const json series = get("/v1/problems/" + pid + "/residual").at("series");
  ASSERT_GE(series.size(), 2u);
  EXPECT_NEAR(series[0][1].get<double>(), 3.0, 1e-12);
}

TEST_F(ServerTest, DeleteProblem) {
  const auto pid = create_toy();
  auto res = client_->Delete("/v1/problems/" + pid);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  get("/v1/problems/" + pid + "/c", 404);
  res = client_->Delete("/v1/problems/" + pid);
  EXPECT_EQ(res->status, 404);
}

TEST_F(ServerTest, EventStream) {
  const auto pid = create_toy();
  store_.pause(pid);
  std::string received;
  auto res = client_->Get("/v1/problems/" + pid + "/events",
                          [&](const char* data, std::size_t len) {
                            received.append(data, len);
                            return received.find("event: residual") == std::string::npos;
                          });
  EXPECT_NE(received.find("event: status\ndata: "), std::string::npos);
  EXPECT_NE(received.find("\"paused\""), std::string::npos);
  EXPECT_NE(received.find("event: residual"), std::string::npos);
  EXPECT_NE(received.find("id: 1\n"), std::string::npos);
}

TEST_F(ServerTest, EventStreamResumesAfterLastEventId) {
  const auto pid = create_toy();
  store_.pause(pid);
  store_.resume(pid);
  const auto seq = store_.events(pid)->last_seq();
  store_.set_rho(pid, 0.3);
  std::string received;
  httplib::Headers headers{{"Last-Event-ID", std::to_string(seq)}};
  client_->Get("/v1/problems/" + pid + "/events", headers,
               [&](const char* data, std::size_t len) {
                 received.append(data, len);
                 return received.find("\n\n") == std::string::npos;
               });
  EXPECT_EQ(received.rfind("id: " + std::to_string(seq + 1) + "\nevent: status", 0), 0u)
      << received;
  EXPECT_NE(received.find("0.3"), std::string::npos);
}

TEST(AttachUrl, RoundTrip) {
  const auto url = attach_url("http://127.0.0.1:8080/", "p1a2b3");
  EXPECT_EQ(url, "http://127.0.0.1:8080/#/attach/p1a2b3");
  const auto t = parse_attach_url(url);
  EXPECT_EQ(t.endpoint, "http://127.0.0.1:8080");
  EXPECT_EQ(t.pid, "p1a2b3");
  EXPECT_THROW(parse_attach_url("http://127.0.0.1:8080/"), InvalidArgument);
  EXPECT_THROW(parse_attach_url("http://host/#/attach/"), InvalidArgument);
  EXPECT_THROW(parse_attach_url("/#/attach/p1"), InvalidArgument);
}

TEST(Server, ServesStaticDashboardAssets) {
  const auto dir = std::filesystem::temp_directory_path() /
                   ("kvopt_static_" + std::to_string(::getpid()));
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "index.html") << "<html>dashboard</html>";
  Store store;
  ServerOptions opts;
  opts.static_dir = dir.string();
  Server server(store, opts);
  server.start();
  httplib::Client client(server.endpoint());
  auto res = client.Get("/index.html");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(res->body, "<html>dashboard</html>");
  // The API still answers next to the static mount.
  EXPECT_EQ(client.Get("/v1/problems")->status, 200);
  server.stop();
  std::filesystem::remove_all(dir);
}

TEST(Server, BindFailureIsReported) {
  Store store;
  Server first(store);
  const int port = first.start();
  ServerOptions opts;
  opts.port = port;
  Server second(store, opts);
  EXPECT_THROW(second.start(), ServiceError);
}

}  // namespace
}  // namespace kvopt
