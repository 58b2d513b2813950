#include "sigtime/serve.hpp"
#include "sigtime/synthetic.hpp"

#include <gtest/gtest.h>

#include <thread>

using namespace sigtime;
using nlohmann::json;

namespace {

const ExplorationBundle& bundle()
{
  static const ExplorationBundle b = [] {
    RunConfig cfg;
    cfg.k = 8;
    cfg.epochs = 3;
    cfg.window_step = 5;
    cfg.d_model = 16;
    cfg.heads = 2;
    cfg.ffn_dim = 32;
    cfg.layers = 1;
    cfg.valid_fraction = 0.0;
    auto data = synthetic::motif_dataset(30, 50, 8).data;
    auto fitted = fit(data, cfg);
    BundleOptions opt;
    opt.name = "motif";
    return export_bundle(fitted.model, data, data, opt);
  }();
  return b;
}

std::size_t members(const json& clusters)
{
  std::size_t total = 0;
  for (const auto& c : clusters)
    if (!c["cluster"].is_null())
      total += c["members"].size();
  return total;
}

} // namespace

TEST(BundleService, StaticViews)
{
  BundleService svc(bundle());
  auto meta = json::parse(svc.handle("/api/meta").body);
  EXPECT_EQ(meta["schema"], kBundleSchema);
  EXPECT_EQ(meta["name"], "motif");
  EXPECT_EQ(meta["n"], 30);
  EXPECT_EQ(meta["k"], 8);
  EXPECT_EQ(meta["threshold"], 0.8);

  auto scores = json::parse(svc.handle("/api/scores").body);
  EXPECT_EQ(scores["scores"].size(), 30u);
  auto sigs = json::parse(svc.handle("/api/signatures").body);
  EXPECT_EQ(sigs.size(), 8u);
  for (const char* path : { "/api/series", "/api/kde", "/api/dtw" }) {
    auto r = svc.handle(path);
    EXPECT_EQ(r.status, 200) << path;
    EXPECT_NO_THROW(json::parse(r.body)) << path;
  }
}

TEST(BundleService, ClusterThresholds)
{
  BundleService svc(bundle());
  auto dflt = json::parse(svc.handle("/api/clusters").body);
  EXPECT_EQ(dflt["threshold"], 0.8);
  EXPECT_EQ(dflt["clusters"], clusters_json(bundle().clusters));

  std::size_t prev = std::numeric_limits<std::size_t>::max();
  for (const char* t : { "0", "0.25", "0.5", "0.75", "0.9", "1" }) {
    auto r = svc.handle("/api/clusters", std::string(t));
    ASSERT_EQ(r.status, 200) << t;
    std::size_t cur = members(json::parse(r.body)["clusters"]);
    EXPECT_LE(cur, prev) << t;
    prev = cur;
  }
  EXPECT_EQ(members(json::parse(svc.handle("/api/clusters", std::string("0")).body)["clusters"]),
            30u * 8u);
}

TEST(BundleService, BadRequests)
{
  BundleService svc(bundle());
  for (const char* t : { "1.01", "-0.1", "abc", "", "0.5x", "nan", "inf" }) {
    auto r = svc.handle("/api/clusters", std::string(t));
    EXPECT_EQ(r.status, 400) << t;
    EXPECT_TRUE(json::parse(r.body).contains("error")) << t;
  }
  EXPECT_EQ(svc.handle("/api/nope").status, 404);
}

TEST(HttpServer, ServesOverLoopback)
{
  BundleService svc(bundle());
  httplib::Server server;
  install_routes(server, svc);
  int port = server.bind_to_any_port("127.0.0.1");
  ASSERT_GT(port, 0);
  std::thread worker([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto meta = client.Get("/api/meta");
  ASSERT_TRUE(meta);
  EXPECT_EQ(meta->status, 200);
  EXPECT_EQ(meta->get_header_value("Content-Type"), "application/json");
  EXPECT_EQ(json::parse(meta->body)["k"], 8);

  auto bad = client.Get("/api/clusters?threshold=1.01");
  ASSERT_TRUE(bad);
  EXPECT_EQ(bad->status, 400);

  auto ok = client.Get("/api/clusters?threshold=0.5");
  ASSERT_TRUE(ok);
  EXPECT_EQ(json::parse(ok->body)["threshold"], 0.5);

  auto missing = client.Get("/nothing/here");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  EXPECT_TRUE(json::parse(missing->body).contains("error"));

  server.stop();
  worker.join();
}

TEST(HttpServer, MissingStaticDirectoryIsAnError)
{
  BundleService svc(bundle());
  httplib::Server server;
  EXPECT_THROW(install_routes(server, svc, "/definitely/not/here"), Error);
}
