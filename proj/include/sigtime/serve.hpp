#pragma once

#include "sigtime/bundle.hpp"

#include <httplib.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <string>

namespace sigtime {

struct ApiResponse
{
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

//! Read-only views of one bundle. Responses are computed from the
//! immutable bundle only, so handle() is safe to call concurrently.
class BundleService
{
public:
  explicit BundleService(ExplorationBundle bundle)
    : bundle_(std::move(bundle))
    , flat_scores_(bundle_.flat_scores())
  {
    static_[ "/api/meta" ] = bundle_meta_json(bundle_).dump();
    static_[ "/api/series" ] = bundle_series_json(bundle_).dump();
    static_[ "/api/signatures" ] = bundle_signatures_json(bundle_).dump();
    static_[ "/api/scores" ] = bundle_scores_json(bundle_).dump();
    static_[ "/api/kde" ] = bundle_kde_json(bundle_).dump();
    static_[ "/api/dtw" ] = nlohmann::json(bundle_.dtw).dump();
  }

  const ExplorationBundle& bundle() const { return bundle_; }

  //! threshold is the raw query value, absent when not given.
  ApiResponse handle(const std::string& path,
                     const std::optional<std::string>& threshold = std::nullopt) const
  {
    if (auto it = static_.find(path); it != static_.end())
      return { 200, it->second };
    if (path == "/api/clusters")
      return clusters(threshold);
    return error(404, "unknown route " + path);
  }

  static std::optional<double> parse_threshold(const std::string& text)
  {
    double v = 0.0;
    const char* end = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(text.data(), end, v);
    if (text.empty() || ec != std::errc() || ptr != end || !std::isfinite(v))
      return std::nullopt;
    return v;
  }

private:
  static ApiResponse error(int status, const std::string& msg)
  {
    return { status, nlohmann::json{ { "error", msg } }.dump() };
  }

  ApiResponse clusters(const std::optional<std::string>& raw) const
  {
    double t = bundle_.threshold;
    if (raw) {
      auto v = parse_threshold(*raw);
      if (!v)
        return error(400, "threshold must be a number, got '" + *raw + "'");
      if (*v < 0.0 || *v > 1.0)
        return error(400, "threshold must lie in [0,1], got " + *raw);
      t = *v;
    }
    nlohmann::json j = { { "threshold", t },
                         { "clusters",
                           clusters_json(assign_clusters(flat_scores_, bundle_.k(), t)) } };
    return { 200, j.dump() };
  }

  ExplorationBundle bundle_;
  std::vector<double> flat_scores_;
  std::map<std::string, std::string> static_;
};

//! Registers the API routes (and optional static UI assets) on a server.
inline void install_routes(httplib::Server& server, const BundleService& service,
                           const std::string& static_dir = {})
{
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get(R"(/api/.*)", [&service, reply](const httplib::Request& req,
                                             httplib::Response& res) {
    std::optional<std::string> threshold;
    if (req.has_param("threshold"))
      threshold = req.get_param_value("threshold");
    reply(res, service.handle(req.path, threshold));
  });
  if (!static_dir.empty()) {
    if (!std::filesystem::is_directory(static_dir))
      throw Error("static directory not found: " + static_dir);
    server.set_mount_point("/", static_dir);
  }
  server.set_error_handler([reply](const httplib::Request& req, httplib::Response& res) {
    if (res.status == 404 && res.body.empty())
      reply(res, { 404, nlohmann::json{ { "error", "unknown route " + req.path } }.dump() });
  });
}

//! Blocks serving the bundle on host:port.
inline void serve(const ExplorationBundle& bundle, const std::string& host, int port,
                  const std::string& static_dir = {})
{
  BundleService service(bundle);
  httplib::Server server;
  install_routes(server, service, static_dir);
  if (!server.listen(host, port))
    throw Error("cannot listen on " + host + ":" + std::to_string(port));
}

} // namespace sigtime
