#pragma once
// HTTP lookup provider: GET <path>?q=<phrase>&max=<k> returning a JSON array
// of entity ids in rank order. The provider's order is trusted; hits carry
// score 0.

#include <httplib.h>
#include <json.hpp>

#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "kbfix/lexical_index.hpp"

namespace kbfix {

class RemoteLookup : public LookupProvider {
 public:
  RemoteLookup(std::string host, int port, std::string path = "/lookup")
      : host_(std::move(host)), port_(port), path_(std::move(path)) {}

  std::vector<LookupHit> lookup(std::string_view phrase, std::size_t k) const override {
    if (k == 0) throw Error("lookup requires k >= 1");
    httplib::Client client(host_, port_);
    client.set_connection_timeout(5);
    client.set_read_timeout(30);
    httplib::Params params{{"q", std::string(phrase)}, {"max", std::to_string(k)}};
    auto res = client.Get(path_, params, httplib::Headers{});
    if (!res) throw LookupError(std::string(phrase), "transport error: " + httplib::to_string(res.error()));
    if (res->status != 200) throw LookupError(std::string(phrase), "HTTP status " + std::to_string(res->status));
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(res->body);
    } catch (const nlohmann::json::exception& e) {
      throw LookupError(std::string(phrase), std::string("malformed JSON: ") + e.what());
    }
    if (!body.is_array()) throw LookupError(std::string(phrase), "response is not a JSON array");
    std::vector<LookupHit> hits;
    std::set<std::string> seen;
    for (const auto& item : body) {
      if (!item.is_string()) throw LookupError(std::string(phrase), "non-string entity id in response");
      auto id = item.get<std::string>();
      if (!seen.insert(id).second) continue;
      hits.push_back({std::move(id), 0.0});
      if (hits.size() == k) break;
    }
    return hits;
  }

 private:
  std::string host_;
  int port_;
  std::string path_;
};

/// Serves a local index with the same protocol RemoteLookup speaks.
inline void mount_lookup_endpoint(httplib::Server& server, const LookupProvider& provider,
                                  const std::string& path = "/lookup") {
  server.Get(path, [&provider](const httplib::Request& req, httplib::Response& res) {
    if (!req.has_param("q") || !req.has_param("max")) {
      res.status = 400;
      res.set_content(R"({"error":"missing q or max"})", "application/json");
      return;
    }
    std::size_t k = 0;
    try {
      k = std::stoul(req.get_param_value("max"));
    } catch (...) {
    }
    if (k == 0) {
      res.status = 400;
      res.set_content(R"({"error":"max must be a positive integer"})", "application/json");
      return;
    }
    nlohmann::json out = nlohmann::json::array();
    for (const auto& h : provider.lookup(req.get_param_value("q"), k)) out.push_back(h.entity);
    res.set_content(out.dump(), "application/json");
  });
}

}  // namespace kbfix
