// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdlib>
#include <fstream>
#include <string>

#include "httplib.h"
#include "json.hpp"
#include "ptk/error.hpp"
#include "ptk/judge.hpp"

namespace ptk::judge {

/// Chat-completions style HTTP backend. The endpoint and model name live in a
/// config file; the API key is read from the named environment variable at
/// request time and never written anywhere.
struct ClientConfig {
  std::string endpoint;  // http://host[:port]/path
  std::string model;
  std::string api_key_env;
  int timeout_seconds = 60;
  int max_retries = 2;
  unsigned max_in_flight = 1;
};

inline ClientConfig load_client_config(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open client config: ", path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    fail("client config ", path, ": ", e.what());
  }
  ClientConfig cfg;
  for (auto& [key, value] : j.items()) {
    if (key == "endpoint") cfg.endpoint = value.get<std::string>();
    else if (key == "model") cfg.model = value.get<std::string>();
    else if (key == "api_key_env") cfg.api_key_env = value.get<std::string>();
    else if (key == "timeout_seconds") cfg.timeout_seconds = value.get<int>();
    else if (key == "max_retries") cfg.max_retries = value.get<int>();
    else if (key == "max_in_flight") cfg.max_in_flight = value.get<unsigned>();
    else fail("client config ", path, ": unknown key \"", key, "\"");
  }
  require(!cfg.endpoint.empty(), "client config ", path, ": missing endpoint");
  require(!cfg.model.empty(), "client config ", path, ": missing model");
  return cfg;
}

class HttpJudgeClient : public JudgeClient {
 public:
  explicit HttpJudgeClient(ClientConfig config) : config_(std::move(config)) {
    require(config_.endpoint.rfind("http://", 0) == 0,
            "judge endpoint must be an http:// URL (got \"", config_.endpoint, "\")");
    auto rest = config_.endpoint.substr(7);
    auto slash = rest.find('/');
    base_ = "http://" + (slash == std::string::npos ? rest : rest.substr(0, slash));
    path_ = slash == std::string::npos ? "/" : rest.substr(slash);
  }

  std::string submit(const std::string& prompt) override {
    nlohmann::json body;
    body["model"] = config_.model;
    body["messages"] = nlohmann::json::array({{{"role", "user"}, {"content", prompt}}});
    body["temperature"] = 0;

    httplib::Client client(base_);
    client.set_read_timeout(config_.timeout_seconds, 0);
    client.set_connection_timeout(config_.timeout_seconds, 0);
    httplib::Headers headers;
    if (!config_.api_key_env.empty()) {
      const char* key = std::getenv(config_.api_key_env.c_str());
      require(key != nullptr && *key != '\0', "environment variable ", config_.api_key_env,
              " is not set");
      headers.emplace("Authorization", std::string("Bearer ") + key);
    }
    auto res = client.Post(path_, headers, body.dump(), "application/json");
    require(res != nullptr, "judge request failed: ", httplib::to_string(res.error()));
    require(res->status == 200, "judge request returned HTTP ", res->status, ": ", res->body);
    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    require(!reply.is_discarded(), "judge response is not JSON");
    require(reply.contains("choices") && !reply["choices"].empty(),
            "judge response has no choices");
    return reply["choices"][0].at("message").at("content").get<std::string>();
  }

 private:
  ClientConfig config_;
  std::string base_;
  std::string path_;
};

}  // namespace ptk::judge
