#pragma once

#include <map>
#include <memory>
#include <string>

#include <json.hpp>

namespace evobo {

struct HttpResponse {
  int status = 0;
  nlohmann::json body;
};

// Minimal blocking JSON-over-HTTP transport. Tests substitute a fake.
class HttpJsonClient {
 public:
  virtual ~HttpJsonClient() = default;
  // Throws TransportError on connection failure.
  virtual HttpResponse post(const std::string& base_url, const std::string& path,
                            const nlohmann::json& body,
                            const std::map<std::string, std::string>& headers) = 0;
};

std::shared_ptr<HttpJsonClient> make_httplib_client(int timeout_seconds = 60);

// Reads the named environment variable; empty when unset.
std::string api_key_from_env(const std::string& variable);

}  // namespace evobo
