#include "evobo/http_client.hpp"

#include <cstdlib>

#include <httplib.h>

#include "evobo/errors.hpp"

namespace evobo {
namespace {

class HttplibClient final : public HttpJsonClient {
 public:
  explicit HttplibClient(int timeout_seconds) : timeout_(timeout_seconds) {}

  HttpResponse post(const std::string& base_url, const std::string& path,
                    const nlohmann::json& body,
                    const std::map<std::string, std::string>& headers) override {
    httplib::Client cli(base_url);
    cli.set_connection_timeout(timeout_, 0);
    cli.set_read_timeout(timeout_, 0);
    httplib::Headers h;
    for (const auto& [k, v] : headers) h.emplace(k, v);
    auto res = cli.Post(path, h, body.dump(), "application/json");
    if (!res) {
      throw TransportError("POST " + base_url + path + " failed: " + httplib::to_string(res.error()),
                           1);
    }
    HttpResponse out;
    out.status = res->status;
    out.body = nlohmann::json::parse(res->body, nullptr, /*allow_exceptions=*/false);
    return out;
  }

 private:
  int timeout_;
};

}  // namespace

std::shared_ptr<HttpJsonClient> make_httplib_client(int timeout_seconds) {
  return std::make_shared<HttplibClient>(timeout_seconds);
}

std::string api_key_from_env(const std::string& variable) {
  if (variable.empty()) return {};
  const char* v = std::getenv(variable.c_str());
  return v ? std::string(v) : std::string();
}

}  // namespace evobo
