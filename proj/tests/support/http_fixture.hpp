#pragma once

#include <httplib.h>

#include <memory>
#include <stdexcept>
#include <string>
#include <thread>

#include "otomech/service.hpp"

namespace otomech::testing {

// A DiagnosisService listening on an ephemeral loopback port.
class RunningService {
 public:
  explicit RunningService(std::shared_ptr<DiagnosisService> service) : service_(std::move(service)) {
    service_->register_routes(server_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    if (port_ <= 0) throw std::runtime_error("cannot bind a loopback port");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~RunningService() {
    server_.stop();
    thread_.join();
  }
  RunningService(const RunningService&) = delete;
  RunningService& operator=(const RunningService&) = delete;

  int port() const { return port_; }
  DiagnosisService& service() { return *service_; }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_read_timeout(60, 0);
    return c;
  }

  httplib::Result diagnose(const std::string& wav, const std::string& where = "", const std::string& when = "") const {
    httplib::MultipartFormDataItems items{{"audio", wav, "query.wav", "audio/wav"}};
    if (!where.empty()) items.push_back({"where", where, "", ""});
    if (!when.empty()) items.push_back({"when", when, "", ""});
    return client().Post("/api/v1/diagnose", items);
  }

 private:
  std::shared_ptr<DiagnosisService> service_;
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace otomech::testing
