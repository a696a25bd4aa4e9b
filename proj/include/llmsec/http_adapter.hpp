#pragma once

#include <atomic>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "llmsec/exploit.hpp"

namespace llmsec::exploit {

struct HttpAdapterConfig {
    std::string url;                    // target endpoint
    std::string prompt_field = "prompt";
    bool json_body = true;              // false sends form encoding
    std::string listen_host = "127.0.0.1";
    int listen_port = 0;                // 0 disables the listener
    int timeout_seconds = 30;
    int min_delay_ms = 250;             // pause between prompts
    bool declares_sql = false;
};

// Minimal TCP acceptor that turns incoming connections into callback
// events: GET /backdoor is a file_fetch (answered with an inert beacon
// script), any other GET is an http_probe keyed by its path, and a
// non-HTTP connection counts as shell_connect.
class CallbackListener {
  public:
    CallbackListener() = default;
    ~CallbackListener();

    CallbackListener(const CallbackListener&) = delete;
    CallbackListener& operator=(const CallbackListener&) = delete;

    bool start(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

    std::vector<NetworkEventRec> drain();

  private:
    void accept_loop();

    int server_fd_ = -1;
    int port_ = 0;
    std::thread thread_;
    std::atomic<bool> running_{false};
    std::mutex mutex_;
    std::vector<NetworkEventRec> events_;
};

class HttpAdapter : public TargetAdapter {
  public:
    explicit HttpAdapter(HttpAdapterConfig config);
    ~HttpAdapter() override;

    SendResult send(const std::string& prompt) override;
    std::vector<NetworkEventRec> network_events() override;
    bool is_simulated() const override { return false; }
    bool declares_sql_backend() const override { return cfg_.declares_sql; }

    int listener_port() const;

  private:
    HttpAdapterConfig cfg_;
    std::unique_ptr<CallbackListener> listener_;
    bool first_send_ = true;
};

}  // namespace llmsec::exploit
