// Minimal WebSocket and HTTP clients for exercising the teleop server.
#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

namespace wsclient {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

struct Frame
{
  Clock::time_point received;
  json message;
};

// Connects synchronously, then reads on a background io thread. Writes are
// posted to the same thread.
class Client
{
public:
  Client(unsigned short port, const std::string& target = "/ws") : ws_(io_)
  {
    tcp::resolver resolver(io_);
    net::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1:" + std::to_string(port), target);
    ws_.text(true);
    read();
    thread_ = std::thread([this] { io_.run(); });
  }

  ~Client() { close(); }

  void send(const json& message)
  {
    net::post(io_, [this, text = message.dump()] {
      outbox_.push_back(text);
      if (outbox_.size() == 1) write_next();
    });
  }

  void close()
  {
    if (closed_) return;
    closed_ = true;
    net::post(io_, [this] {
      beast::error_code ec;
      ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
      ws_.next_layer().close(ec);
    });
    if (thread_.joinable()) thread_.join();
  }

  std::vector<Frame> frames() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return frames_;
  }

  // Blocks until a frame satisfying `pred` has arrived (searching from index
  // `from`) or the timeout elapses; returns its index or -1.
  long wait_for(const std::function<bool(const json&)>& pred, double timeout_s, std::size_t from = 0)
  {
    std::unique_lock<std::mutex> lock(mutex_);
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(timeout_s));
    std::size_t i = from;
    for (;;) {
      for (; i < frames_.size(); ++i)
        if (pred(frames_[i].message)) return static_cast<long>(i);
      if (cv_.wait_until(lock, deadline) == std::cv_status::timeout) {
        for (; i < frames_.size(); ++i)
          if (pred(frames_[i].message)) return static_cast<long>(i);
        return -1;
      }
    }
  }

  bool disconnected() const
  {
    std::lock_guard<std::mutex> lock(mutex_);
    return disconnected_;
  }

private:
  void read()
  {
    ws_.async_read(buffer_, [this](beast::error_code ec, std::size_t) {
      if (ec) {
        std::lock_guard<std::mutex> lock(mutex_);
        disconnected_ = true;
        cv_.notify_all();
        return;
      }
      Frame f{Clock::now(), json::parse(beast::buffers_to_string(buffer_.data()), nullptr, false)};
      buffer_.consume(buffer_.size());
      {
        std::lock_guard<std::mutex> lock(mutex_);
        frames_.push_back(std::move(f));
      }
      cv_.notify_all();
      read();
    });
  }

  void write_next()
  {
    ws_.async_write(net::buffer(outbox_.front()), [this](beast::error_code ec, std::size_t) {
      outbox_.pop_front();
      if (!ec && !outbox_.empty()) write_next();
    });
  }

  net::io_context io_;
  websocket::stream<tcp::socket> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<Frame> frames_;
  bool disconnected_ = false;
  bool closed_ = false;
};

struct HttpReply
{
  int status = 0;
  std::string content_type;
  std::string body;
};

inline HttpReply http_get(unsigned short port, const std::string& target)
{
  net::io_context io;
  tcp::resolver resolver(io);
  beast::tcp_stream stream(io);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return {static_cast<int>(res.result_int()), std::string(res[http::field::content_type]), res.body()};
}

}  // namespace wsclient
