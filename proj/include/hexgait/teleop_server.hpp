#pragma once

#include <atomic>
#include <chrono>
#include <deque>
#include <functional>
#include <memory>
#include <string>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "hexgait/teleop.hpp"

namespace hexgait::teleop {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace detail {

// One upgraded connection. All handlers run on the single io thread.
class WsConnection : public std::enable_shared_from_this<WsConnection>
{
public:
  WsConnection(tcp::socket socket, Service& service)
      : ws_(std::move(socket)), timer_(ws_.get_executor()), service_(service)
  {
  }

  void start(http::request<http::string_body> req)
  {
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->session_ = self->service_.open_session();
      self->queue(self->service_.hello().dump());
      self->read();
      self->pump();
    });
  }

private:
  void read()
  {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->queue(self->service_.handle_message(*self->session_, text).dump());
      self->read();
    });
  }

  void queue(std::string text)
  {
    replies_.push_back(std::move(text));
    write_next();
  }

  // Moves published state frames into the write queue every few milliseconds.
  void pump()
  {
    if (closed_) return;
    while (auto s = session_->outbox.pop()) replies_.push_back(std::move(*s));
    write_next();
    timer_.expires_after(std::chrono::milliseconds(2));
    timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->pump();
    });
  }

  void write_next()
  {
    if (writing_ || replies_.empty() || closed_) return;
    writing_ = true;
    current_ = std::move(replies_.front());
    replies_.pop_front();
    ws_.async_write(net::buffer(current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      self->write_next();
    });
  }

  void close()
  {
    if (closed_) return;
    closed_ = true;
    timer_.cancel();
    if (session_) service_.close_session(session_->id);
  }

  websocket::stream<tcp::socket> ws_;
  net::steady_timer timer_;
  Service& service_;
  std::shared_ptr<Session> session_;
  beast::flat_buffer buffer_;
  std::deque<std::string> replies_;
  std::string current_;
  bool writing_ = false;
  bool closed_ = false;
};

class HttpConnection : public std::enable_shared_from_this<HttpConnection>
{
public:
  HttpConnection(tcp::socket socket, Service& service) : stream_(std::move(socket)), service_(service) {}

  void start()
  {
    http::async_read(stream_, buffer_, request_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->dispatch();
    });
  }

private:
  void dispatch()
  {
    const std::string target(request_.target());
    if (websocket::is_upgrade(request_)) {
      if (target == "/ws") {
        std::make_shared<WsConnection>(stream_.release_socket(), service_)->start(std::move(request_));
        return;
      }
      respond(http::status::not_found, "text/plain", "not found\n");
      return;
    }
    if (request_.method() == http::verb::get && target == "/state") {
      respond(http::status::ok, "application/json", service_.latest_state());
      return;
    }
    if (request_.method() == http::verb::get && target == "/hello") {
      respond(http::status::ok, "application/json", service_.hello().dump());
      return;
    }
    respond(http::status::not_found, "text/plain", "not found\n");
  }

  void respond(http::status status, const char* type, std::string body)
  {
    auto res = std::make_shared<http::response<http::string_body>>(status, request_.version());
    res->set(http::field::content_type, type);
    res->set(http::field::access_control_allow_origin, "*");
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  Service& service_;
};

}  // namespace detail

// Parses "host:port"; port 0 asks the OS for a free port.
inline tcp::endpoint parse_bind(const std::string& bind)
{
  const auto colon = bind.rfind(':');
  if (colon == std::string::npos) throw std::invalid_argument("bind address must be host:port");
  const std::string host = bind.substr(0, colon);
  const int port = std::stoi(bind.substr(colon + 1));
  if (port < 0 || port > 65535) throw std::invalid_argument("port out of range");
  return {net::ip::make_address(host.empty() ? "0.0.0.0" : host), static_cast<unsigned short>(port)};
}

// HTTP + WebSocket front end on a single io thread.
class Server
{
public:
  Server(Service& service, const std::string& bind) : service_(service), acceptor_(io_)
  {
    const tcp::endpoint ep = parse_bind(bind);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  ~Server() { stop(); }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void stop()
  {
    if (stopped_.exchange(true)) return;
    net::post(io_, [this] {
      beast::error_code ec;
      acceptor_.close(ec);
    });
    io_.stop();
    if (thread_.joinable()) thread_.join();
  }

private:
  void accept()
  {
    acceptor_.async_accept(net::make_strand(io_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<detail::HttpConnection>(std::move(socket), service_)->start();
      accept();
    });
  }

  Service& service_;
  net::io_context io_{1};
  tcp::acceptor acceptor_;
  std::thread thread_;
  std::atomic<bool> stopped_{false};
};

// Paces Service::tick at the controller rate on its own thread.
class TickLoop
{
public:
  explicit TickLoop(Service& service, double tick_rate) : service_(service), period_(1.0 / tick_rate)
  {
    thread_ = std::thread([this] { run(); });
  }

  ~TickLoop() { stop(); }

  void stop()
  {
    running_ = false;
    if (thread_.joinable()) thread_.join();
  }

private:
  void run()
  {
    using clock = std::chrono::steady_clock;
    const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(period_));
    auto next = clock::now();
    while (running_) {
      service_.tick();
      next += period;
      const auto now = clock::now();
      if (next < now - 50 * period) next = now;  // fell far behind: do not try to catch up in a burst
      std::this_thread::sleep_until(next);
    }
  }

  Service& service_;
  double period_;
  std::atomic<bool> running_{true};
  std::thread thread_;
};

}  // namespace hexgait::teleop
