#include "shmpose/stream_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include <mutex>

namespace shmpose {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct StreamServer::Impl {
  net::io_context ioc;
  std::unique_ptr<tcp::acceptor> acceptor;

  std::mutex mutex;
  std::vector<std::thread> threads;
  std::vector<std::weak_ptr<websocket::stream<tcp::socket>>> streams;
};

StreamServer::StreamServer(StreamHub& hub)
    : hub_(hub), impl_(std::make_unique<Impl>()) {}

StreamServer::~StreamServer() { stop(); }

void StreamServer::start(const std::string& address, uint16_t port) {
  stop();
  const tcp::endpoint endpoint(net::ip::make_address(address), port);
  impl_->acceptor = std::make_unique<tcp::acceptor>(impl_->ioc);
  impl_->acceptor->open(endpoint.protocol());
  impl_->acceptor->set_option(net::socket_base::reuse_address(true));
  impl_->acceptor->bind(endpoint);
  impl_->acceptor->listen();
  port_ = impl_->acceptor->local_endpoint().port();
  running_ = true;
  accept_thread_ = std::thread(&StreamServer::accept_loop, this);
}

void StreamServer::stop() {
  running_ = false;
  if (impl_->acceptor && impl_->acceptor->is_open()) {
    // A blocked synchronous accept is not interrupted by close(); poke it
    // with a throwaway connection so the loop observes running_ == false.
    try {
      tcp::socket waker(impl_->ioc);
      auto endpoint = impl_->acceptor->local_endpoint();
      if (endpoint.address().is_unspecified()) {
        endpoint.address(net::ip::make_address("127.0.0.1"));
      }
      waker.connect(endpoint);
    } catch (const std::exception&) {
    }
  }
  if (accept_thread_.joinable()) accept_thread_.join();
  if (impl_->acceptor) {
    boost::system::error_code ec;
    impl_->acceptor->close(ec);
  }
  {
    std::lock_guard lock(impl_->mutex);
    for (auto& weak : impl_->streams) {
      if (auto ws = weak.lock()) {
        boost::system::error_code ec;
        ws->next_layer().close(ec);
      }
    }
  }
  std::vector<std::thread> threads;
  {
    std::lock_guard lock(impl_->mutex);
    threads.swap(impl_->threads);
    impl_->streams.clear();
  }
  for (auto& t : threads) {
    if (t.joinable()) t.join();
  }
  impl_->acceptor.reset();
}

void StreamServer::accept_loop() {
  while (running_) {
    boost::system::error_code ec;
    tcp::socket socket(impl_->ioc);
    impl_->acceptor->accept(socket, ec);
    if (ec) {
      if (running_) continue;
      break;
    }
    if (!running_) break;  // waker connection during shutdown
    auto ws = std::make_shared<websocket::stream<tcp::socket>>(
        std::move(socket));
    std::lock_guard lock(impl_->mutex);
    impl_->streams.push_back(ws);
    impl_->threads.emplace_back([this, ws] {
      try {
        beast::flat_buffer buffer;
        http::request<http::string_body> req;
        http::read(ws->next_layer(), buffer, req);

        if (!websocket::is_upgrade(req) ||
            req.target() != "/api/v1/stream") {
          http::response<http::string_body> res{http::status::not_found,
                                                req.version()};
          res.set(http::field::content_type, "application/json");
          res.body() = R"({"error":"not found"})";
          res.prepare_payload();
          http::write(ws->next_layer(), res);
          return;
        }
        ws->accept(req);

        // First client frame selects the structure.
        beast::flat_buffer msg_buffer;
        ws->read(msg_buffer);
        const auto request =
            nlohmann::json::parse(beast::buffers_to_string(msg_buffer.data()),
                                  nullptr, false);
        if (!request.is_object() ||
            request.value("type", "") != "subscribe" ||
            !request.contains("structure_id")) {
          ws->write(net::buffer(
              std::string(R"({"type":"error","message":"expected subscribe"})")));
          ws->close(websocket::close_code::policy_error);
          return;
        }

        auto sub = hub_.subscribe(request["structure_id"].get<std::string>());
        ws->text(true);
        while (running_ && !sub->closed()) {
          auto message = sub->next_message_for(std::chrono::milliseconds(250));
          if (!message) continue;
          boost::system::error_code wec;
          ws->write(net::buffer(message->text), wec);
          if (wec) break;
        }
        sub->close();
        boost::system::error_code cec;
        ws->close(websocket::close_code::going_away, cec);
      } catch (const std::exception&) {
        // Connection-level failures just end this subscriber.
      }
    });
  }
}

}  // namespace shmpose
