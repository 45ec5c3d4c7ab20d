#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "shmpose/simulator.hpp"

namespace shmpose {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct StreamTail::Impl {
  net::io_context ioc;
  std::unique_ptr<websocket::stream<tcp::socket>> ws;
};

StreamTail::StreamTail() : impl_(std::make_unique<Impl>()) {}

StreamTail::~StreamTail() { close(); }

void StreamTail::connect(const std::string& host, uint16_t port,
                         const std::string& structure_id) {
  tcp::resolver resolver(impl_->ioc);
  const auto endpoints = resolver.resolve(host, std::to_string(port));
  impl_->ws =
      std::make_unique<websocket::stream<tcp::socket>>(impl_->ioc);
  net::connect(impl_->ws->next_layer(), endpoints);
  impl_->ws->handshake(host + ":" + std::to_string(port), "/api/v1/stream");
  impl_->ws->text(true);
  impl_->ws->write(net::buffer(
      nlohmann::json{{"type", "subscribe"}, {"structure_id", structure_id}}
          .dump()));
}

std::optional<std::string> StreamTail::read_message() {
  if (!impl_->ws) return std::nullopt;
  try {
    beast::flat_buffer buffer;
    impl_->ws->read(buffer);
    return beast::buffers_to_string(buffer.data());
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

void StreamTail::close() {
  if (!impl_->ws) return;
  boost::system::error_code ec;
  impl_->ws->next_layer().shutdown(tcp::socket::shutdown_both, ec);
  impl_->ws->next_layer().close(ec);
  impl_->ws.reset();
}

}  // namespace shmpose
