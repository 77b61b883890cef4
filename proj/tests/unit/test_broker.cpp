#include <gtest/gtest.h>

#include <atomic>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "weldcell/broker.hpp"
#include "weldcell/client.hpp"
#include "weldcell/error.hpp"
#include "weldcell/message.hpp"

using namespace weldcell;
using namespace weldcell::msgbus;
using namespace std::chrono_literals;
namespace asio = boost::asio;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;

namespace {

// Blocking socket speaking the wire format directly, independent of Client.
class RawConn {
 public:
  explicit RawConn(std::uint16_t port) : socket_(io_) {
    socket_.connect({asio::ip::make_address("127.0.0.1"), port});
  }

  void send(std::string_view body) { asio::write(socket_, asio::buffer(make_frame(body))); }

  std::optional<std::string> read_body(std::chrono::milliseconds timeout) {
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (std::chrono::steady_clock::now() < deadline) {
      const auto n = socket_.available();
      if (n > 0) {
        std::string chunk(n, '\0');
        socket_.read_some(asio::buffer(chunk));
        pending_ += chunk;
      }
      if (pending_.size() >= kPrefixSize) {
        const auto len = read_prefix(reinterpret_cast<const unsigned char*>(pending_.data()));
        if (pending_.size() >= kPrefixSize + len) {
          std::string body = pending_.substr(kPrefixSize, len);
          pending_.erase(0, kPrefixSize + len);
          return body;
        }
      }
      std::this_thread::sleep_for(1ms);
    }
    return std::nullopt;
  }

  void subscribe(const std::string& topic) {
    send(to_body(ControlFrame{ControlFrame::Op::Subscribe, topic}));
    const auto ack = read_body(2s);
    ASSERT_TRUE(ack.has_value());
    EXPECT_EQ(*ack, to_body(ControlFrame{ControlFrame::Op::SubAck, topic}));
  }

  void close() { socket_.close(); }

 private:
  asio::io_context io_;
  tcp::socket socket_;
  std::string pending_;
};

class Collector {
 public:
  void attach(Client& c) {
    c.on_message([this](const ProtocolMessage& m) {
      std::lock_guard lock(mutex_);
      messages_.push_back(m);
      cv_.notify_all();
    });
  }

  bool wait_for_count(std::size_t n, std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    return cv_.wait_for(lock, timeout, [&] { return messages_.size() >= n; });
  }

  std::vector<ProtocolMessage> messages() {
    std::lock_guard lock(mutex_);
    return messages_;
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  std::vector<ProtocolMessage> messages_;
};

ErrorCode code_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no error thrown";
  return ErrorCode::InvalidArgument;
}

bool eventually(const std::function<bool()>& pred, std::chrono::milliseconds timeout = 2s) {
  const auto deadline = std::chrono::steady_clock::now() + timeout;
  while (std::chrono::steady_clock::now() < deadline) {
    if (pred()) return true;
    std::this_thread::sleep_for(2ms);
  }
  return pred();
}

}  // namespace

TEST(Broker, StartStopIsIdempotent) {
  Broker broker;
  EXPECT_FALSE(broker.running());
  broker.start();
  EXPECT_TRUE(broker.running());
  EXPECT_NE(broker.port(), 0);
  EXPECT_EQ(code_of([&] { broker.start(); }), ErrorCode::IllegalState);
  broker.stop();
  broker.stop();
  EXPECT_FALSE(broker.running());
}

TEST(Broker, PortInUse) {
  Broker first;
  first.start();
  BrokerOptions opts;
  opts.port = first.port();
  Broker second(opts);
  EXPECT_EQ(code_of([&] { second.start(); }), ErrorCode::AddressInUse);
}

TEST(Broker, ClientsObserveShutdown) {
  Broker broker;
  broker.start();
  Client client;
  std::atomic<int> lost{0};
  client.on_disconnect([&] { ++lost; });
  client.connect("127.0.0.1", broker.port());
  ASSERT_TRUE(eventually([&] { return broker.session_count() == 1; }));
  broker.stop();
  ASSERT_TRUE(eventually([&] { return lost.load() == 1; }));
  EXPECT_FALSE(client.connected());
  EXPECT_EQ(code_of([&] { client.publish(Command::Capture); }), ErrorCode::ConnectionLost);
}

TEST(Broker, ConnectToNothingIsConnectionLost) {
  std::uint16_t port = 0;
  {
    Broker b;
    b.start();
    port = b.port();
  }
  Client client;
  EXPECT_EQ(code_of([&] { client.connect("127.0.0.1", port, 500ms); }), ErrorCode::ConnectionLost);
}

TEST(Broker, PublishAfterCloseIsConnectionLost) {
  Broker broker;
  broker.start();
  Client client;
  client.connect("127.0.0.1", broker.port());
  client.close();
  EXPECT_EQ(code_of([&] { client.publish(Command::Capture); }), ErrorCode::ConnectionLost);
}

TEST(Broker, TenClientsAllReceive) {
  Broker broker;
  broker.start();
  std::vector<std::unique_ptr<Client>> clients;
  std::vector<std::unique_ptr<Collector>> collectors;
  for (int i = 0; i < 10; ++i) {
    clients.push_back(std::make_unique<Client>());
    collectors.push_back(std::make_unique<Collector>());
    collectors.back()->attach(*clients.back());
    clients.back()->connect("127.0.0.1", broker.port());
    clients.back()->subscribe("t");
  }
  EXPECT_EQ(broker.session_count(), 10u);
  clients[3]->publish(Command::Capture, {{"structure", "U"}}, "t");
  for (auto& c : collectors) {
    ASSERT_TRUE(c->wait_for_count(1, 2s));
    EXPECT_EQ(c->messages()[0].payload["structure"], "U");
  }
}

TEST(Broker, SubscribersReceiveThePublishersExactBytes) {
  Broker broker;
  broker.start();
  RawConn a(broker.port()), b(broker.port()), pub(broker.port());
  a.subscribe("cell");
  b.subscribe("cell");
  // Not the canonical serialization: whitespace and key order are preserved.
  const std::string body =
      R"({ "topic": "cell", "payload": {"y": 2, "x": 1}, "command": "Capture", "timestamp": 5, "msg_id": 9 })";
  pub.send(body);
  const auto ra = a.read_body(2s), rb = b.read_body(2s);
  ASSERT_TRUE(ra && rb);
  EXPECT_EQ(*ra, body);
  EXPECT_EQ(*rb, body);
  EXPECT_FALSE(pub.read_body(100ms).has_value());  // not subscribed
}

TEST(Broker, TopicsAreIsolated) {
  Broker broker;
  broker.start();
  RawConn a(broker.port()), b(broker.port());
  a.subscribe("one");
  b.subscribe("two");
  ProtocolMessage m;
  m.topic = "one";
  m.command = Command::Pickup;
  Client pub;
  pub.connect("127.0.0.1", broker.port());
  pub.publish(m);
  EXPECT_TRUE(a.read_body(2s).has_value());
  EXPECT_FALSE(b.read_body(100ms).has_value());
}

TEST(Broker, UnsubscribedClientReceivesNothing) {
  Broker broker;
  broker.start();
  Client sub, pub;
  Collector got;
  got.attach(sub);
  sub.connect("127.0.0.1", broker.port());
  pub.connect("127.0.0.1", broker.port());
  sub.subscribe("t");
  pub.publish(Command::Capture, {}, "t");
  ASSERT_TRUE(got.wait_for_count(1, 2s));
  sub.unsubscribe("t");
  pub.publish(Command::Welding, {}, "t");
  std::this_thread::sleep_for(100ms);
  EXPECT_EQ(got.messages().size(), 1u);
}

TEST(Broker, PerPublisherOrderUnderConcurrency) {
  Broker broker;
  broker.start();
  Client sub;
  Collector got;
  got.attach(sub);
  sub.connect("127.0.0.1", broker.port());
  sub.subscribe("t");

  constexpr int kPerPublisher = 100;
  std::vector<std::thread> publishers;
  for (int p = 0; p < 3; ++p) {
    publishers.emplace_back([&, p] {
      Client c;
      c.connect("127.0.0.1", broker.port());
      for (int i = 0; i < kPerPublisher; ++i) c.publish(Command::Capture, {{"pub", p}, {"seq", i}}, "t");
      std::this_thread::sleep_for(200ms);  // let the broker drain before closing
    });
  }
  for (auto& t : publishers) t.join();
  ASSERT_TRUE(got.wait_for_count(3 * kPerPublisher, 5s));
  std::map<int, int> next;
  for (const auto& m : got.messages()) {
    const int p = m.payload["pub"], seq = m.payload["seq"];
    EXPECT_EQ(seq, next[p]) << "publisher " << p;
    next[p] = seq + 1;
  }
  for (int p = 0; p < 3; ++p) EXPECT_EQ(next[p], kPerPublisher);
}

TEST(Broker, UndecodableFramesAreDropped) {
  std::mutex log_mutex;
  std::vector<std::string> log;
  BrokerOptions opts;
  opts.log = [&](const std::string& line) {
    std::lock_guard lock(log_mutex);
    log.push_back(line);
  };
  Broker broker(opts);
  broker.start();
  Client sub, pub;
  Collector got;
  got.attach(sub);
  sub.connect("127.0.0.1", broker.port());
  sub.subscribe("t");
  pub.connect("127.0.0.1", broker.port());
  pub.send_raw(make_frame("{not json"));
  pub.send_raw(make_frame(R"({"command":"Bogus","msg_id":1,"payload":{},"timestamp":1,"topic":"t"})"));
  pub.publish(Command::Pickup, {}, "t");
  ASSERT_TRUE(got.wait_for_count(1, 2s));
  std::this_thread::sleep_for(50ms);
  const auto msgs = got.messages();
  ASSERT_EQ(msgs.size(), 1u);
  EXPECT_EQ(msgs[0].command, Command::Pickup);
  std::lock_guard lock(log_mutex);
  EXPECT_EQ(log.size(), 2u);
}

TEST(Broker, OversizePrefixClosesOnlyThatSession) {
  Broker broker;
  broker.start();
  Client good, bad;
  good.connect("127.0.0.1", broker.port());
  bad.connect("127.0.0.1", broker.port());
  ASSERT_TRUE(eventually([&] { return broker.session_count() == 2; }));
  bad.send_raw(std::string("\x7f\x00\x00\x00", 4));
  ASSERT_TRUE(eventually([&] { return broker.session_count() == 1; }));
  EXPECT_TRUE(good.connected());
}

TEST(Broker, ClientPublishStampsIncreasingIds) {
  Broker broker;
  broker.start();
  Client sub, pub;
  Collector got;
  got.attach(sub);
  sub.connect("127.0.0.1", broker.port());
  sub.subscribe("t");
  pub.connect("127.0.0.1", broker.port());
  const auto first = pub.publish(Command::Capture, {}, "t");
  const auto second = pub.publish(Command::Capture, {}, "t");
  EXPECT_EQ(first, 1u);
  EXPECT_EQ(second, 2u);
  ASSERT_TRUE(got.wait_for_count(2, 2s));
  EXPECT_EQ(got.messages()[1].msg_id, 2u);
  EXPECT_GT(got.messages()[0].timestamp, 0);
}

TEST(WebSocketGateway, TextFramesCarryBusBodies) {
  BrokerOptions opts;
  opts.ws_port = 0;
  Broker broker(opts);
  broker.start();
  ASSERT_TRUE(broker.ws_port().has_value());
  ASSERT_NE(*broker.ws_port(), 0);

  asio::io_context io;
  websocket::stream<tcp::socket> ws(io);
  ws.next_layer().connect({asio::ip::make_address("127.0.0.1"), *broker.ws_port()});
  ws.handshake("127.0.0.1", "/");
  ws.text(true);
  ws.write(asio::buffer(to_body(ControlFrame{ControlFrame::Op::Subscribe, "cell"})));

  boost::beast::flat_buffer buf;
  ws.read(buf);
  EXPECT_TRUE(ws.got_text());
  EXPECT_EQ(boost::beast::buffers_to_string(buf.data()), to_body(ControlFrame{ControlFrame::Op::SubAck, "cell"}));
  buf.consume(buf.size());

  // TCP -> WebSocket
  Client tcp_client;
  Collector got;
  got.attach(tcp_client);
  tcp_client.connect("127.0.0.1", broker.port());
  tcp_client.subscribe("cell");
  ProtocolMessage m;
  m.topic = "cell";
  m.command = Command::AnswerCapture;
  m.payload = {{"corner", {1, 2, 3}}};
  m.msg_id = 7;
  m.timestamp = 11;
  tcp_client.publish(m);
  ws.read(buf);
  EXPECT_EQ(boost::beast::buffers_to_string(buf.data()), to_body(m));
  buf.consume(buf.size());

  // WebSocket -> TCP
  ProtocolMessage from_ws = m;
  from_ws.command = Command::Capture;
  from_ws.msg_id = 8;
  ws.write(asio::buffer(to_body(from_ws)));
  ASSERT_TRUE(got.wait_for_count(2, 2s));
  EXPECT_EQ(got.messages()[1], from_ws);
  ws.read(buf);  // the websocket session is subscribed too
  EXPECT_EQ(from_body(boost::beast::buffers_to_string(buf.data())), from_ws);
  ws.close(websocket::close_code::normal);
}
