#include "traitgrid/gateway.hpp"

#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "traitgrid/error.hpp"

namespace traitgrid {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

class WsConnection;

// Everything that touches one Session runs on its strand.
struct Runtime {
  Runtime(net::io_context& ioc, std::shared_ptr<Session> s) : strand(net::make_strand(ioc)), timer(strand), session(std::move(s)) {}

  net::strand<net::io_context::executor_type> strand;
  net::steady_timer timer;
  std::shared_ptr<Session> session;
  std::vector<std::weak_ptr<WsConnection>> clients;
  bool ticking = false;
  bool finalized = false;
};

class WsConnection : public std::enable_shared_from_this<WsConnection> {
 public:
  explicit WsConnection(tcp::socket socket) : ws_(std::move(socket)) {}

  template <class Request, class OnOpen, class OnFrame>
  void open(const Request& req, OnOpen on_open, OnFrame on_frame) {
    on_frame_ = std::move(on_frame);
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.text(true);
    ws_.async_accept(req, [self = shared_from_this(), on_open = std::move(on_open)](beast::error_code ec) {
      if (ec) return;
      on_open(self);
      self->read();
    });
  }

  void send(std::string text) {
    net::post(ws_.get_executor(), [self = shared_from_this(), text = std::move(text)]() mutable {
      self->queue_.push_back(std::move(text));
      if (self->queue_.size() == 1) self->write();
    });
  }

  void close() {
    net::post(ws_.get_executor(), [self = shared_from_this()] {
      self->closing_ = true;
      if (self->queue_.empty()) self->do_close();
    });
  }

 private:
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  std::function<void(std::shared_ptr<WsConnection>, std::string)> on_frame_;
  bool closing_ = false;

  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->on_frame_(self, std::move(text));
      self->read();
    });
  }

  void write() {
    ws_.async_write(net::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) {
        self->write();
      } else if (self->closing_) {
        self->do_close();
      }
    });
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }
};

std::string error_json(ErrorCode code, const std::string& message) {
  return json{{"error", to_string(code)}, {"message", message}}.dump();
}

}  // namespace

struct GatewayServer::Impl : std::enable_shared_from_this<GatewayServer::Impl> {
  Impl(std::shared_ptr<SessionManager> m, GatewayOptions o) : manager(std::move(m)), options(std::move(o)), acceptor(ioc) {}

  std::shared_ptr<SessionManager> manager;
  GatewayOptions options;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::optional<net::executor_work_guard<net::io_context::executor_type>> work;
  std::vector<std::thread> threads;
  std::mutex mu;
  std::map<std::string, std::shared_ptr<Runtime>> runtimes;
  std::uint16_t bound_port = 0;
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  bool stopped = false;

  std::shared_ptr<Runtime> runtime(const std::string& id) {
    auto session = manager->session(id);  // throws UnknownSession
    std::lock_guard lock(mu);
    auto& rt = runtimes[id];
    if (!rt) rt = std::make_shared<Runtime>(ioc, std::move(session));
    return rt;
  }

  static void broadcast(Runtime& rt, const std::vector<ProtocolMessage>& msgs) {
    if (msgs.empty()) return;
    std::vector<std::shared_ptr<WsConnection>> live;
    for (auto it = rt.clients.begin(); it != rt.clients.end();) {
      if (auto c = it->lock()) {
        live.push_back(std::move(c));
        ++it;
      } else {
        it = rt.clients.erase(it);
      }
    }
    for (const auto& m : msgs) {
      const std::string text = m.dump();
      for (const auto& c : live) c->send(text);
    }
  }

  // Runs on rt.strand.
  void tick(const std::shared_ptr<Runtime>& rt) {
    if (rt->finalized) return;
    broadcast(*rt, rt->session->advance());
    if (rt->session->complete()) finish(rt);
  }

  // Runs on rt.strand.
  void finish(const std::shared_ptr<Runtime>& rt) {
    if (rt->finalized) return;
    rt->finalized = true;
    rt->ticking = false;
    rt->timer.cancel();
    try {
      const FactorReport rep = manager->finalize(rt->session->id());
      broadcast(*rt, {rt->session->make_message(MessageKind::FinalReport, rep.to_json())});
    } catch (const Error& e) {
      broadcast(*rt, {rt->session->make_message(MessageKind::Error,
                                                json{{"code", to_string(e.code())}, {"message", e.what()}})});
    }
  }

  void schedule(const std::shared_ptr<Runtime>& rt) {
    const auto period = std::chrono::microseconds(1'000'000 / std::max(1, rt->session->config().tick_rate));
    rt->timer.expires_after(period);
    rt->timer.async_wait([self = shared_from_this(), rt](beast::error_code ec) {
      if (ec || !rt->ticking) return;
      self->tick(rt);
      if (rt->ticking) self->schedule(rt);
    });
  }

  void on_frame(const std::shared_ptr<Runtime>& rt, const std::shared_ptr<WsConnection>& conn, std::string text) {
    net::post(rt->strand, [self = shared_from_this(), rt, conn, text = std::move(text)] {
      ProtocolMessage msg;
      try {
        msg = ProtocolMessage::parse(text);
      } catch (const Error& e) {
        conn->send(rt->session->make_message(MessageKind::Error, json{{"code", to_string(e.code())}, {"message", e.what()}})
                       .dump());
        return;
      }
      broadcast(*rt, rt->session->handle_message(msg));
      if (msg.kind == MessageKind::Join && self->options.real_time && !rt->ticking && !rt->finalized) {
        rt->ticking = true;
        self->schedule(rt);
      }
    });
  }

  void open_websocket(tcp::socket socket, http::request<http::string_body> req, const std::string& id) {
    auto conn = std::make_shared<WsConnection>(std::move(socket));
    std::shared_ptr<Runtime> rt;
    std::optional<Error> failure;
    try {
      rt = runtime(id);
    } catch (const Error& e) {
      failure = e;
    }
    if (!rt) {
      const std::string text = json{{"kind", "Error"},
                                    {"seq", 0},
                                    {"payload", {{"code", to_string(failure->code())}, {"message", failure->what()}}}}
                                   .dump();
      conn->open(
          req,
          [text](const std::shared_ptr<WsConnection>& c) {
            c->send(text);
            c->close();
          },
          [](const std::shared_ptr<WsConnection>&, std::string) {});
      return;
    }
    auto self = shared_from_this();
    conn->open(
        req,
        [self, rt](const std::shared_ptr<WsConnection>& c) {
          net::post(rt->strand, [rt, c] {
            rt->clients.push_back(c);
            broadcast(*rt, rt->session->drain());
          });
        },
        [self, rt](const std::shared_ptr<WsConnection>& c, std::string text) { self->on_frame(rt, c, std::move(text)); });
  }

  http::response<http::string_body> route(const http::request<http::string_body>& req) {
    http::response<http::string_body> res;
    res.version(req.version());
    res.keep_alive(false);
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    const std::string target(req.target());
    auto reply = [&](http::status status, std::string body) {
      res.result(status);
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    try {
      if (req.method() == http::verb::get && target == "/health") return reply(http::status::ok, R"({"ok":true})");
      if (req.method() == http::verb::post && target == "/sessions") {
        json body = req.body().empty() ? json::object() : json::parse(req.body(), nullptr, false);
        if (body.is_discarded() || !body.is_object()) {
          return reply(http::status::bad_request, error_json(ErrorCode::ParseError, "body must be a JSON object"));
        }
        std::optional<std::uint64_t> seed;
        if (body.contains("seed")) seed = body["seed"].get<std::uint64_t>();
        const std::string id = manager->create_session(body.value("participant", std::string()), seed,
                                                       body.value("allow_repeat", false));
        return reply(http::status::created, json{{"session_id", id}}.dump());
      }
      if (req.method() == http::verb::get && target.rfind("/report/", 0) == 0) {
        const std::string id = target.substr(8);
        manager->session(id);
        if (const auto rep = manager->report_for(id)) return reply(http::status::ok, rep->to_json().dump());
        return reply(http::status::conflict, error_json(ErrorCode::IncompleteSession, "session " + id + " is still running"));
      }
      return reply(http::status::not_found, error_json(ErrorCode::UnknownSession, "no route for " + target));
    } catch (const Error& e) {
      http::status status = http::status::bad_request;
      if (e.code() == ErrorCode::UnknownSession) status = http::status::not_found;
      if (e.code() == ErrorCode::DuplicateParticipant) status = http::status::conflict;
      return reply(status, error_json(e.code(), e.what()));
    } catch (const json::exception& e) {
      return reply(http::status::bad_request, error_json(ErrorCode::ParseError, e.what()));
    }
  }

  void serve_http(tcp::socket socket) {
    struct State {
      beast::tcp_stream stream;
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::response<http::string_body> res;
      explicit State(tcp::socket s) : stream(std::move(s)) {}
    };
    auto st = std::make_shared<State>(std::move(socket));
    st->stream.expires_after(std::chrono::seconds(30));
    http::async_read(st->stream, st->buffer, st->req, [self = shared_from_this(), st](beast::error_code ec, std::size_t) {
      if (ec) return;
      const std::string target(st->req.target());
      if (websocket::is_upgrade(st->req)) {
        st->stream.expires_never();
        if (target.rfind("/play/", 0) == 0) {
          self->open_websocket(st->stream.release_socket(), std::move(st->req), target.substr(6));
          return;
        }
      }
      st->res = self->route(st->req);
      http::async_write(st->stream, st->res, [st](beast::error_code, std::size_t) {
        beast::error_code ignored;
        st->stream.socket().shutdown(tcp::socket::shutdown_send, ignored);
      });
    });
  }

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      self->serve_http(std::move(socket));
      self->accept();
    });
  }
};

GatewayServer::GatewayServer(std::shared_ptr<SessionManager> manager, GatewayOptions options)
    : impl_(std::make_shared<Impl>(std::move(manager), std::move(options))) {}

GatewayServer::~GatewayServer() { stop(); }

std::uint16_t GatewayServer::start() {
  Impl& im = *impl_;
  const tcp::endpoint ep(net::ip::make_address(im.options.host), im.options.port);
  im.acceptor.open(ep.protocol());
  im.acceptor.set_option(net::socket_base::reuse_address(true));
  im.acceptor.bind(ep);
  im.acceptor.listen(net::socket_base::max_listen_connections);
  im.bound_port = im.acceptor.local_endpoint().port();
  im.work.emplace(net::make_work_guard(im.ioc));
  im.accept();
  for (int i = 0; i < std::max(1, im.options.threads); ++i) im.threads.emplace_back([&im] { im.ioc.run(); });
  return im.bound_port;
}

void GatewayServer::wait() {
  std::unique_lock lock(impl_->stop_mu);
  impl_->stop_cv.wait(lock, [this] { return impl_->stopped; });
}

void GatewayServer::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->stop_mu);
    if (impl_->stopped) return;
    impl_->stopped = true;
  }
  impl_->stop_cv.notify_all();
  net::post(impl_->ioc, [im = impl_.get()] {
    beast::error_code ignored;
    im->acceptor.close(ignored);
  });
  impl_->work.reset();
  impl_->ioc.stop();
  for (auto& t : impl_->threads) {
    if (t.joinable()) t.join();
  }
  impl_->threads.clear();
}

std::uint16_t GatewayServer::port() const { return impl_->bound_port; }

void GatewayServer::advance_session(const std::string& session_id) {
  auto rt = impl_->runtime(session_id);
  std::promise<void> done;
  net::post(rt->strand, [im = impl_.get(), rt, &done] {
    im->tick(rt);
    done.set_value();
  });
  done.get_future().wait();
}

}  // namespace traitgrid
