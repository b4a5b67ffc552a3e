// Copyright 2026 The haco-copilot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "haco/copilot/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include <deque>
#include <mutex>
#include <thread>

namespace haco::copilot
{

namespace net = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace
{

class Connection : public std::enable_shared_from_this<Connection>
{
public:
  Connection(tcp::socket socket, SessionCore & core, double tick_rate, std::size_t capacity, bool busy)
  : ws_(std::move(socket)), core_(core), tick_rate_(tick_rate), capacity_(capacity), busy_(busy)
  {
  }

  std::function<void()> on_close;

  void start()
  {
    ws_.text(true);
    ws_.async_accept([self = shared_from_this()](beast::error_code ec) {
      if (ec) {
        self->close();
        return;
      }
      if (self->busy_) {
        self->send(to_json(ByeMsg{"another console is connected"}).dump());
        self->closing_ = true;
        return;
      }
      self->read();
    });
  }

  void send(std::string text)
  {
    if (writes_.size() >= capacity_) {
      writes_.pop_front();
      ++dropped_;
    }
    writes_.push_back(std::move(text));
    if (!writing_) {
      write_next();
    }
  }

  void close()
  {
    if (closed_) {
      return;
    }
    closed_ = true;
    if (greeted_) {
      core_.set_connected(false);
    }
    beast::error_code ec;
    ws_.next_layer().shutdown(tcp::socket::shutdown_both, ec);
    ws_.next_layer().close(ec);
    if (on_close) {
      on_close();
    }
  }

  bool greeted() const { return greeted_ && !closed_; }

private:
  void read()
  {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      const std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->handle(text);
      if (!self->closed_ && !self->closing_) {
        self->read();
      }
    });
  }

  void handle(const std::string & text)
  {
    Message m;
    try {
      m = parse_message(text);
    } catch (const ProtocolError & e) {
      spdlog::warn("console message rejected: {}", e.what());
      return;
    }
    if (const auto * hello = std::get_if<HelloMsg>(&m)) {
      if (!greeted_) {
        greeted_ = true;
        spdlog::info("console connected ({})", hello->role);
        send(to_json(HelloMsg{"server", tick_rate_}).dump());
        core_.set_connected(true);
      }
    } else if (const auto * in = std::get_if<InputMsg>(&m)) {
      if (greeted_) {
        core_.submit_input(*in);
      }
    } else if (std::holds_alternative<ByeMsg>(m)) {
      spdlog::info("console said bye");
      closing_ = true;
      core_.set_connected(false);
      greeted_ = false;
      ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->close(); });
    }
  }

  void write_next()
  {
    if (writes_.empty() || closed_) {
      writing_ = false;
      if (closing_ && busy_) {
        close();
      }
      return;
    }
    writing_ = true;
    current_ = std::move(writes_.front());
    writes_.pop_front();
    ws_.async_write(net::buffer(current_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->write_next();
    });
  }

  websocket::stream<tcp::socket> ws_;
  SessionCore & core_;
  double tick_rate_;
  std::size_t capacity_;
  bool busy_;
  beast::flat_buffer buffer_;
  std::deque<std::string> writes_;
  std::string current_;
  bool writing_ = false;
  bool greeted_ = false;
  bool closing_ = false;
  bool closed_ = false;
  std::uint64_t dropped_ = 0;
};

}  // namespace

struct CopilotServer::Impl
{
  Impl(SessionCore & c, SessionConfig s, ServerOptions o)
  : core(c), scfg(s), opts(std::move(o)), acceptor(ioc), guard(net::make_work_guard(ioc))
  {
    const tcp::endpoint ep(net::ip::make_address(opts.address), opts.port);
    acceptor.open(ep.protocol());
    acceptor.set_option(net::socket_base::reuse_address(true));
    acceptor.bind(ep);
    acceptor.listen();
  }

  void accept()
  {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        return;
      }
      const bool busy = static_cast<bool>(active);
      auto conn = std::make_shared<Connection>(std::move(socket), core, scfg.tick_rate, scfg.queue_capacity, busy);
      if (!busy) {
        active = conn;
        conn->on_close = [this, raw = conn.get()] {
          if (active.get() == raw) {
            active.reset();
            spdlog::info("console disconnected; session paused");
          }
        };
      }
      conn->start();
      accept();
    });
  }

  void flush_frames()
  {
    auto frames = core.frames().drain();
    if (!active || !active->greeted()) {
      return;
    }
    for (const auto & f : frames) {
      active->send(to_json(f).dump());
    }
  }

  SessionCore & core;
  SessionConfig scfg;
  ServerOptions opts;
  net::io_context ioc;
  tcp::acceptor acceptor;
  net::executor_work_guard<net::io_context::executor_type> guard;
  std::shared_ptr<Connection> active;
  std::atomic<bool> stopping{false};
  mutable std::mutex timing_mutex;
  TickTiming timing;
};

CopilotServer::CopilotServer(SessionCore & core, SessionConfig scfg, ServerOptions opts)
: impl_(std::make_unique<Impl>(core, scfg, std::move(opts)))
{
}

CopilotServer::~CopilotServer() { stop(); }

unsigned short CopilotServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void CopilotServer::stop() { impl_->stopping = true; }

TickTiming CopilotServer::timing() const
{
  std::lock_guard lock(impl_->timing_mutex);
  return impl_->timing;
}

void CopilotServer::run()
{
  auto & im = *impl_;
  im.accept();
  std::thread io([&im] { im.ioc.run(); });
  using clock = std::chrono::steady_clock;
  const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / im.scfg.tick_rate));
  auto next = clock::now() + period;
  std::int64_t emitted = 0;
  double jitter_sum = 0.0;
  while (!im.stopping && (im.opts.max_ticks <= 0 || emitted < im.opts.max_ticks)) {
    std::this_thread::sleep_until(next);
    const double late_ms = std::chrono::duration<double, std::milli>(clock::now() - next).count();
    if (im.core.tick()) {
      ++emitted;
      net::post(im.ioc, [&im] { im.flush_frames(); });
    }
    {
      std::lock_guard lock(im.timing_mutex);
      ++im.timing.loops;
      im.timing.max_jitter_ms = std::max(im.timing.max_jitter_ms, late_ms);
      jitter_sum += late_ms;
      im.timing.mean_jitter_ms = jitter_sum / static_cast<double>(im.timing.loops);
    }
    next += period;
    if (clock::now() > next + period) {
      next = clock::now() + period;
    }
  }
  net::post(im.ioc, [&im] {
    if (im.active) {
      im.active->send(to_json(ByeMsg{"session over"}).dump());
    }
  });
  std::this_thread::sleep_for(std::chrono::milliseconds(50));
  net::post(im.ioc, [&im] {
    beast::error_code ec;
    im.acceptor.close(ec);
    if (im.active) {
      im.active->close();
    }
    im.guard.reset();
  });
  io.join();
  const auto t = timing();
  spdlog::info("session stopped after {} ticks; max tick jitter {:.2f} ms, mean {:.2f} ms", emitted, t.max_jitter_ms, t.mean_jitter_ms);
}

}  // namespace haco::copilot
