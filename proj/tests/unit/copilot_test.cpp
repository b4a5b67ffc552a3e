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

#include "haco/copilot/protocol.hpp"
#include "haco/copilot/server.hpp"
#include "haco/copilot/session.hpp"
#include "haco/learner/losses.hpp"

#include "test_util.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include <random>
#include <sstream>
#include <thread>

using namespace haco;
using namespace haco::copilot;
using nlohmann::json;

namespace
{

harness::RunConfig session_config()
{
  harness::RunConfig cfg;
  cfg.train.network.hidden = {16, 16};
  cfg.train.batch_size = 16;
  cfg.train.learning_starts = 32;
  cfg.train.steps_per_iteration = 20;
  cfg.train.gradient_steps_per_iteration = 20;
  cfg.train.buffer_capacity = 2000;
  cfg.train_map_seeds = {0, 1};
  cfg.test_map_seeds = {1000};
  cfg.total_env_steps = 1000;
  return cfg;
}

SessionConfig unlimited()
{
  SessionConfig s;
  s.queue_capacity = 4096;
  return s;
}

InputMsg wire(const InputMsg & in) { return std::get<InputMsg>(parse_message(to_json(in).dump())); }

/// Drives a core with the scripted guardian acting as the console: after
/// each frame it judges the agent's proposal and answers through the wire
/// format, acknowledging that frame.
void scripted_console(SessionCore & core, guardian::Guardian & g, int ticks)
{
  std::optional<FrameMsg> last;
  for (int k = 0; k < ticks; ++k) {
    if (last) {
      if (last->episode_start) {
        g.reset_episode();
      }
      const auto & tr = core.trainer();
      const auto d = g.decide(tr.env().ego(), last->agent_action, tr.env().map());
      InputMsg in;
      in.tick = last->tick;
      in.takeover = d.intervene;
      if (d.intervene) {
        in.steering = (*d.expert_action)(0);
        in.throttle = (*d.expert_action)(1);
      }
      core.submit_input(wire(in));
    }
    last = core.tick();
    REQUIRE(last);
  }
}

bool same_networks(const learner::LearnerState & a, const learner::LearnerState & b)
{
  return numeric::flatten(a.policy) == numeric::flatten(b.policy) &&
         numeric::flatten(a.q1) == numeric::flatten(b.q1) &&
         numeric::flatten(a.q2) == numeric::flatten(b.q2) &&
         numeric::flatten(a.qint) == numeric::flatten(b.qint) &&
         numeric::flatten(a.q1_target) == numeric::flatten(b.q1_target) && a.log_alpha == b.log_alpha;
}

}  // namespace

TEST_CASE("protocol: input round trip and clamping")
{
  InputMsg in{7, true, 1.5, -3.0};
  const json j = to_json(in);
  CHECK(j.at("v") == kProtocolVersion);
  CHECK(j.at("type") == "input");
  CHECK_FALSE(validate_input(j));
  const auto back = std::get<InputMsg>(parse_message(j.dump()));
  CHECK(back.tick == 7);
  CHECK(back.takeover);
  CHECK(back.steering == 1.0);
  CHECK(back.throttle == -1.0);
}

TEST_CASE("protocol: malformed messages are rejected")
{
  CHECK_THROWS_AS(parse_message("{not json"), ProtocolError);
  CHECK_THROWS_AS(parse_message(R"({"v":2,"type":"input","tick":0,"takeover":false,"steering":0,"throttle":0})"), ProtocolError);
  CHECK_THROWS_AS(parse_message(R"({"v":1,"type":"warp"})"), ProtocolError);
  CHECK_THROWS_AS(parse_message(R"({"v":1,"type":"input","tick":-1,"takeover":false,"steering":0,"throttle":0})"), ProtocolError);
  CHECK_THROWS_AS(parse_message(R"({"v":1,"type":"input","tick":0,"takeover":1,"steering":0,"throttle":0})"), ProtocolError);
  CHECK_THROWS_AS(parse_message(R"({"v":1,"type":"input","tick":0,"takeover":false,"throttle":0})"), ProtocolError);
  CHECK(std::holds_alternative<HelloMsg>(parse_message(R"({"v":1,"type":"hello","role":"console"})")));
  CHECK(std::holds_alternative<ByeMsg>(parse_message(R"({"v":1,"type":"bye"})")));
}

TEST_CASE("protocol: frames validate and survive a round trip")
{
  env::DrivingEnv env;
  env.reset(test::straight_map(80.0, {test::obstacle_at(30.0, 1.0, 0.6)}));
  FrameStats stats{0.25, 1.5, 4, 10};
  const auto f = make_frame(env, 3, 1, env::Action(0.1, 0.2), env::Action(-0.5, 1.0), true, stats);
  CHECK(f.lidar.size() == static_cast<std::size_t>(env.config().lidar_rays));
  CHECK(f.centerline.size() <= 257);
  CHECK(f.centerline.back() == env.map().centerline.back());
  const json j = to_json(f);
  CHECK_FALSE(validate_frame(j));
  const auto back = std::get<FrameMsg>(parse_message(j.dump()));
  CHECK(to_json(back) == j);

  json bad = j;
  bad["ego"]["speed"] = -1.0;
  CHECK(validate_frame(bad));
  bad = j;
  bad["agent_action"]["steering"] = 1.5;
  CHECK(validate_frame(bad));
  bad = j;
  bad["centerline"][0] = json::array({1.0});
  CHECK(validate_frame(bad));
  bad = j;
  bad.erase("stats");
  CHECK(validate_frame(bad));
}

TEST_CASE("bounded queue drops the oldest and counts")
{
  BoundedQueue<int> q(3);
  for (int i = 0; i < 5; ++i) {
    q.push(i);
  }
  CHECK(q.dropped() == 2);
  const auto all = q.drain();
  CHECK(all == std::vector<int>{2, 3, 4});
  CHECK_FALSE(q.try_pop());
}

TEST_CASE("session: paused while disconnected")
{
  SessionCore core(session_config(), unlimited());
  CHECK_FALSE(core.tick());
  CHECK(core.trainer().env_steps() == 0);
  core.set_connected(true);
  CHECK(core.tick());
  core.set_connected(false);
  CHECK_FALSE(core.tick());
  CHECK(core.trainer().env_steps() == 1);
  core.set_connected(true);
  const auto f = core.tick();
  REQUIRE(f);
  CHECK(f->tick == 1);
  CHECK(core.counters().paused_ticks == 2);
}

TEST_CASE("session: takeover held for 5 ticks has one rising cost")
{
  SessionCore core(session_config(), unlimited());
  core.set_connected(true);
  core.tick();
  for (int k = 0; k < 5; ++k) {
    core.submit_input({core.next_tick() - 1, true, 0.3, 0.8});
    core.tick();
  }
  core.submit_input({core.next_tick() - 1, false, 0.3, 0.8});
  core.tick();
  const auto & e = core.entries();
  REQUIRE(e.size() == 7);
  int nonzero = 0;
  for (std::size_t i = 1; i <= 5; ++i) {
    CHECK(e[i].takeover);
    CHECK(e[i].applied == env::Action(0.3, 0.8));
    nonzero += e[i].rising_cost != 0.0 ? 1 : 0;
  }
  CHECK(nonzero == 1);
  CHECK(e[1].rising_cost > 0.0);
  CHECK_FALSE(e[6].takeover);
  CHECK(e[6].applied == e[6].agent_action);
}

TEST_CASE("session: stale inputs are dropped and the takeover state persists")
{
  SessionCore core(session_config(), unlimited());
  core.set_connected(true);
  for (int k = 0; k < 4; ++k) {
    core.tick();
  }
  core.submit_input({3, true, 0.0, 1.0});
  core.tick();
  CHECK(core.entries().back().takeover);
  core.submit_input({1, false, 0.0, 0.0});
  core.tick();
  CHECK(core.entries().back().takeover);
  CHECK(core.counters().stale_inputs == 1);
  core.tick();
  CHECK(core.entries().back().takeover);
}

TEST_CASE("session: freshest input wins")
{
  SessionCore core(session_config(), unlimited());
  core.set_connected(true);
  core.tick();
  core.tick();
  core.submit_input({1, true, 0.5, 0.5});
  core.submit_input({1, true, -0.5, 0.5});
  core.submit_input({0, true, 0.9, 0.9});
  core.tick();
  CHECK(core.entries().back().applied == env::Action(-0.5, 0.5));
}

TEST_CASE("session: full input queue drops the oldest")
{
  SessionConfig s;
  s.queue_capacity = 2;
  SessionCore core(session_config(), s);
  core.set_connected(true);
  core.tick();
  for (int i = 0; i < 5; ++i) {
    core.submit_input({0, i % 2 == 0, 0.0, 1.0});
  }
  core.tick();
  CHECK(core.counters().input_drops == 3);
  CHECK(core.entries().back().takeover);
}

TEST_CASE("session: steering and throttle are ignored without takeover")
{
  SessionCore core(session_config(), unlimited());
  core.set_connected(true);
  core.tick();
  core.submit_input({0, false, 1.0, -1.0});
  core.tick();
  const auto & e = core.entries().back();
  CHECK_FALSE(e.takeover);
  CHECK(e.applied == e.agent_action);
  CHECK(e.rising_cost == 0.0);
}

TEST_CASE("session: no takeover matches a never-intervening scripted run")
{
  const auto cfg = session_config();
  SessionCore core(cfg, unlimited());
  core.update_gate = [](int) { return true; };
  core.set_connected(true);
  for (int k = 0; k < 200; ++k) {
    core.tick();
  }
  auto scripted = make_session_trainer(cfg);
  guardian::ConstantGuardian never(false, cfg.env);
  learner::run_training(*scripted, never, 200);
  CHECK(core.trainer().buffer() == scripted->buffer());
  CHECK(same_networks(core.trainer().learner(), scripted->learner()));
}

TEST_CASE("session: a budget of zero defers every update")
{
  SessionConfig s = unlimited();
  s.update_budget = std::chrono::microseconds(0);
  SessionCore core(session_config(), s);
  core.set_connected(true);
  for (int k = 0; k < 60; ++k) {
    core.tick();
  }
  CHECK(core.trainer().learner().gradient_steps == 0);
  CHECK(core.counters().deferred_updates > 0);
}

TEST_CASE("session log: N ticks give N entries and a header")
{
  std::stringstream log;
  SessionCore core(session_config(), unlimited(), &log);
  core.set_connected(true);
  for (int k = 0; k < 25; ++k) {
    core.tick();
  }
  const std::string text = log.str();
  CHECK(std::count(text.begin(), text.end(), '\n') == 26);
  const auto parsed = read_session_log(log);
  CHECK(parsed.entries.size() == 25);
  CHECK(parsed.config_hash == harness::config_hash(session_config()));
  CHECK(parsed.entries.back().tick == 24);
}

TEST_CASE("replay: scripted-guardian session reproduces buffer and checkpoint")
{
  const auto cfg = session_config();
  std::stringstream log;
  SessionCore core(cfg, unlimited(), &log);
  core.set_connected(true);
  int budget_calls = 0;
  core.update_gate = [&](int done) { return done < 7 + (budget_calls++ % 5); };
  guardian::ScriptedGuardian g(cfg.env, cfg.effective_guardian());
  scripted_console(core, g, 600);
  CHECK(core.trainer().total_takeover_steps() > 0);
  CHECK(core.trainer().learner().gradient_steps > 0);

  const auto parsed = read_session_log(log);
  const auto a = replay_session(parsed, cfg);
  const auto b = replay_session(parsed, cfg);
  CHECK(a->buffer().encode() == core.trainer().buffer().encode());
  CHECK(learner::to_checkpoint(a->learner(), 1) == learner::to_checkpoint(core.trainer().learner(), 1));
  CHECK(a->buffer().encode() == b->buffer().encode());
}

TEST_CASE("replay: empty log and config mismatch")
{
  const auto cfg = session_config();
  std::stringstream log;
  write_session_header(log, cfg);
  const auto parsed = read_session_log(log);
  const auto t = replay_session(parsed, cfg);
  CHECK(t->buffer().size() == 0);
  CHECK(t->learner().gradient_steps == 0);
  auto other = cfg;
  other.seed = 9;
  CHECK_THROWS_AS(replay_session(parsed, other), harness::ConfigError);
}

TEST_CASE("replay: a tampered log is detected")
{
  const auto cfg = session_config();
  std::stringstream log;
  SessionCore core(cfg, unlimited(), &log);
  core.set_connected(true);
  for (int k = 0; k < 10; ++k) {
    core.tick();
  }
  auto parsed = read_session_log(log);
  parsed.entries[4].agent_action(0) += 1e-9;
  CHECK_THROWS_AS(replay_session(parsed, cfg), SessionLogError);
  std::istringstream bad(R"({"v":7,"type":"session","config_hash":"00","config":{}})" "\n");
  CHECK_THROWS_AS(read_session_log(bad), SessionLogError);
}

TEST_CASE("console conformance: 1000 ticks of toggled takeovers")
{
  const auto cfg = session_config();
  SessionCore core(cfg, unlimited());
  core.set_connected(true);
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> wide(-1.5, 1.5);
  std::bernoulli_distribution toggle(0.15);
  bool takeover = false;
  int bad_frames = 0;
  int bad_inputs = 0;
  int out_of_range = 0;
  std::int64_t last_tick = -1;
  std::vector<bool> starts_episode{true};
  for (int k = 0; k < 1000; ++k) {
    if (k > 0) {
      if (toggle(rng)) {
        takeover = !takeover;
      }
      const double s = wide(rng);
      const double t = wide(rng);
      const json in = to_json(InputMsg{k - 1, takeover, s, t});
      bad_inputs += validate_input(in) ? 1 : 0;
      core.submit_input(std::get<InputMsg>(parse_message(in.dump())));
    }
    const auto f = core.tick();
    REQUIRE(f);
    bad_frames += validate_frame(to_json(*f)) ? 1 : 0;
    CHECK(f->tick > last_tick);
    last_tick = f->tick;
    starts_episode.push_back(f->episode_start);
    const auto & e = core.entries().back();
    out_of_range += e.applied.cwiseAbs().maxCoeff() > 1.0 ? 1 : 0;
  }
  CHECK(bad_frames == 0);
  CHECK(bad_inputs == 0);
  CHECK(out_of_range == 0);

  const auto & e = core.entries();
  int violations = 0;
  int runs = 0;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const bool rising = e[i].takeover && (starts_episode[i] || !e[i - 1].takeover);
    if (rising) {
      ++runs;
      const double expected = learner::intervention_cost(e[i].agent_action, e[i].applied).value;
      violations += e[i].rising_cost == expected ? 0 : 1;
    } else {
      violations += e[i].rising_cost == 0.0 ? 0 : 1;
    }
  }
  CHECK(runs > 10);
  CHECK(violations == 0);
}

TEST_CASE("server: websocket session end to end")
{
  namespace net = boost::asio;
  namespace beast = boost::beast;
  namespace websocket = beast::websocket;

  const auto cfg = session_config();
  SessionConfig s = unlimited();
  s.tick_rate = 100.0;
  SessionCore core(cfg, s);
  ServerOptions opts;
  opts.port = 0;
  opts.max_ticks = 30;
  CopilotServer server(core, s, opts);
  const auto port = server.port();
  std::thread loop([&] { server.run(); });

  net::io_context ioc;
  net::ip::tcp::socket sock(ioc);
  sock.connect({net::ip::make_address("127.0.0.1"), port});
  websocket::stream<net::ip::tcp::socket> ws(std::move(sock));
  ws.handshake("127.0.0.1", "/");
  ws.write(net::buffer(to_json(HelloMsg{"console", 0.0}).dump()));

  int frames = 0;
  int hellos = 0;
  int byes = 0;
  int invalid = 0;
  std::int64_t last = -1;
  beast::flat_buffer buf;
  beast::error_code ec;
  while (true) {
    ws.read(buf, ec);
    if (ec) {
      break;
    }
    const std::string text = beast::buffers_to_string(buf.data());
    buf.consume(buf.size());
    const json j = json::parse(text);
    if (j.at("type") == "frame") {
      invalid += validate_frame(j) ? 1 : 0;
      ++frames;
      last = j.at("tick").get<std::int64_t>();
      ws.write(net::buffer(to_json(InputMsg{last, frames > 10 && frames < 15, 0.0, 1.0}).dump()));
    } else if (j.at("type") == "hello") {
      ++hellos;
    } else if (j.at("type") == "bye") {
      ++byes;
      break;
    }
  }
  loop.join();
  CHECK(hellos == 1);
  CHECK(byes == 1);
  CHECK(frames == 30);
  CHECK(invalid == 0);
  CHECK(last == 29);
  CHECK(core.trainer().total_takeover_steps() > 0);
  CHECK(server.timing().loops >= 30);
}
