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

#include "haco/numeric/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <iterator>

namespace haco::numeric
{

namespace
{

constexpr char kMagic[8] = {'H', 'A', 'C', 'O', 'C', 'K', 'P', 'T'};

class Writer
{
public:
  void bytes(const void * data, std::size_t n)
  {
    const auto * p = static_cast<const std::uint8_t *>(data);
    out_.insert(out_.end(), p, p + n);
  }
  void u64(std::uint64_t v) { bytes(&v, sizeof v); }
  void i64(std::int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string & s)
  {
    u64(s.size());
    bytes(s.data(), s.size());
  }
  void matrix(const Matrix & m)
  {
    i64(m.rows());
    i64(m.cols());
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
  }
  void params(const ParamSet & p)
  {
    u64(static_cast<std::uint64_t>(p.activation));
    u64(p.layers.size());
    for (const auto & layer : p.layers) {
      matrix(layer.weight);
      matrix(layer.bias);
    }
  }
  std::vector<std::uint8_t> take() { return std::move(out_); }

private:
  std::vector<std::uint8_t> out_;
};

class Reader
{
public:
  explicit Reader(const std::vector<std::uint8_t> & in) : in_(in) {}

  void bytes(void * dst, std::size_t n)
  {
    if (pos_ + n > in_.size()) {
      throw CheckpointError("checkpoint truncated");
    }
    std::memcpy(dst, in_.data() + pos_, n);
    pos_ += n;
  }
  std::uint64_t u64()
  {
    std::uint64_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::int64_t i64()
  {
    std::int64_t v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  double f64()
  {
    double v = 0;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str()
  {
    const auto n = u64();
    if (n > in_.size() - pos_) {
      throw CheckpointError("checkpoint string length out of range");
    }
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Matrix matrix()
  {
    const auto rows = i64();
    const auto cols = i64();
    if (rows < 0 || cols < 0 || static_cast<std::uint64_t>(rows * cols) * 8 > in_.size() - pos_) {
      throw CheckpointError("checkpoint matrix shape out of range");
    }
    Matrix m(rows, cols);
    bytes(m.data(), sizeof(double) * static_cast<std::size_t>(m.size()));
    return m;
  }
  ParamSet params()
  {
    ParamSet p;
    const auto act = u64();
    if (act > 1) {
      throw CheckpointError("unknown activation in checkpoint");
    }
    p.activation = static_cast<Activation>(act);
    const auto n = u64();
    for (std::uint64_t i = 0; i < n; ++i) {
      Layer layer;
      layer.weight = matrix();
      layer.bias = matrix();
      p.layers.push_back(std::move(layer));
    }
    p.validate();
    return p;
  }
  bool done() const { return pos_ == in_.size(); }

private:
  const std::vector<std::uint8_t> & in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> Checkpoint::encode() const
{
  Writer w;
  w.bytes(kMagic, sizeof kMagic);
  w.u64(kVersion);
  w.u64(config_hash);
  w.u64(params.size());
  for (const auto & [name, p] : params) {
    w.str(name);
    w.params(p);
  }
  w.u64(optimizers.size());
  for (const auto & [name, o] : optimizers) {
    w.str(name);
    w.i64(o.step);
    w.params(o.first_moment);
    w.params(o.second_moment);
  }
  w.u64(scalar_optimizers.size());
  for (const auto & [name, o] : scalar_optimizers) {
    w.str(name);
    w.i64(o.step);
    w.f64(o.first_moment);
    w.f64(o.second_moment);
  }
  w.u64(scalars.size());
  for (const auto & [name, v] : scalars) {
    w.str(name);
    w.f64(v);
  }
  w.u64(blobs.size());
  for (const auto & [name, b] : blobs) {
    w.str(name);
    w.str(b);
  }
  return w.take();
}

Checkpoint Checkpoint::decode(const std::vector<std::uint8_t> & bytes)
{
  Reader r(bytes);
  char magic[sizeof kMagic];
  r.bytes(magic, sizeof magic);
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw CheckpointError("not a checkpoint file");
  }
  const auto version = r.u64();
  if (version != kVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.u64();
  for (auto n = r.u64(); n > 0; --n) {
    auto name = r.str();
    c.params.emplace(std::move(name), r.params());
  }
  for (auto n = r.u64(); n > 0; --n) {
    auto name = r.str();
    OptState o;
    o.step = r.i64();
    o.first_moment = r.params();
    o.second_moment = r.params();
    c.optimizers.emplace(std::move(name), std::move(o));
  }
  for (auto n = r.u64(); n > 0; --n) {
    auto name = r.str();
    ScalarOptState o;
    o.step = r.i64();
    o.first_moment = r.f64();
    o.second_moment = r.f64();
    c.scalar_optimizers.emplace(std::move(name), o);
  }
  for (auto n = r.u64(); n > 0; --n) {
    auto name = r.str();
    c.scalars.emplace(std::move(name), r.f64());
  }
  for (auto n = r.u64(); n > 0; --n) {
    auto name = r.str();
    c.blobs.emplace(std::move(name), r.str());
  }
  if (!r.done()) {
    throw CheckpointError("trailing bytes after checkpoint");
  }
  return c;
}

void Checkpoint::save(const std::filesystem::path & path) const
{
  const auto bytes = encode();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw CheckpointError("cannot open " + path.string() + " for writing");
  }
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint Checkpoint::load(const std::filesystem::path & path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw CheckpointError("cannot open " + path.string());
  }
  const std::vector<std::uint8_t> bytes(
    (std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode(bytes);
}

std::uint64_t fnv1a64(std::string_view data)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : data) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace haco::numeric
