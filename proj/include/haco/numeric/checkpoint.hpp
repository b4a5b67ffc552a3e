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

#ifndef HACO__NUMERIC__CHECKPOINT_HPP_
#define HACO__NUMERIC__CHECKPOINT_HPP_

#include "haco/numeric/mlp.hpp"
#include "haco/numeric/optim.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace haco::numeric
{

/// Named parameter sets, optimizer states, scalars and opaque text blobs
/// (e.g. serialized RNG engines), tagged with the hash of the run config that
/// produced them. The binary encoding stores raw IEEE-754 bytes, so a
/// save/load round trip is bit-exact.
struct Checkpoint
{
  static constexpr std::uint32_t kVersion = 1;

  std::uint64_t config_hash = 0;
  std::map<std::string, ParamSet> params;
  std::map<std::string, OptState> optimizers;
  std::map<std::string, ScalarOptState> scalar_optimizers;
  std::map<std::string, double> scalars;
  std::map<std::string, std::string> blobs;

  std::vector<std::uint8_t> encode() const;
  static Checkpoint decode(const std::vector<std::uint8_t> & bytes);

  void save(const std::filesystem::path & path) const;
  static Checkpoint load(const std::filesystem::path & path);

  bool operator==(const Checkpoint & other) const { return encode() == other.encode(); }
};

class CheckpointError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// FNV-1a 64-bit, used for config hashes and digests.
std::uint64_t fnv1a64(std::string_view data);

}  // namespace haco::numeric

#endif  // HACO__NUMERIC__CHECKPOINT_HPP_
