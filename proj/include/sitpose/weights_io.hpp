// Copyright 2026 The Sitpose Authors
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

// Binary weight files and loss-curve CSV.
//
// Layout, all integers little-endian u32 unless noted:
//   "SPWT" magic, version (1), variant, stage count, hidden[stage count],
//   input_dim, output_dim, leaf_dim, joint_position_dim, past, future,
//   init seed (u64), block count, then per block: name length, name bytes,
//   rows, cols, rows*cols little-endian float32 values in column-major order.

#ifndef SITPOSE_WEIGHTS_IO_HPP_
#define SITPOSE_WEIGHTS_IO_HPP_

#include <array>
#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sitpose/error.hpp"
#include "sitpose/formats.hpp"
#include "sitpose/kinematics_net.hpp"

namespace sitpose {

inline constexpr std::uint32_t kWeightsVersion = 1;

namespace weights_detail {

inline void PutU32(std::ostream& out, std::uint32_t v) {
  const std::array<char, 4> b = {static_cast<char>(v & 0xffu), static_cast<char>((v >> 8) & 0xffu),
                                 static_cast<char>((v >> 16) & 0xffu), static_cast<char>((v >> 24) & 0xffu)};
  out.write(b.data(), 4);
}

inline void PutU64(std::ostream& out, std::uint64_t v) {
  PutU32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
  PutU32(out, static_cast<std::uint32_t>(v >> 32));
}

inline std::uint32_t GetU32(std::istream& in) {
  std::array<unsigned char, 4> b{};
  in.read(reinterpret_cast<char*>(b.data()), 4);
  if (!in) throw Error(ErrorKind::kParseError, "truncated weights file");
  return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

inline std::uint64_t GetU64(std::istream& in) {
  const std::uint64_t lo = GetU32(in);
  return lo | (static_cast<std::uint64_t>(GetU32(in)) << 32);
}

inline std::uint32_t Checked(std::uint32_t v, std::uint32_t max, const char* what) {
  if (v > max) throw Error(ErrorKind::kParseError, std::string("implausible ") + what + " in weights file");
  return v;
}

}  // namespace weights_detail

inline void WriteWeights(std::ostream& out, const NetworkWeights<float>& w) {
  using namespace weights_detail;
  const auto& c = w.config;
  out.write("SPWT", 4);
  PutU32(out, kWeightsVersion);
  PutU32(out, static_cast<std::uint32_t>(c.variant));
  PutU32(out, static_cast<std::uint32_t>(c.StageCount()));
  for (int h : c.hidden) PutU32(out, static_cast<std::uint32_t>(h));
  for (int v : {c.input_dim, c.output_dim, c.leaf_dim, c.joint_position_dim, c.window.past, c.window.future}) {
    PutU32(out, static_cast<std::uint32_t>(v));
  }
  PutU64(out, w.init_seed);
  PutU32(out, static_cast<std::uint32_t>(w.layout.blocks().size()));
  for (const auto& b : w.layout.blocks()) {
    PutU32(out, static_cast<std::uint32_t>(b.name.size()));
    out.write(b.name.data(), static_cast<std::streamsize>(b.name.size()));
    PutU32(out, static_cast<std::uint32_t>(b.rows));
    PutU32(out, static_cast<std::uint32_t>(b.cols));
    const std::size_t n = static_cast<std::size_t>(b.rows) * static_cast<std::size_t>(b.cols);
    for (std::size_t i = 0; i < n; ++i) {
      PutU32(out, std::bit_cast<std::uint32_t>(w.values(static_cast<Eigen::Index>(b.offset + i))));
    }
  }
}

inline NetworkWeights<float> ReadWeights(std::istream& in) {
  using namespace weights_detail;
  std::array<char, 4> magic{};
  in.read(magic.data(), 4);
  if (!in || std::memcmp(magic.data(), "SPWT", 4) != 0) {
    throw Error(ErrorKind::kParseError, "not a weights file");
  }
  const std::uint32_t version = GetU32(in);
  if (version != kWeightsVersion) {
    throw Error(ErrorKind::kParseError, "unsupported weights version " + std::to_string(version));
  }
  NetworkConfig c;
  const std::uint32_t variant = GetU32(in);
  if (variant > 1) throw Error(ErrorKind::kParseError, "unknown network variant");
  c.variant = static_cast<NetworkVariant>(variant);
  const std::uint32_t stages = GetU32(in);
  if (stages != static_cast<std::uint32_t>(c.StageCount())) {
    throw Error(ErrorKind::kParseError, "stage count does not match the variant");
  }
  c.hidden.clear();
  for (std::uint32_t s = 0; s < stages; ++s) c.hidden.push_back(static_cast<int>(Checked(GetU32(in), 1u << 16, "hidden size")));
  c.input_dim = static_cast<int>(Checked(GetU32(in), 1u << 16, "dimension"));
  c.output_dim = static_cast<int>(Checked(GetU32(in), 1u << 16, "dimension"));
  c.leaf_dim = static_cast<int>(Checked(GetU32(in), 1u << 16, "dimension"));
  c.joint_position_dim = static_cast<int>(Checked(GetU32(in), 1u << 16, "dimension"));
  c.window.past = static_cast<int>(Checked(GetU32(in), 1024, "window"));
  c.window.future = static_cast<int>(Checked(GetU32(in), 1024, "window"));
  try {
    c.Validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kParseError, std::string("invalid network header: ") + e.what());
  }
  NetworkWeights<float> w(c);
  w.init_seed = GetU64(in);
  const std::uint32_t count = GetU32(in);
  if (count != w.layout.blocks().size()) throw Error(ErrorKind::kParseError, "weights block count mismatch");
  for (const auto& b : w.layout.blocks()) {
    const std::uint32_t len = Checked(GetU32(in), 256, "block name length");
    std::string name(len, '\0');
    in.read(name.data(), len);
    const std::uint32_t rows = GetU32(in);
    const std::uint32_t cols = GetU32(in);
    if (!in || name != b.name || rows != static_cast<std::uint32_t>(b.rows) ||
        cols != static_cast<std::uint32_t>(b.cols)) {
      throw Error(ErrorKind::kParseError, "unexpected block '" + name + "' in weights file, wanted " + b.name);
    }
    const std::size_t n = static_cast<std::size_t>(rows) * cols;
    for (std::size_t i = 0; i < n; ++i) {
      w.values(static_cast<Eigen::Index>(b.offset + i)) = std::bit_cast<float>(GetU32(in));
    }
  }
  if (!w.AllFinite()) throw Error(ErrorKind::kParseError, "weights file contains non-finite values");
  return w;
}

inline void SaveWeights(const std::string& path, const NetworkWeights<float>& w) {
  auto out = OpenForWrite(path);
  WriteWeights(out, w);
  CheckWritten(out, path);
}

inline NetworkWeights<float> LoadWeights(const std::string& path) {
  auto in = OpenForRead(path);
  return ReadWeights(in);
}

inline void WriteLossCsv(std::ostream& out, const std::vector<double>& loss) {
  out << "epoch,loss\n";
  for (std::size_t i = 0; i < loss.size(); ++i) {
    out << i + 1 << ',';
    WriteNumber(out, loss[i]);
    out << '\n';
  }
}

}  // namespace sitpose

#endif  // SITPOSE_WEIGHTS_IO_HPP_
