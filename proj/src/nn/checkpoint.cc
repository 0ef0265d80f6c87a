// Copyright 2026 Convturn Authors
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

#include "convturn/nn/checkpoint.h"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

#include "convturn/common/error.h"
#include "json.hpp"

namespace convturn {

namespace {

constexpr int kFormatVersion = 1;

void WriteU32Le(std::ostream& os, std::uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>((v >> 8) & 0xff),
                        static_cast<unsigned char>((v >> 16) & 0xff),
                        static_cast<unsigned char>((v >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t ReadU32Le(std::istream& is, const std::string& path) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  if (is.gcount() != 4) {
    throw IoError("truncated checkpoint header in " + path);
  }
  return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) |
         (std::uint32_t(b[2]) << 16) | (std::uint32_t(b[3]) << 24);
}

nlohmann::json ReadHeader(std::istream& is, const std::string& path) {
  const std::uint32_t len = ReadU32Le(is, path);
  std::string text(len, '\0');
  is.read(text.data(), len);
  if (static_cast<std::uint32_t>(is.gcount()) != len) {
    throw IoError("truncated checkpoint header in " + path);
  }
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("bad checkpoint header in " + path + ": " + e.what());
  }
  if (!header.contains("format_version") ||
      header["format_version"].get<int>() != kFormatVersion) {
    throw IoError("unsupported checkpoint format version in " + path);
  }
  if (!header.contains("params") || !header["params"].is_array()) {
    throw IoError("checkpoint header missing params array in " + path);
  }
  return header;
}

// Stores as little-endian without byte swapping; the targets this builds on
// are little-endian and the reader asserts the same.
static_assert(sizeof(float) == 4, "float32 payload requires 4-byte float");

}  // namespace

template <typename Real>
void SaveCheckpoint(const ParamStore<Real>& store, const std::string& path) {
  nlohmann::json header;
  header["format_version"] = kFormatVersion;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t i = 0; i < store.NumParams(); ++i) {
    const Param<Real>& p = store.At(i);
    nlohmann::json entry;
    entry["name"] = p.name;
    entry["shape"] = p.value.Shape();
    params.push_back(entry);
  }
  header["params"] = std::move(params);
  const std::string text = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  WriteU32Le(os, static_cast<std::uint32_t>(text.size()));
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  std::vector<float> buf;
  for (std::size_t i = 0; i < store.NumParams(); ++i) {
    const Param<Real>& p = store.At(i);
    buf.resize(p.value.Numel());
    const Real* src = p.value.Data();
    for (std::size_t k = 0; k < buf.size(); ++k) buf[k] = float(src[k]);
    os.write(reinterpret_cast<const char*>(buf.data()),
             static_cast<std::streamsize>(buf.size() * sizeof(float)));
  }
  os.flush();
  if (!os) throw IoError("short write to " + path);
}

template <typename Real>
void LoadCheckpoint(ParamStore<Real>* store, const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  nlohmann::json header = ReadHeader(is, path);
  const auto& params = header["params"];
  if (params.size() != store->NumParams()) {
    throw IoError("checkpoint " + path + " has " +
                  std::to_string(params.size()) + " parameters, expected " +
                  std::to_string(store->NumParams()));
  }
  std::vector<float> buf;
  for (std::size_t i = 0; i < store->NumParams(); ++i) {
    Param<Real>& p = store->At(i);
    const auto& entry = params[i];
    const std::string name = entry.at("name").get<std::string>();
    if (name != p.name) {
      throw IoError("checkpoint " + path + " parameter " + std::to_string(i) +
                    " is '" + name + "', expected '" + p.name + "'");
    }
    const std::vector<int> shape = entry.at("shape").get<std::vector<int>>();
    if (shape != p.value.Shape()) {
      throw IoError("checkpoint " + path + " shape mismatch for '" + name +
                    "'");
    }
    buf.resize(p.value.Numel());
    is.read(reinterpret_cast<char*>(buf.data()),
            static_cast<std::streamsize>(buf.size() * sizeof(float)));
    if (static_cast<std::size_t>(is.gcount()) != buf.size() * sizeof(float)) {
      throw IoError("truncated checkpoint payload for '" + name + "' in " +
                    path);
    }
    Real* dst = p.value.Data();
    for (std::size_t k = 0; k < buf.size(); ++k) dst[k] = Real(buf[k]);
  }
  // Trailing garbage means the file does not match the header.
  char extra;
  is.read(&extra, 1);
  if (is.gcount() != 0) {
    throw IoError("checkpoint " + path + " has data past declared payload");
  }
}

std::vector<std::string> CheckpointParamNames(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path);
  nlohmann::json header = ReadHeader(is, path);
  std::vector<std::string> names;
  for (const auto& entry : header["params"]) {
    names.push_back(entry.at("name").get<std::string>());
  }
  return names;
}

template void SaveCheckpoint(const ParamStore<float>&, const std::string&);
template void SaveCheckpoint(const ParamStore<double>&, const std::string&);
template void LoadCheckpoint(ParamStore<float>*, const std::string&);
template void LoadCheckpoint(ParamStore<double>*, const std::string&);

}  // namespace convturn
