// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "vdrp/error.hpp"

namespace vdrp {
namespace {

constexpr char kMagic[4] = {'V', 'D', 'T', '1'};

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
}

std::uint32_t get_u32(std::string_view in, std::size_t at) {
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  return v;
}

}  // namespace

std::string encode_vdt1(const Tensor& t) {
  std::string out(kMagic, 4);
  out.reserve(8 + 4 * t.rank() + 4 * t.size());
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (auto e : t.shape()) put_u32(out, static_cast<std::uint32_t>(e));
  for (double v : t.data()) put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

Tensor decode_vdt1(std::string_view bytes, const std::string& origin) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw IoError(origin + ": not a VDT1 tensor (bad magic)");
  }
  const std::uint32_t rank = get_u32(bytes, 4);
  if (rank == 0 || bytes.size() < 8 + 4ull * rank) throw IoError(origin + ": truncated VDT1 header");
  std::vector<std::size_t> shape(rank);
  std::size_t count = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    shape[i] = get_u32(bytes, 8 + 4 * i);
    if (shape[i] == 0) throw IoError(origin + ": zero extent in VDT1 header");
    count *= shape[i];
  }
  const std::size_t payload_at = 8 + 4ull * rank;
  if (bytes.size() != payload_at + 4 * count) {
    throw IoError(origin + ": VDT1 payload size does not match its shape");
  }
  std::vector<double> data(count);
  for (std::size_t i = 0; i < count; ++i) {
    data[i] = static_cast<double>(std::bit_cast<float>(get_u32(bytes, payload_at + 4 * i)));
  }
  return Tensor(std::move(shape), std::move(data));
}

void write_vdt1(const std::filesystem::path& path, const Tensor& t) {
  write_file_atomic(path, encode_vdt1(t));
}

Tensor read_vdt1(const std::filesystem::path& path) {
  return decode_vdt1(read_file(path), path.string());
}

Tensor quantize_f32(const Tensor& t) {
  Tensor out = t;
  for (auto& v : out.data()) v = static_cast<double>(static_cast<float>(v));
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const std::filesystem::path& path, std::string_view contents) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) throw IoError("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string digest_hex(std::string_view bytes) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001B3ULL;
  }
  static const char* hex = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = hex[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string file_digest(const std::filesystem::path& path) { return digest_hex(read_file(path)); }

}  // namespace vdrp
