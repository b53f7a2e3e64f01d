// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "vdrp/tensor.hpp"

namespace vdrp {

// VDT1 layout: "VDT1", rank (u32 LE), extents (u32 LE each), payload as
// row-major f32 LE. Readers widen to double.
std::string encode_vdt1(const Tensor& t);
Tensor decode_vdt1(std::string_view bytes, const std::string& origin = "<buffer>");
void write_vdt1(const std::filesystem::path& path, const Tensor& t);
Tensor read_vdt1(const std::filesystem::path& path);

// Rounds every element through f32, i.e. what a VDT1 round trip yields.
Tensor quantize_f32(const Tensor& t);

std::string read_file(const std::filesystem::path& path);
// Writes to a sibling temp file then renames over the target.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

// FNV-1a 64-bit digest rendered as 16 hex digits.
std::string digest_hex(std::string_view bytes);
std::string file_digest(const std::filesystem::path& path);

}  // namespace vdrp
