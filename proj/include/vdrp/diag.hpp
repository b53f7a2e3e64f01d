// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <string>

namespace vdrp {

using WarningHandler = std::function<void(const std::string&)>;

// Non-fatal conditions (clamped group sizes, degenerate boxes, stale inputs)
// are reported here. The default handler writes to stderr.
void warn(const std::string& message);
void set_warning_handler(WarningHandler handler);

}  // namespace vdrp
