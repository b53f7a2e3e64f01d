// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#define VDRP_VERSION_STRING "0.1.0"
