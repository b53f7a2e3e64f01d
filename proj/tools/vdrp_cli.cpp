// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vdrp/vdrp.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInternal = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNumeric = 3;

int exit_code(vdrp_status s) {
  switch (s) {
    case VDRP_OK: return kExitOk;
    case VDRP_ERR_NUMERIC: return kExitNumeric;
    case VDRP_ERR_INTERNAL: return kExitInternal;
    default: return kExitValidation;
  }
}

int report(vdrp_status s) {
  std::cerr << "vdrp: " << vdrp_status_name(s) << ": " << vdrp_last_error() << '\n';
  return exit_code(s);
}

std::string command_list() {
  std::string out;
  for (size_t i = 0; i < vdrp_command_count(); ++i) {
    if (i) out += ", ";
    out += vdrp_command_name(i);
  }
  return out;
}

struct ConfigHandle {
  vdrp_config* ptr = nullptr;
  ~ConfigHandle() { vdrp_config_free(ptr); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diversity- and region-aware prompt learning for zero-shot HOI detection"};
  app.set_version_flag("--version", std::string(vdrp_version()));

  std::string command;
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool print_config = false;

  app.add_option("command", command, "One of: " + command_list())->required();
  app.add_option("--config", config_path, "JSON config with flat dotted keys");
  app.add_option("--set", overrides, "Override a config key (key=value), repeatable")->take_all();
  app.add_option("--seed", seed, "Override the run seed");
  app.add_option("--out", out_dir, "Output directory")->required();
  app.add_flag("--print-config", print_config, "Print the resolved config before running");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  ConfigHandle cfg;
  if (auto s = vdrp_config_create(&cfg.ptr); s != VDRP_OK) return report(s);
  if (!config_path.empty()) {
    if (auto s = vdrp_config_load(cfg.ptr, config_path.c_str()); s != VDRP_OK) return report(s);
  }
  for (const auto& kv : overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) {
      std::cerr << "vdrp: --set expects key=value, got '" << kv << "'\n";
      return kExitValidation;
    }
    const std::string key = kv.substr(0, eq), value = kv.substr(eq + 1);
    if (auto s = vdrp_config_set(cfg.ptr, key.c_str(), value.c_str()); s != VDRP_OK) return report(s);
  }
  if (seed) {
    if (auto s = vdrp_config_set_seed(cfg.ptr, *seed); s != VDRP_OK) return report(s);
  }
  if (print_config) {
    char* json = nullptr;
    if (auto s = vdrp_config_to_json(cfg.ptr, &json); s != VDRP_OK) return report(s);
    std::cout << json << '\n';
    vdrp_string_free(json);
  }

  char* summary = nullptr;
  const vdrp_status s = vdrp_run_command(command.c_str(), cfg.ptr, out_dir.c_str(), &summary);
  if (s != VDRP_OK) return report(s);
  if (summary) std::cout << summary;
  vdrp_string_free(summary);
  return kExitOk;
}
