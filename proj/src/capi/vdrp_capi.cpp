// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/vdrp.h"

#include <cstdlib>
#include <cstring>
#include <iostream>
#include <memory>
#include <new>
#include <string>
#include <vector>

#include "vdrp/config.hpp"
#include "vdrp/diag.hpp"
#include "vdrp/error.hpp"
#include "vdrp/eval.hpp"
#include "vdrp/geometry.hpp"
#include "vdrp/io.hpp"
#include "vdrp/pipeline.hpp"
#include "vdrp/retrieval.hpp"
#include "vdrp/version.hpp"

struct vdrp_tensor {
  vdrp::Tensor value;
};

struct vdrp_config {
  vdrp::RunConfig value;
};

namespace {

thread_local std::string g_last_error;

vdrp_status fail(vdrp_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

vdrp_status status_of(vdrp::ErrorKind kind) {
  switch (kind) {
    case vdrp::ErrorKind::kDimension: return VDRP_ERR_DIMENSION;
    case vdrp::ErrorKind::kParameter: return VDRP_ERR_PARAMETER;
    case vdrp::ErrorKind::kNumeric: return VDRP_ERR_NUMERIC;
    case vdrp::ErrorKind::kIo: return VDRP_ERR_IO;
    case vdrp::ErrorKind::kValidation: return VDRP_ERR_VALIDATION;
  }
  return VDRP_ERR_INTERNAL;
}

// Runs `fn`, translating exceptions into status codes.
template <typename Fn>
vdrp_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return VDRP_OK;
  } catch (const vdrp::Error& e) {
    return fail(status_of(e.kind()), e.what());
  } catch (const std::bad_alloc&) {
    return fail(VDRP_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(VDRP_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(VDRP_ERR_INTERNAL, "unknown error");
  }
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

#define VDRP_REQUIRE(ptr)                                                   \
  do {                                                                      \
    if (!(ptr)) return fail(VDRP_ERR_NULL_ARGUMENT, #ptr " must not be NULL"); \
  } while (0)

void write_weights(const vdrp::retrieval::WeightVector& w, double* out) {
  std::memcpy(out, w.weights.data().data(), w.weights.size() * sizeof(double));
}

}  // namespace

extern "C" {

const char* vdrp_version(void) { return VDRP_VERSION_STRING; }

const char* vdrp_status_name(vdrp_status status) {
  switch (status) {
    case VDRP_OK: return "ok";
    case VDRP_ERR_DIMENSION: return "dimension error";
    case VDRP_ERR_PARAMETER: return "parameter error";
    case VDRP_ERR_NUMERIC: return "numeric error";
    case VDRP_ERR_IO: return "io error";
    case VDRP_ERR_VALIDATION: return "validation error";
    case VDRP_ERR_NULL_ARGUMENT: return "null argument";
    case VDRP_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* vdrp_last_error(void) { return g_last_error.c_str(); }

void vdrp_set_warning_handler(vdrp_warning_fn fn, void* user_data) {
  if (!fn) {
    vdrp::set_warning_handler([](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; });
    return;
  }
  vdrp::set_warning_handler([fn, user_data](const std::string& msg) { fn(msg.c_str(), user_data); });
}

void vdrp_string_free(char* s) { std::free(s); }

vdrp_status vdrp_tensor_create(const size_t* shape, size_t rank, const double* data, vdrp_tensor** out) {
  VDRP_REQUIRE(out);
  if (rank > 0) VDRP_REQUIRE(shape);
  *out = nullptr;
  return guarded([&] {
    std::vector<std::size_t> dims(shape, shape + rank);
    auto t = std::make_unique<vdrp_tensor>(vdrp_tensor{vdrp::Tensor(dims)});
    if (data) std::memcpy(t->value.data().data(), data, t->value.size() * sizeof(double));
    *out = t.release();
  });
}

void vdrp_tensor_free(vdrp_tensor* t) { delete t; }

size_t vdrp_tensor_rank(const vdrp_tensor* t) { return t ? t->value.rank() : 0; }

size_t vdrp_tensor_dim(const vdrp_tensor* t, size_t axis) {
  return (t && axis < t->value.rank()) ? t->value.shape()[axis] : 0;
}

size_t vdrp_tensor_size(const vdrp_tensor* t) { return t ? t->value.size() : 0; }

const double* vdrp_tensor_data(const vdrp_tensor* t) { return t ? t->value.data().data() : nullptr; }

vdrp_status vdrp_tensor_read(const char* path, vdrp_tensor** out) {
  VDRP_REQUIRE(path);
  VDRP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new vdrp_tensor{vdrp::read_vdt1(path)}; });
}

vdrp_status vdrp_tensor_write(const vdrp_tensor* t, const char* path) {
  VDRP_REQUIRE(t);
  VDRP_REQUIRE(path);
  return guarded([&] { vdrp::write_vdt1(path, t->value); });
}

vdrp_status vdrp_sparsemax(const double* scores, size_t k, double* out) {
  VDRP_REQUIRE(scores);
  VDRP_REQUIRE(out);
  return guarded([&] { write_weights(vdrp::retrieval::sparsemax({scores, k}), out); });
}

vdrp_status vdrp_tau_sparsemax(const double* scores, size_t k, double tau_cut, double* out) {
  VDRP_REQUIRE(scores);
  VDRP_REQUIRE(out);
  return guarded([&] { write_weights(vdrp::retrieval::tau_sparsemax({scores, k}, tau_cut), out); });
}

vdrp_status vdrp_retrieve_weights(const double* scores, size_t k, const char* mode, double param, double* out) {
  VDRP_REQUIRE(scores);
  VDRP_REQUIRE(mode);
  VDRP_REQUIRE(out);
  return guarded([&] {
    const std::string name(mode);
    if (name == "top_k" && (!(param >= 0) || param != static_cast<double>(static_cast<std::size_t>(param))))
      throw vdrp::ParameterError("top_k expects a non-negative integer parameter");
    const auto m = vdrp::retrieval::RetrievalMode::parse(
        name, param, param, name == "top_k" ? static_cast<std::size_t>(param) : 0);
    write_weights(vdrp::retrieval::retrieve_weights({scores, k}, m), out);
  });
}

vdrp_status vdrp_iou(const double* box_a, const double* box_b, double* out) {
  VDRP_REQUIRE(box_a);
  VDRP_REQUIRE(box_b);
  VDRP_REQUIRE(out);
  return guarded([&] {
    const auto a = vdrp::make_box(box_a[0], box_a[1], box_a[2], box_a[3]);
    const auto b = vdrp::make_box(box_b[0], box_b[1], box_b[2], box_b[3]);
    *out = vdrp::iou(a, b);
  });
}

vdrp_status vdrp_harmonic_mean(double seen, double unseen, double* out) {
  VDRP_REQUIRE(out);
  return guarded([&] { *out = vdrp::eval::harmonic_mean(seen, unseen); });
}

vdrp_status vdrp_config_create(vdrp_config** out) {
  VDRP_REQUIRE(out);
  *out = nullptr;
  return guarded([&] { *out = new vdrp_config{}; });
}

void vdrp_config_free(vdrp_config* cfg) { delete cfg; }

vdrp_status vdrp_config_load(vdrp_config* cfg, const char* path) {
  VDRP_REQUIRE(cfg);
  VDRP_REQUIRE(path);
  return guarded([&] { cfg->value.merge_file(path); });
}

vdrp_status vdrp_config_set(vdrp_config* cfg, const char* key, const char* value) {
  VDRP_REQUIRE(cfg);
  VDRP_REQUIRE(key);
  VDRP_REQUIRE(value);
  return guarded([&] {
    try {
      cfg->value.set(key, value);
    } catch (const vdrp::Error& e) {
      throw vdrp::ValidationError(std::string(key) + "=" + value + ": " + e.what());
    }
  });
}

vdrp_status vdrp_config_set_seed(vdrp_config* cfg, uint64_t seed) {
  VDRP_REQUIRE(cfg);
  return guarded([&] { cfg->value.set_json("seed", seed); });
}

vdrp_status vdrp_config_get(const vdrp_config* cfg, const char* key, char** out_json) {
  VDRP_REQUIRE(cfg);
  VDRP_REQUIRE(key);
  VDRP_REQUIRE(out_json);
  *out_json = nullptr;
  return guarded([&] {
    const auto& v = cfg->value.values();
    if (!v.contains(key)) throw vdrp::ValidationError(std::string("unknown config key '") + key + "'");
    *out_json = copy_string(v.at(key).dump());
  });
}

vdrp_status vdrp_config_to_json(const vdrp_config* cfg, char** out_json) {
  VDRP_REQUIRE(cfg);
  VDRP_REQUIRE(out_json);
  *out_json = nullptr;
  return guarded([&] { *out_json = copy_string(cfg->value.to_json_text()); });
}

size_t vdrp_command_count(void) { return vdrp::pipeline::command_names().size(); }

const char* vdrp_command_name(size_t index) {
  const auto& names = vdrp::pipeline::command_names();
  return index < names.size() ? names[index].c_str() : nullptr;
}

vdrp_status vdrp_run_command(const char* command, const vdrp_config* cfg, const char* out_dir, char** summary) {
  VDRP_REQUIRE(command);
  VDRP_REQUIRE(cfg);
  VDRP_REQUIRE(out_dir);
  if (summary) *summary = nullptr;
  return guarded([&] {
    const std::string text = vdrp::pipeline::run_command(command, cfg->value, out_dir);
    if (summary) *summary = copy_string(text);
  });
}

}  // extern "C"
