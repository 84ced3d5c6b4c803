#include "psd/psd.h"

#include <filesystem>
#include <memory>
#include <new>
#include <string>

#include "psd/data_io.hpp"
#include "psd/error.hpp"
#include "psd/metrics.hpp"
#include "psd/n2n.hpp"
#include "psd/networks.hpp"
#include "psd/pipeline.hpp"
#include "psd/run_config.hpp"
#include "psd/speckle.hpp"

struct psd_image {
  psd::Image image;
};

struct psd_model {
  psd::ModelHandle model;
};

struct psd_config {
  psd::RunConfig config;
};

namespace {

thread_local std::string g_last_error;

psd_status fail(psd_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

template <class F>
psd_status guarded(F&& f) {
  try {
    f();
    return PSD_OK;
  } catch (const psd::Error& e) {
    return fail(static_cast<psd_status>(e.code()), e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return fail(PSD_ERR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(PSD_ERR_RUNTIME, "out of memory");
  } catch (const std::exception& e) {
    return fail(PSD_ERR_RUNTIME, e.what());
  } catch (...) {
    return fail(PSD_ERR_RUNTIME, "unknown error");
  }
}

void require(const void* p, const char* what) {
  if (!p) throw psd::InvalidArgument(std::string(what) + " must not be NULL");
}

}  // namespace

extern "C" {

const char* psd_last_error(void) { return g_last_error.c_str(); }

const char* psd_version(void) { return "0.1.0"; }

psd_status psd_image_create(int width, int height, const float* pixels, psd_image** out) {
  return guarded([&] {
    require(out, "out");
    std::vector<float> data(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), 0.0f);
    if (pixels) std::copy(pixels, pixels + data.size(), data.begin());
    *out = new psd_image{psd::Image(width, height, std::move(data))};
  });
}

psd_status psd_image_load(const char* path, psd_image** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new psd_image{psd::load_image(path)};
  });
}

psd_status psd_image_export(const psd_image* image, const char* path, int depth) {
  return guarded([&] {
    require(image, "image");
    require(path, "path");
    psd::ExportDepth d;
    switch (depth) {
      case 8: d = psd::ExportDepth::k8; break;
      case 16: d = psd::ExportDepth::k16; break;
      case 32: d = psd::ExportDepth::kFloat; break;
      default: throw psd::InvalidArgument("depth must be 8, 16 or 32");
    }
    psd::export_image(image->image, path, d);
  });
}

int psd_image_width(const psd_image* image) { return image ? image->image.width() : 0; }

int psd_image_height(const psd_image* image) { return image ? image->image.height() : 0; }

const float* psd_image_data(const psd_image* image) { return image ? image->image.pixels().data() : nullptr; }

void psd_image_free(psd_image* image) { delete image; }

psd_status psd_speckle(const psd_image* clean, double looks, uint64_t seed, psd_image** out) {
  return guarded([&] {
    require(clean, "clean");
    require(out, "out");
    *out = new psd_image{psd::speckle(clean->image, psd::LookCount(looks), seed)};
  });
}

psd_status psd_model_load(const char* path, psd_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new psd_model{psd::load_checkpoint(path)};
  });
}

psd_status psd_model_save(const psd_model* model, const char* path) {
  return guarded([&] {
    require(model, "model");
    require(path, "path");
    psd::save_checkpoint(model->model, path);
  });
}

const char* psd_model_role(const psd_model* model) {
  return model ? psd::role_name(model->model.role()).data() : nullptr;
}

size_t psd_model_parameter_count(const psd_model* model) { return model ? model->model.parameter_count() : 0; }

void psd_model_free(psd_model* model) { delete model; }

psd_status psd_despeckle(const psd_model* model, const psd_image* image, psd_image** out) {
  return guarded([&] {
    require(model, "model");
    require(image, "image");
    require(out, "out");
    *out = new psd_image{psd::despeckle(model->model, image->image)};
  });
}

psd_status psd_psnr(const psd_image* reference, const psd_image* test, double peak, double* db, int* saturated) {
  return guarded([&] {
    require(reference, "reference");
    require(test, "test");
    require(db, "db");
    const psd::MetricValue v = psd::psnr(reference->image, test->image, peak);
    *db = v.value;
    if (saturated) *saturated = v.saturated ? 1 : 0;
  });
}

psd_status psd_ssim(const psd_image* reference, const psd_image* test, double* value) {
  return guarded([&] {
    require(reference, "reference");
    require(test, "test");
    require(value, "value");
    *value = psd::ssim(reference->image, test->image);
  });
}

psd_status psd_config_create(psd_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new psd_config{};
  });
}

psd_status psd_config_set(psd_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    config->config.set(key, value);
  });
}

psd_status psd_config_load_file(psd_config* config, const char* path) {
  return guarded([&] {
    require(config, "config");
    require(path, "path");
    config->config.load_file(path);
  });
}

const char* psd_config_get(const psd_config* config, const char* key) {
  if (!config || !key || !config->config.has(key)) return nullptr;
  return config->config.get(key).c_str();
}

void psd_config_free(psd_config* config) { delete config; }

int psd_config_key_count(void) { return static_cast<int>(psd::RunConfig::defaults().size()); }

const char* psd_config_key_name(int index) {
  const auto& table = psd::RunConfig::defaults();
  if (index < 0 || index >= static_cast<int>(table.size())) return nullptr;
  return std::next(table.begin(), index)->first.c_str();
}

const char* psd_config_key_help(int index) {
  const char* key = psd_config_key_name(index);
  return key ? psd::RunConfig::describe(key).data() : nullptr;
}

int psd_command_count(void) { return static_cast<int>(psd::command_names().size()); }

const char* psd_command_name(int index) {
  const auto& names = psd::command_names();
  if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
  return names[index].data();
}

psd_status psd_run(const char* command, const psd_config* config) {
  return guarded([&] {
    require(command, "command");
    require(config, "config");
    psd::run_command(command, config->config);
  });
}

}  // extern "C"
