#include "s2s/c_api.h"

#include <cstdlib>
#include <cstring>
#include <string>

#include "s2s/data.hpp"
#include "s2s/dynamics.hpp"
#include "s2s/netcore.hpp"
#include "s2s/runner.hpp"

struct s2s_net {
  s2s::UnitLayerNet net;
};

struct s2s_dataset {
  s2s::Dataset data;
};

namespace {

thread_local std::string g_error;
thread_local std::string g_error_key;

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out) std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

template <typename F>
s2s_status guard(F&& f) {
  g_error.clear();
  g_error_key.clear();
  try {
    f();
    return S2S_OK;
  } catch (const s2s::ConfigError& e) {
    g_error = e.what();
    g_error_key = e.key;
    return S2S_ERR_CONFIG;
  } catch (const s2s::DivergenceError& e) {
    g_error = e.what();
    return S2S_ERR_DIVERGED;
  } catch (const s2s::ShapeError& e) {
    g_error = e.what();
    return S2S_ERR_SHAPE;
  } catch (const s2s::Unsupported& e) {
    g_error = e.what();
    return S2S_ERR_UNSUPPORTED;
  } catch (const s2s::NotOnManifold& e) {
    g_error = e.what();
    return S2S_ERR_NOT_ON_MANIFOLD;
  } catch (const s2s::IllConditioned& e) {
    g_error = e.what();
    return S2S_ERR_ILL_CONDITIONED;
  } catch (const s2s::IoError& e) {
    g_error = e.what();
    return S2S_ERR_IO;
  } catch (const s2s::InvalidInput& e) {
    g_error = e.what();
    return S2S_ERR_INVALID;
  } catch (const s2s::Json::exception& e) {
    g_error = e.what();
    return S2S_ERR_INVALID;
  } catch (const std::exception& e) {
    g_error = e.what();
    return S2S_ERR_INTERNAL;
  } catch (...) {
    g_error = "unknown error";
    return S2S_ERR_INTERNAL;
  }
}

void need(const void* p, const char* what) {
  if (p == nullptr) throw s2s::InvalidInput(std::string(what) + " is NULL");
}

s2s::Json parse(const char* text) {
  need(text, "config");
  s2s::Json j = s2s::Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw s2s::ConfigError("<root>", "config is not valid JSON");
  return j;
}

}  // namespace

extern "C" {

const char* s2s_version(void) { return "1.0.0"; }

const char* s2s_status_name(s2s_status status) {
  switch (status) {
    case S2S_OK: return "ok";
    case S2S_ERR_INVALID: return "invalid-input";
    case S2S_ERR_CONFIG: return "config";
    case S2S_ERR_SHAPE: return "shape";
    case S2S_ERR_UNSUPPORTED: return "unsupported";
    case S2S_ERR_NOT_ON_MANIFOLD: return "not-on-manifold";
    case S2S_ERR_ILL_CONDITIONED: return "ill-conditioned";
    case S2S_ERR_IO: return "io";
    case S2S_ERR_DIVERGED: return "diverged";
    case S2S_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

const char* s2s_last_error(void) { return g_error.c_str(); }
const char* s2s_last_error_key(void) { return g_error_key.c_str(); }
void s2s_free_string(char* s) { std::free(s); }

int s2s_preset_count(void) { return static_cast<int>(s2s::preset_names().size()); }

const char* s2s_preset_name(int index) {
  static const std::vector<std::string> names = s2s::preset_names();
  if (index < 0 || index >= static_cast<int>(names.size())) return nullptr;
  return names[index].c_str();
}

s2s_status s2s_preset_config(const char* name, char** config_json) {
  return guard([&] {
    need(name, "name");
    need(config_json, "output");
    *config_json = dup(s2s::preset(name).dump(2));
  });
}

s2s_status s2s_normalize_config(const char* config_json, char** normalized) {
  return guard([&] {
    need(normalized, "output");
    *normalized = dup(s2s::normalize_config(parse(config_json)).dump(2));
  });
}

s2s_status s2s_apply_override(const char* config_json, const char* assignment,
                              char** updated) {
  return guard([&] {
    need(assignment, "assignment");
    need(updated, "output");
    s2s::Json j = parse(config_json);
    s2s::apply_override(j, assignment);
    *updated = dup(j.dump(2));
  });
}

s2s_status s2s_run_config(const char* config_json, char** summary_json) {
  return guard([&] {
    const s2s::RunOutcome r = s2s::run_experiment(parse(config_json));
    if (summary_json) *summary_json = dup(r.summary.dump(2));
  });
}

s2s_status s2s_net_create(const char* activation, int input_dim, int zeta_dim, int width,
                          s2s_net** out) {
  return guard([&] {
    need(activation, "activation");
    need(out, "output");
    const auto act = s2s::ActivationKind::parse(activation);
    *out = new s2s_net{s2s::UnitLayerNet::zeros(act, input_dim, zeta_dim, width)};
  });
}

void s2s_net_destroy(s2s_net* net) { delete net; }

s2s_status s2s_net_width(const s2s_net* net, int* width) {
  return guard([&] {
    need(net, "net");
    need(width, "output");
    *width = net->net.width();
  });
}

s2s_status s2s_net_num_params(const s2s_net* net, int* count) {
  return guard([&] {
    need(net, "net");
    need(count, "output");
    *count = net->net.num_params();
  });
}

s2s_status s2s_net_get_params(const s2s_net* net, double* buffer, int length) {
  return guard([&] {
    need(net, "net");
    need(buffer, "buffer");
    const s2s::Vec p = net->net.flatten();
    if (length != p.size()) throw s2s::ShapeError("buffer length must be " + std::to_string(p.size()));
    std::copy(p.data(), p.data() + p.size(), buffer);
  });
}

s2s_status s2s_net_set_params(s2s_net* net, const double* buffer, int length) {
  return guard([&] {
    need(net, "net");
    need(buffer, "buffer");
    if (length != net->net.num_params()) {
      throw s2s::ShapeError("buffer length must be " + std::to_string(net->net.num_params()));
    }
    net->net.assign(Eigen::Map<const s2s::Vec>(buffer, length));
  });
}

s2s_status s2s_net_init(s2s_net* net, double epsilon, uint64_t seed) {
  return guard([&] {
    need(net, "net");
    s2s::InitSpec spec;
    spec.epsilon = epsilon;
    spec.seed = seed;
    net->net = s2s::init_weights(net->net, spec);
  });
}

s2s_status s2s_net_forward(const s2s_net* net, const double* x, int input_len, double* y,
                           int output_len) {
  return guard([&] {
    need(net, "net");
    need(x, "x");
    need(y, "y");
    if (input_len != net->net.input_dim()) throw s2s::ShapeError("input length mismatch");
    const s2s::Vec out = s2s::forward(net->net, Eigen::Map<const s2s::Vec>(x, input_len));
    if (output_len != out.size()) throw s2s::ShapeError("output length mismatch");
    std::copy(out.data(), out.data() + out.size(), y);
  });
}

s2s_status s2s_dataset_generate(const char* kind, int samples, uint64_t seed,
                                s2s_dataset** out) {
  return guard([&] {
    need(kind, "kind");
    need(out, "output");
    *out = new s2s_dataset{s2s::gen_dataset(kind, s2s::DatasetParams{}, samples, seed)};
  });
}

s2s_status s2s_dataset_load_csv(const char* path, s2s_dataset** out) {
  return guard([&] {
    need(path, "path");
    need(out, "output");
    *out = new s2s_dataset{s2s::read_csv_dataset(path)};
  });
}

s2s_status s2s_dataset_shape(const s2s_dataset* data, int* samples, int* input_dim,
                             int* output_dim) {
  return guard([&] {
    need(data, "dataset");
    if (samples) *samples = data->data.size();
    if (input_dim) *input_dim = data->data.input_dim();
    if (output_dim) *output_dim = data->data.output_dim();
  });
}

void s2s_dataset_destroy(s2s_dataset* data) { delete data; }

s2s_status s2s_loss(const s2s_net* net, const s2s_dataset* data, double* loss) {
  return guard([&] {
    need(net, "net");
    need(data, "dataset");
    need(loss, "output");
    *loss = s2s::loss(net->net, data->data);
  });
}

s2s_status s2s_gradient(const s2s_net* net, const s2s_dataset* data, double* buffer,
                        int length) {
  return guard([&] {
    need(net, "net");
    need(data, "dataset");
    need(buffer, "buffer");
    const s2s::Vec g = s2s::grad(net->net, data->data).flatten();
    if (length != g.size()) throw s2s::ShapeError("buffer length must be " + std::to_string(g.size()));
    std::copy(g.data(), g.data() + g.size(), buffer);
  });
}

s2s_status s2s_train(s2s_net* net, const s2s_dataset* data, double eta, long steps,
                     double* final_loss) {
  return guard([&] {
    need(net, "net");
    need(data, "dataset");
    s2s::IntegrateOptions io;
    io.eta = eta;
    io.steps = steps;
    io.record_every = std::max(1L, steps);
    io.snapshots = 1;
    const auto obj = s2s::Objective::from_data(data->data);
    s2s::Trajectory t = s2s::integrate(net->net, obj, io);
    net->net = std::move(t.final_net);
    if (final_loss) *final_loss = t.losses.back();
  });
}

}  // extern "C"
