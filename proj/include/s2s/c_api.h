#ifndef S2S_C_API_H
#define S2S_C_API_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define S2S_API __declspec(dllexport)
#else
#define S2S_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum s2s_status {
  S2S_OK = 0,
  S2S_ERR_INVALID = 1,
  S2S_ERR_CONFIG = 2,
  S2S_ERR_SHAPE = 3,
  S2S_ERR_UNSUPPORTED = 4,
  S2S_ERR_NOT_ON_MANIFOLD = 5,
  S2S_ERR_ILL_CONDITIONED = 6,
  S2S_ERR_IO = 7,
  S2S_ERR_DIVERGED = 8,
  S2S_ERR_INTERNAL = 9
} s2s_status;

typedef struct s2s_net s2s_net;
typedef struct s2s_dataset s2s_dataset;

S2S_API const char* s2s_version(void);
S2S_API const char* s2s_status_name(s2s_status status);

/* Message of the last failing call on this thread ("" when none). */
S2S_API const char* s2s_last_error(void);
/* Offending config key of the last S2S_ERR_CONFIG failure, else "". */
S2S_API const char* s2s_last_error_key(void);

/* Strings returned through char** are owned by the caller. */
S2S_API void s2s_free_string(char* s);

/* Experiments. Configs and summaries are JSON text. */
S2S_API int s2s_preset_count(void);
S2S_API const char* s2s_preset_name(int index);
S2S_API s2s_status s2s_preset_config(const char* name, char** config_json);
S2S_API s2s_status s2s_normalize_config(const char* config_json, char** normalized);
S2S_API s2s_status s2s_apply_override(const char* config_json, const char* assignment,
                                      char** updated);
S2S_API s2s_status s2s_run_config(const char* config_json, char** summary_json);

/* Networks. `activation` uses the kind names ("relu-fc", "poly-fc:3", ...). */
S2S_API s2s_status s2s_net_create(const char* activation, int input_dim, int zeta_dim,
                                  int width, s2s_net** out);
S2S_API void s2s_net_destroy(s2s_net* net);
S2S_API s2s_status s2s_net_width(const s2s_net* net, int* width);
S2S_API s2s_status s2s_net_num_params(const s2s_net* net, int* count);
S2S_API s2s_status s2s_net_get_params(const s2s_net* net, double* buffer, int length);
S2S_API s2s_status s2s_net_set_params(s2s_net* net, const double* buffer, int length);
/* Isotropic N(0, epsilon^2) initialization from a seed. */
S2S_API s2s_status s2s_net_init(s2s_net* net, double epsilon, uint64_t seed);
S2S_API s2s_status s2s_net_forward(const s2s_net* net, const double* x, int input_len,
                                   double* y, int output_len);

/* Datasets. */
S2S_API s2s_status s2s_dataset_generate(const char* kind, int samples, uint64_t seed,
                                        s2s_dataset** out);
S2S_API s2s_status s2s_dataset_load_csv(const char* path, s2s_dataset** out);
S2S_API s2s_status s2s_dataset_shape(const s2s_dataset* data, int* samples, int* input_dim,
                                     int* output_dim);
S2S_API void s2s_dataset_destroy(s2s_dataset* data);

S2S_API s2s_status s2s_loss(const s2s_net* net, const s2s_dataset* data, double* loss);
/* Gradient in the s2s_net_get_params layout. */
S2S_API s2s_status s2s_gradient(const s2s_net* net, const s2s_dataset* data,
                                double* buffer, int length);
/* Plain gradient descent; `final_loss` may be NULL. */
S2S_API s2s_status s2s_train(s2s_net* net, const s2s_dataset* data, double eta,
                             long steps, double* final_loss);

#ifdef __cplusplus
}
#endif

#endif
