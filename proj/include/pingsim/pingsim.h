#ifndef PINGSIM_H
#define PINGSIM_H

/* C interface to the pingsim library. Every call returns a ps_status; on
   failure ps_last_error() describes the problem for the calling thread. */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define PS_API __declspec(dllexport)
#else
#define PS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum ps_status {
  PS_OK = 0,
  PS_INVALID_ARGUMENT = 1,
  PS_CONFIG = 2,
  PS_RUNTIME = 3,
  PS_IO = 4,
  PS_SINGULAR = 5,
  PS_NO_STRIKE = 6,
  PS_INTERNAL = 99
} ps_status;

typedef enum ps_region { PS_LEFT = 0, PS_CENTER = 1, PS_RIGHT = 2 } ps_region;

typedef struct ps_experiment ps_experiment;

PS_API const char* ps_version(void);
PS_API const char* ps_last_error(void);
PS_API const char* ps_status_name(ps_status status);

/* Experiments. Relative paths in a JSON string resolve against base_dir. */
PS_API ps_status ps_experiment_load(const char* config_path, ps_experiment** out);
PS_API ps_status ps_experiment_from_json(const char* json_text, const char* base_dir, ps_experiment** out);
PS_API ps_status ps_experiment_set_seed(ps_experiment* exp, uint64_t seed);
PS_API ps_status ps_experiment_set_output(ps_experiment* exp, const char* out_dir);
PS_API ps_status ps_experiment_set_jobs(ps_experiment* exp, int jobs);
/* Valid until the next setter call or ps_experiment_free. */
PS_API ps_status ps_experiment_output(ps_experiment* exp, const char** out_dir);
/* command: generate, fit, benchmark, diagnose or sweep. */
PS_API ps_status ps_experiment_run(ps_experiment* exp, const char* command);
PS_API void ps_experiment_free(ps_experiment* exp);

/* Default robot, SI units. theta has 9 entries. */
PS_API ps_status ps_robot_forward_kinematics(const double* theta, double* position, double* normal);
/* 3x9 position Jacobian, row-major. */
PS_API ps_status ps_robot_jacobian(const double* theta, double* jacobian);
/* Minimum-norm solution of J x = u for a row-major rows x cols J. */
PS_API ps_status ps_min_norm_solve(const double* jacobian, int rows, int cols, const double* u, double* x,
                                   double* smallest_singular_value);

PS_API ps_status ps_classify_region(double strike_x_cm, ps_region* out);
/* params = {a1, a2, b}. */
PS_API ps_status ps_strike_x(const double* params, double* out);
PS_API ps_status ps_trajectory_loss(const double* predicted, const double* truth, double* out);

#ifdef __cplusplus
}
#endif

#endif
