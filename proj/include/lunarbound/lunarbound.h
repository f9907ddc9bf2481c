#ifndef LUNARBOUND_H
#define LUNARBOUND_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LB_API __declspec(dllexport)
#else
#define LB_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum lb_status {
    LB_OK = 0,
    LB_E_INVALID_ARGUMENT = 1,
    LB_E_SINGULAR = 2,
    LB_E_DOMAIN = 3,
    LB_E_COLLISION = 4,
    LB_E_NO_SPLITTING = 5,
    LB_E_INFEASIBLE = 6,
    LB_E_NOT_APPLICABLE = 7,
    LB_E_CONVERGENCE = 8,
    LB_E_IO = 9,
    LB_E_INTERNAL = 100
} lb_status;

typedef enum lb_format { LB_FORMAT_JSON = 0, LB_FORMAT_CSV = 1, LB_FORMAT_TEXT = 2 } lb_format;

typedef struct lb_config lb_config;
typedef struct lb_report lb_report;

/* Message of the last failed call on this thread ("" if none). */
LB_API const char* lb_last_error(void);
LB_API const char* lb_status_name(lb_status s);
LB_API const char* lb_version(void);

LB_API lb_status lb_config_parse(const char* json_text, lb_config** out);
/* Equal masses 1/3, H = -1/6, |J| = sqrt(8)/9, seed 1, 20 samples. */
LB_API lb_status lb_config_appendix(lb_config** out);
LB_API void lb_config_free(lb_config* cfg);
LB_API lb_status lb_config_set_seed(lb_config* cfg, uint64_t seed);
LB_API lb_status lb_config_set_tol(lb_config* cfg, double tol);
LB_API lb_status lb_config_set_regularize(lb_config* cfg, int on);
LB_API lb_status lb_config_set_count(lb_config* cfg, int count);
/* Canonical JSON, owned by cfg until the next call on it. */
LB_API const char* lb_config_json(lb_config* cfg);

/* Each run fills *out with a report made of named text parts (a file name
 * and its content). lb_report_passed gives 1/0 for verifications, -1 else. */
LB_API lb_status lb_bounds(const lb_config* cfg, lb_format fmt, lb_report** out);
LB_API lb_status lb_sample(const lb_config* cfg, lb_format fmt, lb_report** out);
/* Sample `index` integrated to t_end (t_end = 0: one deviation horizon).
 * Parts: trajectory.csv and events.csv. */
LB_API lb_status lb_simulate(const lb_config* cfg, int index, double t_end, lb_report** out);
LB_API lb_status lb_verify_sandwich(const lb_config* cfg, int jobs, lb_format fmt, lb_report** out);
LB_API lb_status lb_verify_theorem(const lb_config* cfg, int jobs, lb_format fmt, lb_report** out);
/* fmt TEXT gives the fixture table. */
LB_API lb_status lb_appendix(int jobs, int samples, lb_format fmt, lb_report** out);

LB_API int lb_report_passed(const lb_report* rep);
LB_API size_t lb_report_part_count(const lb_report* rep);
LB_API const char* lb_report_part_name(const lb_report* rep, size_t i);
LB_API const char* lb_report_part_text(const lb_report* rep, size_t i);
LB_API size_t lb_report_part_size(const lb_report* rep, size_t i);
LB_API void lb_report_free(lb_report* rep);

#ifdef __cplusplus
}
#endif

#endif
