/* Hardware-counter access with graceful degradation.
 *
 * Metric order is fixed: INS, CYC, LST, L1_DCM, BR_CN, MSP.
 * Backends, best first:
 *   - PAPI (compile with -DHAVE_PAPI and link -lpapi)
 *   - perf_event_open (Linux)
 *   - TSC only: CYC approximated by the timestamp counter, the other
 *     five metrics read as zero (a warning is printed once).
 */
#ifndef PROXY_COUNTERS_H
#define PROXY_COUNTERS_H

#define CTR_METRICS 6

enum ctr_backend {
    CTR_NONE = 0,
    CTR_TSC,
    CTR_PERF,
    CTR_PAPI
};

/* Pick and start a backend; safe to call more than once. */
int counters_init(void);

/* Cumulative, monotone non-decreasing values since init. */
void counters_read(unsigned long long out[CTR_METRICS]);

const char *counters_backend_name(void);

/* Bit i set when metric i is genuinely measured by the backend. */
int counters_live_mask(void);

#endif
