#define _GNU_SOURCE
#include "counters.h"

#include <stdio.h>
#include <string.h>

#if defined(__x86_64__) || defined(__i386__)
#include <x86intrin.h>
#define HAVE_RDTSC 1
#else
#include <time.h>
#endif

#ifdef __linux__
#include <linux/perf_event.h>
#include <sys/ioctl.h>
#include <sys/syscall.h>
#include <unistd.h>
#define HAVE_PERF 1
#endif

#ifdef HAVE_PAPI
#include <papi.h>
#endif

static int g_backend = CTR_NONE;
static int g_live_mask = 0;

/* ---- perf_event backend -------------------------------------------------
 * One fd per event; LST is the sum of L1D read and write accesses, so a
 * seventh fd backs the extra term. */
#ifdef HAVE_PERF
enum { PERF_SLOTS = 7 };
static int g_perf_fd[PERF_SLOTS];

static long perf_open(unsigned type, unsigned long long config)
{
    struct perf_event_attr attr;
    memset(&attr, 0, sizeof attr);
    attr.type = type;
    attr.size = sizeof attr;
    attr.config = config;
    attr.disabled = 0;
    attr.exclude_kernel = 1;
    attr.exclude_hv = 1;
    return syscall(__NR_perf_event_open, &attr, 0, -1, -1, 0);
}

static unsigned long long cache_cfg(int cache, int op, int result)
{
    return (unsigned long long)cache | ((unsigned long long)op << 8)
         | ((unsigned long long)result << 16);
}

static int perf_init(void)
{
    /* slots: INS CYC L1D_rd_access L1D_wr_access L1D_rd_miss BR BR_MISS */
    const struct { unsigned type; unsigned long long config; } ev[PERF_SLOTS] = {
        { PERF_TYPE_HARDWARE, PERF_COUNT_HW_INSTRUCTIONS },
        { PERF_TYPE_HARDWARE, PERF_COUNT_HW_CPU_CYCLES },
        { PERF_TYPE_HW_CACHE, 0 },
        { PERF_TYPE_HW_CACHE, 0 },
        { PERF_TYPE_HW_CACHE, 0 },
        { PERF_TYPE_HARDWARE, PERF_COUNT_HW_BRANCH_INSTRUCTIONS },
        { PERF_TYPE_HARDWARE, PERF_COUNT_HW_BRANCH_MISSES },
    };
    unsigned long long cfg[PERF_SLOTS];
    int i;
    for (i = 0; i < PERF_SLOTS; i++)
        cfg[i] = ev[i].config;
    cfg[2] = cache_cfg(PERF_COUNT_HW_CACHE_L1D, PERF_COUNT_HW_CACHE_OP_READ,
                       PERF_COUNT_HW_CACHE_RESULT_ACCESS);
    cfg[3] = cache_cfg(PERF_COUNT_HW_CACHE_L1D, PERF_COUNT_HW_CACHE_OP_WRITE,
                       PERF_COUNT_HW_CACHE_RESULT_ACCESS);
    cfg[4] = cache_cfg(PERF_COUNT_HW_CACHE_L1D, PERF_COUNT_HW_CACHE_OP_READ,
                       PERF_COUNT_HW_CACHE_RESULT_MISS);

    for (i = 0; i < PERF_SLOTS; i++) {
        long fd = perf_open(ev[i].type, cfg[i]);
        if (fd < 0) {
            int j;
            for (j = 0; j < i; j++)
                close(g_perf_fd[j]);
            return -1;
        }
        g_perf_fd[i] = (int)fd;
    }
    return 0;
}

static void perf_read_all(unsigned long long out[CTR_METRICS])
{
    unsigned long long v[PERF_SLOTS];
    int i;
    for (i = 0; i < PERF_SLOTS; i++) {
        unsigned long long val = 0;
        if (read(g_perf_fd[i], &val, sizeof val) != (ssize_t)sizeof val)
            val = 0;
        v[i] = val;
    }
    out[0] = v[0];          /* INS */
    out[1] = v[1];          /* CYC */
    out[2] = v[2] + v[3];   /* LST = loads + stores */
    out[3] = v[4];          /* L1_DCM */
    out[4] = v[5];          /* BR_CN */
    out[5] = v[6];          /* MSP */
}
#endif /* HAVE_PERF */

/* ---- PAPI backend ------------------------------------------------------ */
#ifdef HAVE_PAPI
static int g_papi_set = PAPI_NULL;

static int papi_init(void)
{
    int events[CTR_METRICS] = {
        PAPI_TOT_INS, PAPI_TOT_CYC, PAPI_LST_INS, PAPI_L1_DCM, PAPI_BR_CN, PAPI_BR_MSP
    };
    if (PAPI_library_init(PAPI_VER_CURRENT) != PAPI_VER_CURRENT)
        return -1;
    if (PAPI_create_eventset(&g_papi_set) != PAPI_OK)
        return -1;
    if (PAPI_add_events(g_papi_set, events, CTR_METRICS) != PAPI_OK)
        return -1;
    if (PAPI_start(g_papi_set) != PAPI_OK)
        return -1;
    return 0;
}
#endif

static unsigned long long tsc_now(void)
{
#ifdef HAVE_RDTSC
    return __rdtsc();
#else
    struct timespec ts;
    clock_gettime(CLOCK_MONOTONIC, &ts);
    return (unsigned long long)ts.tv_sec * 1000000000ull + (unsigned long long)ts.tv_nsec;
#endif
}

int counters_init(void)
{
    if (g_backend != CTR_NONE)
        return g_backend;
#ifdef HAVE_PAPI
    if (papi_init() == 0) {
        g_backend = CTR_PAPI;
        g_live_mask = 0x3f;
        return g_backend;
    }
#endif
#ifdef HAVE_PERF
    if (perf_init() == 0) {
        g_backend = CTR_PERF;
        g_live_mask = 0x3f;
        return g_backend;
    }
#endif
    g_backend = CTR_TSC;
    g_live_mask = 1 << 1; /* CYC only */
    fprintf(stderr,
            "[tracer] hardware counters unavailable; degrading to CYC-only "
            "via the timestamp counter\n");
    return g_backend;
}

void counters_read(unsigned long long out[CTR_METRICS])
{
    switch (g_backend) {
#ifdef HAVE_PAPI
    case CTR_PAPI: {
        long long v[CTR_METRICS];
        if (PAPI_read(g_papi_set, v) == PAPI_OK) {
            int i;
            for (i = 0; i < CTR_METRICS; i++)
                out[i] = (unsigned long long)(v[i] < 0 ? 0 : v[i]);
            return;
        }
        break;
    }
#endif
#ifdef HAVE_PERF
    case CTR_PERF:
        perf_read_all(out);
        return;
#endif
    default:
        break;
    }
    memset(out, 0, CTR_METRICS * sizeof out[0]);
    out[1] = tsc_now();
}

const char *counters_backend_name(void)
{
    switch (g_backend) {
    case CTR_PAPI: return "papi";
    case CTR_PERF: return "perf";
    case CTR_TSC:  return "tsc";
    default:       return "none";
    }
}

int counters_live_mask(void)
{
    return g_live_mask;
}
