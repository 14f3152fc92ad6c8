/* Calibration micro-benchmark.
 *
 * Measures the per-iteration counter cost of each of the 11 blocks by
 * running a repetition ladder and fitting a straight line per metric.
 * Writes the 6x11 block-cost matrix plus a machine-readable report
 * (per-block per-metric slope and R^2, backend in use).
 *
 * Usage: calibrate [matrix_out [report_out]]
 *   default: block_matrix.txt calibration_report.txt
 */
#define _GNU_SOURCE
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#ifdef __linux__
#include <sched.h>
#endif

#include "blocks.h"
#include "counters.h"

static const char *METRIC_NAMES[CTR_METRICS] = {
    "INS", "CYC", "LST", "L1_DCM", "BR_CN", "MSP"
};

enum { LADDER = 4, REPEATS = 7 };
static const long long LADDER_BASE = 1500000;

/* min-of-REPEATS delta for one (block, reps) point: measurement noise
 * (interrupts, scheduling) is strictly additive, so the minimum is the
 * cleanest estimate of the true cost */
static void measure(int block, long long reps, double out[CTR_METRICS])
{
    unsigned long long before[CTR_METRICS], after[CTR_METRICS];
    int r, m;
    for (m = 0; m < CTR_METRICS; m++)
        out[m] = 0;
    for (r = 0; r < REPEATS; r++) {
        counters_read(before);
        run_block(block, reps);
        counters_read(after);
        for (m = 0; m < CTR_METRICS; m++) {
            double d = (double)(after[m] - before[m]);
            if (r == 0 || d < out[m])
                out[m] = d;
        }
    }
}

/* least squares y = intercept + slope x; returns R^2 */
static double fit(const double *x, const double *y, int n, double *slope)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
    double mx, my, vxy, vxx, vyy, r2, b;
    int i;
    for (i = 0; i < n; i++) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
        syy += y[i] * y[i];
    }
    mx = sx / n;
    my = sy / n;
    vxx = sxx / n - mx * mx;
    vxy = sxy / n - mx * my;
    vyy = syy / n - my * my;
    b = vxx > 0 ? vxy / vxx : 0.0;
    *slope = b > 0 ? b : 0.0;
    if (vyy <= 0)
        return 1.0; /* constant response fits exactly */
    r2 = (vxy * vxy) / (vxx * vyy);
    return r2;
}

int main(int argc, char **argv)
{
    const char *matrix_path = argc > 1 ? argv[1] : "block_matrix.txt";
    const char *report_path = argc > 2 ? argv[2] : "calibration_report.txt";
    double matrix[CTR_METRICS][PROXY_BLOCK_COUNT];
    double r2s[CTR_METRICS][PROXY_BLOCK_COUNT];
    int live;
    FILE *rep, *mat;
    int block, m, k;

#ifdef __linux__
    {
        /* repeat runs must sit on the same core: cross-CPU migration is
         * the main source of run-to-run slope drift */
        cpu_set_t set;
        CPU_ZERO(&set);
        CPU_SET(0, &set);
        sched_setaffinity(0, sizeof set, &set);
    }
#endif
    counters_init();
    live = counters_live_mask();

    /* deterministic arena fill: the load/branch blocks' cost depends on
     * byte parity, so calibration and generated proxies must run over
     * the same content (the generator emits this same fill) */
    {
        unsigned r = 12345u;
        size_t p;
        for (p = 0; p < PROXY_ARENA_BYTES; p++) {
            r = r * 1103515245u + 12345u;
            g_arena[p] = (unsigned char)(r >> 16);
        }
    }

    /* warmup: touch the arena, fault every page, and spin long enough
     * for clocks and boost states to settle (~0.3 s of cycles) */
    for (block = 1; block <= PROXY_BLOCK_COUNT; block++)
        run_block(block, LADDER_BASE / 2);
    {
        unsigned long long t0[CTR_METRICS], t1[CTR_METRICS];
        counters_read(t0);
        do {
            run_block(1, 1 << 20);
            counters_read(t1);
        } while (t1[1] - t0[1] < 900000000ull);
    }

    for (block = 1; block <= PROXY_BLOCK_COUNT; block++) {
        double xs[LADDER], ys[LADDER][CTR_METRICS];
        double probe[CTR_METRICS];
        long long base = LADDER_BASE;
        /* size the ladder so even the cheapest block's smallest point
         * burns ~30M cycles, keeping scheduler jitter in the noise */
        measure(block, LADDER_BASE, probe);
        if (probe[1] > 0) {
            double per_iter = probe[1] / (double)LADDER_BASE;
            if (per_iter < 0.05)
                per_iter = 0.05;
            base = (long long)(3e7 / per_iter);
            if (base < LADDER_BASE)
                base = LADDER_BASE;
            if (base > 100000000ll)
                base = 100000000ll;
        }
        for (k = 0; k < LADDER; k++) {
            long long reps = base << k;
            double d[CTR_METRICS];
            measure(block, reps, d);
            xs[k] = (double)reps;
            for (m = 0; m < CTR_METRICS; m++)
                ys[k][m] = d[m];
        }
        for (m = 0; m < CTR_METRICS; m++) {
            double col[LADDER];
            double slope;
            for (k = 0; k < LADDER; k++)
                col[k] = ys[k][m];
            r2s[m][block - 1] = fit(xs, col, LADDER, &slope);
            matrix[m][block - 1] = slope;
        }
    }

    /* CYC must be positive for every block: a zero measurement (possible
     * only for degenerate backends) is floored at one cycle per iteration */
    for (block = 0; block < PROXY_BLOCK_COUNT; block++)
        if (matrix[1][block] <= 0)
            matrix[1][block] = 1.0;

    mat = fopen(matrix_path, "w");
    if (!mat) {
        fprintf(stderr, "cannot open %s\n", matrix_path);
        return 1;
    }
    fprintf(mat, "# measured block costs per iteration (backend: %s)\n",
            counters_backend_name());
    fprintf(mat, "# rows: INS CYC LST L1_DCM BR_CN MSP; columns: block 1..11\n");
    for (m = 0; m < CTR_METRICS; m++) {
        for (block = 0; block < PROXY_BLOCK_COUNT; block++)
            fprintf(mat, "%s%.6g", block ? " " : "", matrix[m][block]);
        fprintf(mat, "\n");
    }
    fclose(mat);

    rep = fopen(report_path, "w");
    if (!rep) {
        fprintf(stderr, "cannot open %s\n", report_path);
        return 1;
    }
    fprintf(rep, "backend=%s\n", counters_backend_name());
    fprintf(rep, "live_mask=0x%x\n", live);
    for (block = 0; block < PROXY_BLOCK_COUNT; block++)
        for (m = 0; m < CTR_METRICS; m++)
            if (live & (1 << m))
                fprintf(rep, "block=%d metric=%s slope=%.6g r2=%.6f\n",
                        block + 1, METRIC_NAMES[m], matrix[m][block], r2s[m][block]);
    fclose(rep);
    printf("wrote %s and %s (backend %s)\n", matrix_path, report_path,
           counters_backend_name());
    return 0;
}
