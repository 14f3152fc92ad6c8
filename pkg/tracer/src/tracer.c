/* PMPI interception shim.
 *
 * Link (or LD_PRELOAD) into an MPI program to record one trace file per
 * rank in the line-based trace format.  Between MPI calls the hardware
 * counters accumulate into a COMPUTE record, so every communication
 * record is preceded by the computation span before it.
 *
 * Environment:
 *   MPI_PROXY_TRACE_DIR   output directory (default ".")
 *
 * Handles are written as opaque tokens (pointer values); the offline
 * canonicalizer renumbers them from free pools.  MPI_Waitall unrolls
 * into one WAIT record per non-null request.
 */
#include <inttypes.h>
#include <mpi.h>
#include <stdint.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "counters.h"

static FILE *g_out = NULL;
static char g_iobuf[1 << 20];
static unsigned long long g_base[CTR_METRICS];
static int g_active = 0;

static void tok(char *buf, size_t n, MPI_Comm comm)
{
    if (comm == MPI_COMM_WORLD)
        snprintf(buf, n, "W");
    else
        snprintf(buf, n, "0x%" PRIxPTR, (uintptr_t)comm);
}

static void reqtok(char *buf, size_t n, MPI_Request req)
{
    snprintf(buf, n, "0x%" PRIxPTR, (uintptr_t)req);
}

static void flush_compute(void)
{
    unsigned long long now[CTR_METRICS];
    unsigned long long d[CTR_METRICS];
    int i;
    if (!g_active)
        return;
    counters_read(now);
    for (i = 0; i < CTR_METRICS; i++)
        d[i] = now[i] >= g_base[i] ? now[i] - g_base[i] : 0;
    /* counter hierarchy can wobble under multiplexing; clamp so records
     * always satisfy the model invariants */
    if (d[4] > d[0]) d[4] = d[0];          /* BR_CN <= INS */
    if (d[5] > d[4]) d[5] = d[4];          /* MSP <= BR_CN */
    if (d[3] > d[2]) d[3] = d[2];          /* L1_DCM <= LST */
    fprintf(g_out, "COMPUTE %llu %llu %llu %llu %llu %llu\n",
            d[0], d[1], d[2], d[3], d[4], d[5]);
}

static void rearm(void)
{
    if (g_active)
        counters_read(g_base);
}

static long long vol_of(int count, MPI_Datatype dt)
{
    int size = 0;
    PMPI_Type_size(dt, &size);
    if (count < 0)
        count = 0;
    return (long long)count * size;
}

int MPI_Init(int *argc, char ***argv)
{
    int rc = PMPI_Init(argc, argv);
    int rank = 0;
    char path[4096];
    const char *dir = getenv("MPI_PROXY_TRACE_DIR");
    if (rc != MPI_SUCCESS)
        return rc;
    PMPI_Comm_rank(MPI_COMM_WORLD, &rank);
    snprintf(path, sizeof path, "%s/trace.%d.txt", dir ? dir : ".", rank);
    g_out = fopen(path, "w");
    if (!g_out) {
        fprintf(stderr, "[tracer] cannot open %s\n", path);
        PMPI_Abort(MPI_COMM_WORLD, 1);
    }
    setvbuf(g_out, g_iobuf, _IOFBF, sizeof g_iobuf);
    counters_init();
    g_active = 1;
    rearm();
    return rc;
}

int MPI_Finalize(void)
{
    if (g_active) {
        flush_compute();
        g_active = 0;
        fclose(g_out);
        g_out = NULL;
    }
    return PMPI_Finalize();
}

int MPI_Send(const void *buf, int count, MPI_Datatype dt, int dest, int tag, MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "SEND vol=%lld peer=r%d tag=%d comm=%s\n", vol_of(count, dt), dest, tag, c);
    rc = PMPI_Send(buf, count, dt, dest, tag, comm);
    rearm();
    return rc;
}

int MPI_Recv(void *buf, int count, MPI_Datatype dt, int src, int tag, MPI_Comm comm, MPI_Status *st)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "RECV vol=%lld peer=r%d tag=%d comm=%s\n", vol_of(count, dt), src, tag, c);
    rc = PMPI_Recv(buf, count, dt, src, tag, comm, st);
    rearm();
    return rc;
}

int MPI_Isend(const void *buf, int count, MPI_Datatype dt, int dest, int tag,
              MPI_Comm comm, MPI_Request *req)
{
    char c[32], r[32];
    int rc;
    flush_compute();
    rc = PMPI_Isend(buf, count, dt, dest, tag, comm, req);
    tok(c, sizeof c, comm);
    reqtok(r, sizeof r, *req);
    fprintf(g_out, "ISEND vol=%lld peer=r%d tag=%d comm=%s req=%s\n",
            vol_of(count, dt), dest, tag, c, r);
    rearm();
    return rc;
}

int MPI_Irecv(void *buf, int count, MPI_Datatype dt, int src, int tag,
              MPI_Comm comm, MPI_Request *req)
{
    char c[32], r[32];
    int rc;
    flush_compute();
    rc = PMPI_Irecv(buf, count, dt, src, tag, comm, req);
    tok(c, sizeof c, comm);
    reqtok(r, sizeof r, *req);
    fprintf(g_out, "IRECV vol=%lld peer=r%d tag=%d comm=%s req=%s\n",
            vol_of(count, dt), src, tag, c, r);
    rearm();
    return rc;
}

int MPI_Wait(MPI_Request *req, MPI_Status *st)
{
    char r[32];
    int rc;
    flush_compute();
    reqtok(r, sizeof r, *req); /* value before the library resets it */
    fprintf(g_out, "WAIT req=%s\n", r);
    rc = PMPI_Wait(req, st);
    rearm();
    return rc;
}

int MPI_Waitall(int count, MPI_Request reqs[], MPI_Status sts[])
{
    int i, rc;
    flush_compute();
    for (i = 0; i < count; i++) {
        if (reqs[i] != MPI_REQUEST_NULL) {
            char r[32];
            reqtok(r, sizeof r, reqs[i]);
            fprintf(g_out, "WAIT req=%s\n", r);
        }
    }
    rc = PMPI_Waitall(count, reqs, sts);
    rearm();
    return rc;
}

int MPI_Barrier(MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "BARRIER comm=%s\n", c);
    rc = PMPI_Barrier(comm);
    rearm();
    return rc;
}

int MPI_Allreduce(const void *sb, void *rb, int count, MPI_Datatype dt, MPI_Op op, MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "ALLREDUCE vol=%lld comm=%s\n", vol_of(count, dt), c);
    rc = PMPI_Allreduce(sb, rb, count, dt, op, comm);
    rearm();
    return rc;
}

int MPI_Bcast(void *buf, int count, MPI_Datatype dt, int root, MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "BCAST vol=%lld peer=r%d comm=%s\n", vol_of(count, dt), root, c);
    rc = PMPI_Bcast(buf, count, dt, root, comm);
    rearm();
    return rc;
}

int MPI_Reduce(const void *sb, void *rb, int count, MPI_Datatype dt, MPI_Op op,
               int root, MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "REDUCE vol=%lld peer=r%d comm=%s\n", vol_of(count, dt), root, c);
    rc = PMPI_Reduce(sb, rb, count, dt, op, root, comm);
    rearm();
    return rc;
}

int MPI_Alltoall(const void *sb, int scount, MPI_Datatype sdt,
                 void *rb, int rcount, MPI_Datatype rdt, MPI_Comm comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    fprintf(g_out, "ALLTOALL vol=%lld comm=%s\n", vol_of(scount, sdt), c);
    rc = PMPI_Alltoall(sb, scount, sdt, rb, rcount, rdt, comm);
    rearm();
    return rc;
}

int MPI_Sendrecv(const void *sb, int scount, MPI_Datatype sdt, int dest, int stag,
                 void *rb, int rcount, MPI_Datatype rdt, int src, int rtag,
                 MPI_Comm comm, MPI_Status *st)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, comm);
    /* the model carries one tag; the send tag wins (they match in
     * practice for SPMD exchanges) */
    fprintf(g_out, "SENDRECV vol=%lld peer=r%d rvol=%lld rpeer=r%d tag=%d comm=%s\n",
            vol_of(scount, sdt), dest, vol_of(rcount, rdt), src, stag, c);
    rc = PMPI_Sendrecv(sb, scount, sdt, dest, stag, rb, rcount, rdt, src, rtag, comm, st);
    rearm();
    return rc;
}

int MPI_Comm_split(MPI_Comm comm, int color, int key, MPI_Comm *out)
{
    char c[32];
    int rc;
    flush_compute();
    rc = PMPI_Comm_split(comm, color, key, out);
    tok(c, sizeof c, *out);
    fprintf(g_out, "COMM_SPLIT comm=%s\n", c);
    rearm();
    return rc;
}

int MPI_Comm_dup(MPI_Comm comm, MPI_Comm *out)
{
    char c[32];
    int rc;
    flush_compute();
    rc = PMPI_Comm_dup(comm, out);
    tok(c, sizeof c, *out);
    fprintf(g_out, "COMM_DUP comm=%s\n", c);
    rearm();
    return rc;
}

int MPI_Comm_free(MPI_Comm *comm)
{
    char c[32];
    int rc;
    flush_compute();
    tok(c, sizeof c, *comm); /* value before the library invalidates it */
    fprintf(g_out, "COMM_FREE comm=%s\n", c);
    rc = PMPI_Comm_free(comm);
    rearm();
    return rc;
}
