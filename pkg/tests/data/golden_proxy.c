/* Proxy program generated from an event-trace grammar. */

#ifdef MPI_PROXY_SHIM
#include "mpi_proxy_shim.h"
#else
#include <mpi.h>
#endif
#include <stddef.h>
#include <stdio.h>
#include <stdlib.h>

#ifdef MPI_PROXY_SHIM
#define PROXY_LOG(key) mpi_proxy_log(key)
#else
#define PROXY_LOG(key)
#endif

#define PROXY_ARENA_BYTES 262144
static volatile long g_sink;
static volatile unsigned g_rand_state = 0x1234567u;
static unsigned char g_arena[PROXY_ARENA_BYTES];

#define BLK_ALU(n) do { long _a = g_sink; long long _i; \
    for (_i = 0; _i < (n); _i++) { _a += (long)_i * 3 + 1; _a ^= _a >> 7; } \
    g_sink = _a; } while (0)

#define BLK_CHAIN(n) do { long _a = g_sink | 1; long long _i; \
    for (_i = 0; _i < (n); _i++) { _a = (_a * 3 + 1) ^ (_a >> 2); } \
    g_sink = _a; } while (0)

#define BLK_LOAD(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \
    for (_i = 0; _i < (n); _i++) { _a += g_arena[_p]; _a += g_arena[_p + 8]; _a += g_arena[_p + 16]; \
        _p = (_p + 24) & (PROXY_ARENA_BYTES - 1); } \
    g_sink = _a; } while (0)

#define BLK_STORE(n) do { size_t _p = (size_t)(g_sink & 0xff); long long _i; \
    for (_i = 0; _i < (n); _i++) { g_arena[_p] = (unsigned char)_i; g_arena[_p + 8] = (unsigned char)(_i >> 3); \
        g_arena[_p + 16] = (unsigned char)(_i >> 5); _p = (_p + 24) & (PROXY_ARENA_BYTES - 1); } \
    } while (0)

#define BLK_STRIDE(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \
    for (_i = 0; _i < (n); _i++) { _a += g_arena[_p]; g_arena[_p + 1] = (unsigned char)_a; \
        _p = (_p + 4099) & (PROXY_ARENA_BYTES - 1); } \
    g_sink = _a; } while (0)

#define BLK_BR_PRED(n) do { long _a = g_sink; long long _i; \
    for (_i = 0; _i < (n); _i++) { \
        if ((_i & 3) == 0) _a += 3; else if ((_i & 3) == 1) _a -= 1; else _a ^= 5; \
        if (_a > 0) _a -= (_i & 7); } \
    g_sink = _a; } while (0)

#define BLK_BR_RAND(n) do { long _a = g_sink; unsigned _r = g_rand_state | 1u; long long _i; \
    for (_i = 0; _i < (n); _i++) { _r = _r * 1103515245u + 12345u; \
        if (_r & 0x10000u) _a += 7; else _a -= 3; \
        if (_r & 0x20000u) _a ^= _r >> 11; } \
    g_rand_state = _r; g_sink = _a; } while (0)

#define BLK_LDBR(n) do { long _a = 0; size_t _p = (size_t)(g_sink & 0xff); long long _i; \
    for (_i = 0; _i < (n); _i++) { unsigned char _v = g_arena[_p]; \
        if (_v & 1) _a += _v; else _a -= 1; \
        g_arena[_p + 2] = (unsigned char)_a; _p = (_p + 40) & (PROXY_ARENA_BYTES - 1); } \
    g_sink = _a; } while (0)

#define BLK_MUL(n) do { long _a = g_sink | 3; long long _i; \
    for (_i = 0; _i < (n); _i++) { _a = _a * 0x9e3779b1L + 17; _a = _a * 31 + (_a >> 5); } \
    g_sink = _a; } while (0)

#define BLK_SPIN(n) do { long _a = g_sink; long long _i; \
    for (_i = 0; _i < (n); _i++) { _a = (_a >> 1) ^ (long)_i; } \
    g_sink = _a; } while (0)

#define BLK_LOOP_OVERHEAD(n) do { long _a = 0; long long _i; \
    for (_i = 0; _i < (n); _i++) { _a ^= g_sink; } \
    g_sink = _a; } while (0)

static int g_rank, g_size;
static unsigned char g_sendbuf[4096];
static unsigned char g_recvbuf[4096];
static MPI_Request g_req[4];
static MPI_Comm g_comm[1];

static void ev_t0(void)
{
    PROXY_LOG("(IRECV vol=1024 peer=+1 tag=0 comm=0 req=0)");
    MPI_Irecv(g_recvbuf, 1024, MPI_BYTE, g_rank + (1), 0, g_comm[0], &g_req[0]);
}

static void ev_t1(void)
{
    PROXY_LOG("(ISEND vol=1024 peer=+1 tag=0 comm=0 req=1)");
    MPI_Isend(g_sendbuf, 1024, MPI_BYTE, g_rank + (1), 0, g_comm[0], &g_req[1]);
}

static void ev_t2(void)
{
    PROXY_LOG("(COMPUTE 2617000 1863000 760000 31905 279000 6070)");
    BLK_ALU(1994LL);
    BLK_LOAD(2668LL);
    BLK_STORE(7LL);
    BLK_STRIDE(130LL);
    BLK_BR_RAND(94LL);
    BLK_LDBR(1LL);
    BLK_MUL(138LL);
    BLK_SPIN(16794LL);
    BLK_LOOP_OVERHEAD(5032LL);
}

static void ev_t3(void)
{
    PROXY_LOG("(WAIT req=0)");
    MPI_Wait(&g_req[0], MPI_STATUS_IGNORE);
}

static void ev_t4(void)
{
    PROXY_LOG("(WAIT req=1)");
    MPI_Wait(&g_req[1], MPI_STATUS_IGNORE);
}

static void ev_t5(void)
{
    PROXY_LOG("(IRECV vol=4096 peer=+3 tag=0 comm=0 req=0)");
    MPI_Irecv(g_recvbuf, 4096, MPI_BYTE, g_rank + (3), 0, g_comm[0], &g_req[0]);
}

static void ev_t6(void)
{
    PROXY_LOG("(ISEND vol=4096 peer=+1 tag=0 comm=0 req=1)");
    MPI_Isend(g_sendbuf, 4096, MPI_BYTE, g_rank + (1), 0, g_comm[0], &g_req[1]);
}

static void ev_t7(void)
{
    PROXY_LOG("(ALLREDUCE vol=64 comm=0)");
    MPI_Allreduce(g_sendbuf, g_recvbuf, 0, MPI_BYTE, MPI_BOR, g_comm[0]);
}

static void ev_t8(void)
{
    PROXY_LOG("(IRECV vol=1024 peer=-1 tag=0 comm=0 req=0)");
    MPI_Irecv(g_recvbuf, 1024, MPI_BYTE, g_rank + (-1), 0, g_comm[0], &g_req[0]);
}

static void ev_t9(void)
{
    PROXY_LOG("(IRECV vol=1024 peer=+1 tag=0 comm=0 req=1)");
    MPI_Irecv(g_recvbuf, 1024, MPI_BYTE, g_rank + (1), 0, g_comm[0], &g_req[1]);
}

static void ev_t10(void)
{
    PROXY_LOG("(ISEND vol=1024 peer=-1 tag=0 comm=0 req=2)");
    MPI_Isend(g_sendbuf, 1024, MPI_BYTE, g_rank + (-1), 0, g_comm[0], &g_req[2]);
}

static void ev_t11(void)
{
    PROXY_LOG("(ISEND vol=1024 peer=+1 tag=0 comm=0 req=3)");
    MPI_Isend(g_sendbuf, 1024, MPI_BYTE, g_rank + (1), 0, g_comm[0], &g_req[3]);
}

static void ev_t12(void)
{
    PROXY_LOG("(WAIT req=2)");
    MPI_Wait(&g_req[2], MPI_STATUS_IGNORE);
}

static void ev_t13(void)
{
    PROXY_LOG("(WAIT req=3)");
    MPI_Wait(&g_req[3], MPI_STATUS_IGNORE);
}

static void ev_t14(void)
{
    PROXY_LOG("(IRECV vol=4096 peer=-1 tag=0 comm=0 req=0)");
    MPI_Irecv(g_recvbuf, 4096, MPI_BYTE, g_rank + (-1), 0, g_comm[0], &g_req[0]);
}

static void ev_t15(void)
{
    PROXY_LOG("(ISEND vol=1024 peer=-1 tag=0 comm=0 req=1)");
    MPI_Isend(g_sendbuf, 1024, MPI_BYTE, g_rank + (-1), 0, g_comm[0], &g_req[1]);
}

static void ev_t16(void)
{
    PROXY_LOG("(ISEND vol=4096 peer=-3 tag=0 comm=0 req=1)");
    MPI_Isend(g_sendbuf, 4096, MPI_BYTE, g_rank + (-3), 0, g_comm[0], &g_req[1]);
}

static void fn_r0(void)
{
    ev_t2();
    ev_t3();
    ev_t4();
}

static void fn_r1(void)
{
    ev_t2();
    ev_t7();
}

static void fn_r2(void)
{
    ev_t0();
    ev_t1();
    fn_r0();
}

static void fn_r3(void)
{
    ev_t5();
    ev_t6();
    fn_r0();
}

static void fn_r4(void)
{
    ev_t8();
    ev_t9();
    ev_t10();
    ev_t11();
    fn_r0();
    ev_t12();
    ev_t13();
}

static void fn_r5(void)
{
    ev_t14();
    ev_t6();
    fn_r0();
}

static void fn_r6(void)
{
    ev_t8();
    ev_t15();
    fn_r0();
}

static void fn_r7(void)
{
    ev_t14();
    ev_t16();
    fn_r0();
}

int main(int argc, char **argv)
{
    long long _i;
    (void)_i;
    {
        /* arena fill matching the calibration conditions */
        unsigned _r = 12345u;
        size_t _p;
        for (_p = 0; _p < PROXY_ARENA_BYTES; _p++) {
            _r = _r * 1103515245u + 12345u;
            g_arena[_p] = (unsigned char)(_r >> 16);
        }
    }
    MPI_Init(&argc, &argv);
    g_comm[0] = MPI_COMM_WORLD;
    MPI_Comm_rank(g_comm[0], &g_rank);
    MPI_Comm_size(g_comm[0], &g_size);
    if (g_size != 4) {
        fprintf(stderr, "proxy was generated for 4 ranks, got %d\n", g_size);
        MPI_Abort(g_comm[0], 1);
    }

    if (g_rank == 0) {
        for (_i = 0; _i < 6LL; _i++) fn_r2();
        for (_i = 0; _i < 6LL; _i++) fn_r3();
        for (_i = 0; _i < 6LL; _i++) fn_r1();
    }
    if (g_rank >= 1 && g_rank <= 2) {
        for (_i = 0; _i < 6LL; _i++) fn_r4();
        for (_i = 0; _i < 6LL; _i++) fn_r5();
        for (_i = 0; _i < 6LL; _i++) fn_r1();
    }
    if (g_rank == 3) {
        for (_i = 0; _i < 6LL; _i++) fn_r6();
        for (_i = 0; _i < 6LL; _i++) fn_r7();
        for (_i = 0; _i < 6LL; _i++) fn_r1();
    }

    MPI_Finalize();
    return 0;
}
