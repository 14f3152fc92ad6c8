/* The 11 synthetic computation blocks, identical to the bodies the
 * code generator emits: calibration must measure exactly the code the
 * proxy will run.  Block roles, in column order:
 *   1 integer ALU     2 dependent chain   3 load-heavy
 *   4 store-heavy     5 strided (cache)   6 predictable branches
 *   7 random branches 8 load + branch     9 multiply chain
 *  10 busy-wait loop 11 loop-overhead carrier
 */
#ifndef PROXY_BLOCKS_H
#define PROXY_BLOCKS_H

#include <stddef.h>

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

#define PROXY_BLOCK_COUNT 11

/* Run block 1..11 for n iterations. */
static void run_block(int block, long long n)
{
    switch (block) {
    case 1:  BLK_ALU(n); break;
    case 2:  BLK_CHAIN(n); break;
    case 3:  BLK_LOAD(n); break;
    case 4:  BLK_STORE(n); break;
    case 5:  BLK_STRIDE(n); break;
    case 6:  BLK_BR_PRED(n); break;
    case 7:  BLK_BR_RAND(n); break;
    case 8:  BLK_LDBR(n); break;
    case 9:  BLK_MUL(n); break;
    case 10: BLK_SPIN(n); break;
    case 11: BLK_LOOP_OVERHEAD(n); break;
    default: break;
    }
}

#endif
