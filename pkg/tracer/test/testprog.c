/* Compute-bound MPI test program for tracer validation.
 *
 * Each iteration does a large computation kernel, a ring exchange with
 * non-blocking sends completed by Waitall, a small Sendrecv, and an
 * Allreduce; communicator management runs once.  Usage:
 *   testprog [iterations]
 */
#include <mpi.h>
#include <stdio.h>
#include <stdlib.h>

static volatile long sink;

static void kernel(long n)
{
    long a = sink | 1;
    long i;
    for (i = 0; i < n; i++) {
        a = a * 3 + 1;
        a ^= a >> 5;
        if (a & 4)
            a += i;
    }
    sink = a;
}

int main(int argc, char **argv)
{
    int rank, size, it;
    int iterations = argc > 1 ? atoi(argv[1]) : 150;
    char sbuf[4096], rbuf[4096];
    double acc = 0, sum = 0;
    double t0, elapsed, slowest;
    MPI_Comm dup_comm;
    MPI_Request reqs[2];

    MPI_Init(&argc, &argv);
    MPI_Comm_rank(MPI_COMM_WORLD, &rank);
    MPI_Comm_size(MPI_COMM_WORLD, &size);

    MPI_Comm_dup(MPI_COMM_WORLD, &dup_comm);
    MPI_Bcast(sbuf, 64, MPI_BYTE, 0, MPI_COMM_WORLD);

    MPI_Barrier(MPI_COMM_WORLD);
    t0 = MPI_Wtime();
    for (it = 0; it < iterations; it++) {
        int right = (rank + 1) % size;
        int left = (rank + size - 1) % size;
        kernel(600000);
        MPI_Irecv(rbuf, 1024, MPI_BYTE, left, 7, dup_comm, &reqs[0]);
        MPI_Isend(sbuf, 1024, MPI_BYTE, right, 7, dup_comm, &reqs[1]);
        kernel(200000);
        MPI_Waitall(2, reqs, MPI_STATUSES_IGNORE);
        MPI_Sendrecv(sbuf, 256, MPI_BYTE, right, 9, rbuf, 256, MPI_BYTE, left, 9,
                     MPI_COMM_WORLD, MPI_STATUS_IGNORE);
        acc += sink;
        MPI_Allreduce(&acc, &sum, 1, MPI_DOUBLE, MPI_SUM, MPI_COMM_WORLD);
    }

    MPI_Barrier(MPI_COMM_WORLD);
    elapsed = MPI_Wtime() - t0;
    MPI_Reduce(&elapsed, &slowest, 1, MPI_DOUBLE, MPI_MAX, 0, MPI_COMM_WORLD);
    MPI_Comm_free(&dup_comm);
    if (rank == 0)
        printf("loop_seconds %.6f checksum %.3e\n", slowest, sum);
    MPI_Finalize();
    return 0;
}
