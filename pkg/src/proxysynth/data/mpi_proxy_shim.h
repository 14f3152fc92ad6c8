/* Single-process stand-in for <mpi.h> used to replay generated proxy
 * programs without an MPI installation.  Every MPI entry point is a
 * no-op; the generated code logs one "(<terminal-key>)" line per event
 * through mpi_proxy_log, which writes to $MPI_PROXY_LOG or stdout.
 * Rank and world size come from $MPI_PROXY_RANK / $MPI_PROXY_SIZE.
 */
#ifndef MPI_PROXY_SHIM_H
#define MPI_PROXY_SHIM_H

#include <stdio.h>
#include <stdlib.h>

typedef int MPI_Comm;
typedef int MPI_Request;
typedef int MPI_Datatype;
typedef int MPI_Op;
typedef struct { int MPI_SOURCE; int MPI_TAG; int MPI_ERROR; } MPI_Status;

#define MPI_COMM_WORLD 0
#define MPI_BYTE 1
#define MPI_BOR 2
#define MPI_SUCCESS 0
#define MPI_STATUS_IGNORE ((MPI_Status *)0)
#define MPI_REQUEST_NULL (-1)

static int mpi_proxy_rank_ = 0;
static int mpi_proxy_size_ = 1;
static int mpi_proxy_comm_counter_ = 0;
static FILE *mpi_proxy_log_file_ = NULL;

static inline void mpi_proxy_log(const char *line)
{
    if (!mpi_proxy_log_file_) {
        const char *path = getenv("MPI_PROXY_LOG");
        mpi_proxy_log_file_ = path ? fopen(path, "w") : stdout;
        if (!mpi_proxy_log_file_)
            mpi_proxy_log_file_ = stdout;
    }
    fputs(line, mpi_proxy_log_file_);
    fputc('\n', mpi_proxy_log_file_);
}

static inline int MPI_Init(int *argc, char ***argv)
{
    const char *r = getenv("MPI_PROXY_RANK");
    const char *s = getenv("MPI_PROXY_SIZE");
    (void)argc; (void)argv;
    mpi_proxy_rank_ = r ? atoi(r) : 0;
    mpi_proxy_size_ = s ? atoi(s) : 1;
    return MPI_SUCCESS;
}

static inline int MPI_Finalize(void)
{
    if (mpi_proxy_log_file_ && mpi_proxy_log_file_ != stdout)
        fclose(mpi_proxy_log_file_);
    mpi_proxy_log_file_ = NULL;
    return MPI_SUCCESS;
}

static inline int MPI_Comm_rank(MPI_Comm comm, int *rank) { (void)comm; *rank = mpi_proxy_rank_; return MPI_SUCCESS; }
static inline int MPI_Comm_size(MPI_Comm comm, int *size) { (void)comm; *size = mpi_proxy_size_; return MPI_SUCCESS; }
static inline int MPI_Abort(MPI_Comm comm, int code) { (void)comm; exit(code); }

static inline int MPI_Send(const void *buf, int count, MPI_Datatype dt, int dest, int tag, MPI_Comm comm)
{ (void)buf; (void)count; (void)dt; (void)dest; (void)tag; (void)comm; return MPI_SUCCESS; }

static inline int MPI_Recv(void *buf, int count, MPI_Datatype dt, int src, int tag, MPI_Comm comm, MPI_Status *st)
{ (void)buf; (void)count; (void)dt; (void)src; (void)tag; (void)comm; (void)st; return MPI_SUCCESS; }

static inline int MPI_Isend(const void *buf, int count, MPI_Datatype dt, int dest, int tag, MPI_Comm comm, MPI_Request *req)
{ (void)buf; (void)count; (void)dt; (void)dest; (void)tag; (void)comm; *req = 0; return MPI_SUCCESS; }

static inline int MPI_Irecv(void *buf, int count, MPI_Datatype dt, int src, int tag, MPI_Comm comm, MPI_Request *req)
{ (void)buf; (void)count; (void)dt; (void)src; (void)tag; (void)comm; *req = 0; return MPI_SUCCESS; }

static inline int MPI_Wait(MPI_Request *req, MPI_Status *st) { (void)st; *req = MPI_REQUEST_NULL; return MPI_SUCCESS; }

static inline int MPI_Barrier(MPI_Comm comm) { (void)comm; return MPI_SUCCESS; }

static inline int MPI_Allreduce(const void *sb, void *rb, int count, MPI_Datatype dt, MPI_Op op, MPI_Comm comm)
{ (void)sb; (void)rb; (void)count; (void)dt; (void)op; (void)comm; return MPI_SUCCESS; }

static inline int MPI_Bcast(void *buf, int count, MPI_Datatype dt, int root, MPI_Comm comm)
{ (void)buf; (void)count; (void)dt; (void)root; (void)comm; return MPI_SUCCESS; }

static inline int MPI_Reduce(const void *sb, void *rb, int count, MPI_Datatype dt, MPI_Op op, int root, MPI_Comm comm)
{ (void)sb; (void)rb; (void)count; (void)dt; (void)op; (void)root; (void)comm; return MPI_SUCCESS; }

static inline int MPI_Alltoall(const void *sb, int scount, MPI_Datatype sdt, void *rb, int rcount, MPI_Datatype rdt, MPI_Comm comm)
{ (void)sb; (void)scount; (void)sdt; (void)rb; (void)rcount; (void)rdt; (void)comm; return MPI_SUCCESS; }

static inline int MPI_Sendrecv(const void *sb, int scount, MPI_Datatype sdt, int dest, int stag,
                        void *rb, int rcount, MPI_Datatype rdt, int src, int rtag,
                        MPI_Comm comm, MPI_Status *st)
{ (void)sb; (void)scount; (void)sdt; (void)dest; (void)stag;
  (void)rb; (void)rcount; (void)rdt; (void)src; (void)rtag; (void)comm; (void)st; return MPI_SUCCESS; }

static inline int MPI_Comm_split(MPI_Comm comm, int color, int key, MPI_Comm *out)
{ (void)comm; (void)color; (void)key; *out = ++mpi_proxy_comm_counter_; return MPI_SUCCESS; }

static inline int MPI_Comm_dup(MPI_Comm comm, MPI_Comm *out)
{ (void)comm; *out = ++mpi_proxy_comm_counter_; return MPI_SUCCESS; }

static inline int MPI_Comm_free(MPI_Comm *comm) { *comm = -1; return MPI_SUCCESS; }

#endif /* MPI_PROXY_SHIM_H */
