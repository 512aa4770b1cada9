/*
 * oly_rt.c - abstract machine runtime for microdyn kernels (host emulation).
 *
 * Provides the frame arena, display, first-fit heap, proc values, the
 * device side of the host channel and the dynamic loader. The kernel talks
 * to the host monitor over the file descriptor named by OLY_CHANNEL_FD;
 * without it the kernel runs standalone and prints to stdout.
 */
#define _DEFAULT_SOURCE 1
#define _POSIX_C_SOURCE 200809L
#include "oly_rt.h"

#include <errno.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>
#include <sys/mman.h>
#include <time.h>
#include <unistd.h>

enum {
  WIRE_LOAD = 0x01,
  WIRE_OUTPUT = 0x02,
  WIRE_EXIT = 0x03,
  WIRE_MARK = 0x04,
  WIRE_STATUS_OK = 0x00
};

#define HEAP_HEADER 16u
#define HEAP_MIN_PAYLOAD 16u

typedef struct HeapBlock {
  uint32_t size; /* payload bytes */
  uint32_t free;
  uint64_t prev_size; /* payload bytes of the physically previous block, 0 for the first */
} HeapBlock;

typedef struct Interned {
  struct Interned *next;
  char text[];
} Interned;

typedef struct Impl {
  unsigned char *heap;
  size_t heap_bytes;
  int heap_executable;
  size_t page_bytes;
  char *frames;
  size_t frame_bytes;
  void **display;
  int channel;
  char *line;
  size_t line_len;
  size_t line_cap;
  Interned *interned;
  const OlyDynInfo *dynamic;
  Int dynamic_count;
  int trace_heap;
} Impl;

static Impl *impl_of(OlyContext *c) { return (Impl *)c->impl; }

/* ---- channel ---------------------------------------------------------- */

static int write_all(int fd, const void *data, size_t len) {
  const unsigned char *p = (const unsigned char *)data;
  while (len > 0) {
    ssize_t n = write(fd, p, len);
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    p += n;
    len -= (size_t)n;
  }
  return 0;
}

static int read_all(int fd, void *data, size_t len) {
  unsigned char *p = (unsigned char *)data;
  while (len > 0) {
    ssize_t n = read(fd, p, len);
    if (n < 0) {
      if (errno == EINTR) continue;
      return -1;
    }
    if (n == 0) return -1;
    p += n;
    len -= (size_t)n;
  }
  return 0;
}

static void put_u32(unsigned char *out, uint32_t v) {
  out[0] = (unsigned char)(v & 0xff);
  out[1] = (unsigned char)((v >> 8) & 0xff);
  out[2] = (unsigned char)((v >> 16) & 0xff);
  out[3] = (unsigned char)((v >> 24) & 0xff);
}

static uint32_t get_u32(const unsigned char *in) {
  return (uint32_t)in[0] | ((uint32_t)in[1] << 8) | ((uint32_t)in[2] << 16) |
         ((uint32_t)in[3] << 24);
}

static int send_frame(int fd, unsigned char opcode, const void *payload, uint32_t len) {
  unsigned char head[5];
  head[0] = opcode;
  put_u32(head + 1, len);
  if (write_all(fd, head, sizeof head) != 0) return -1;
  return len ? write_all(fd, payload, len) : 0;
}

static void send_exit(Impl *im, int status) {
  if (im->channel < 0) return;
  unsigned char msg[5];
  msg[0] = WIRE_EXIT;
  put_u32(msg + 1, (uint32_t)status);
  (void)write_all(im->channel, msg, sizeof msg);
}

/* ---- errors ----------------------------------------------------------- */

static const char *error_name(Int code) {
  switch (code) {
    case OLY_ERR_UNLOADED_PROC: return "UnloadedProcError";
    case OLY_ERR_FRAME_OVERFLOW: return "FrameOverflow";
    case OLY_ERR_OUT_OF_MEMORY: return "OutOfMemory";
    case OLY_ERR_INDEX: return "IndexError";
    case OLY_ERR_ZERO_DIVISION: return "ZeroDivisionError";
    case OLY_ERR_UNKNOWN_FUNCTION: return "UnknownFunctionError";
    case OLY_ERR_CHANNEL: return "ChannelError";
    case OLY_ERR_VALUE: return "ValueError";
    case OLY_ERR_EXECUTABLE_HEAP: return "ExecutableHeapError";
    default: return "RuntimeError";
  }
}

static void rt_fail(OlyContext *c, Int code) {
  Impl *im = impl_of(c);
  fflush(stdout);
  fprintf(stderr, "error: %s\n", error_name(code));
  fflush(stderr);
  send_exit(im, 1);
  _exit(1);
}

/* ---- heap ------------------------------------------------------------- */

static HeapBlock *heap_first(Impl *im) { return (HeapBlock *)im->heap; }

static HeapBlock *heap_next(Impl *im, HeapBlock *b) {
  unsigned char *n = (unsigned char *)b + HEAP_HEADER + b->size;
  return n < im->heap + im->heap_bytes ? (HeapBlock *)n : NULL;
}

static size_t heap_free_bytes(Impl *im) {
  size_t total = 0;
  for (HeapBlock *b = heap_first(im); b; b = heap_next(im, b))
    if (b->free) total += b->size;
  return total;
}

static void *heap_alloc(OlyContext *c, size_t bytes) {
  Impl *im = impl_of(c);
  size_t need = bytes < HEAP_MIN_PAYLOAD ? HEAP_MIN_PAYLOAD : (bytes + 15u) & ~(size_t)15u;
  for (HeapBlock *b = heap_first(im); b; b = heap_next(im, b)) {
    if (!b->free || b->size < need) continue;
    if (b->size - need >= HEAP_HEADER + HEAP_MIN_PAYLOAD) {
      HeapBlock *rest = (HeapBlock *)((unsigned char *)b + HEAP_HEADER + need);
      rest->size = (uint32_t)(b->size - need - HEAP_HEADER);
      rest->free = 1;
      rest->prev_size = need;
      HeapBlock *after = heap_next(im, rest);
      if (after) after->prev_size = rest->size;
      b->size = (uint32_t)need;
    }
    b->free = 0;
    return (unsigned char *)b + HEAP_HEADER;
  }
  rt_fail(c, OLY_ERR_OUT_OF_MEMORY);
  return NULL;
}

static void heap_free(OlyContext *c, void *payload) {
  Impl *im = impl_of(c);
  HeapBlock *b = (HeapBlock *)((unsigned char *)payload - HEAP_HEADER);
  b->free = 1;
  HeapBlock *next = heap_next(im, b);
  if (next && next->free) {
    b->size += HEAP_HEADER + next->size;
    HeapBlock *after = heap_next(im, b);
    if (after) after->prev_size = b->size;
  }
  if ((unsigned char *)b != im->heap) {
    HeapBlock *prev = (HeapBlock *)((unsigned char *)b - HEAP_HEADER - b->prev_size);
    if (prev->free) {
      prev->size += HEAP_HEADER + b->size;
      HeapBlock *after = heap_next(im, prev);
      if (after) after->prev_size = prev->size;
    }
  }
}

static void trace_heap(OlyContext *c, const char *event) {
  Impl *im = impl_of(c);
  if (im->trace_heap) fprintf(stderr, "heap %s free=%zu\n", event, heap_free_bytes(im));
}

/* ---- procs ------------------------------------------------------------ */

static Int env_depth(OlyContext *c, Env env) { return (Int)(c->display_top - env); }

static Proc rt_mk_proc(Env env, OlyCode entry, Int arg_count, Int slot_count) {
  OlyContext *c = OLY_CTX(env);
  Proc p = (Proc)heap_alloc(c, sizeof(struct OlyProc));
  OlyFrame *owner = OLY_FRAME(env[0]);
  p->entry = entry;
  p->env = env;
  p->def_frame = env[0];
  p->arg_count = arg_count;
  p->slot_count = slot_count;
  p->depth = env_depth(c, env) + 1;
  p->live = 1;
  p->active = 0;
  p->block = NULL;
  p->next = owner->procs;
  owner->procs = p;
  return p;
}

static void rt_release_procs(OlyContext *c, Proc list) {
  while (list) {
    Proc next = list->next;
    heap_free(c, list);
    list = next;
  }
}

static const OlyDynInfo *find_dynamic(Impl *im, const char *name) {
  for (Int i = 0; i < im->dynamic_count; ++i)
    if (strcmp(im->dynamic[i].name, name) == 0) return &im->dynamic[i];
  return NULL;
}

static Proc rt_load_proc(Env env, Str name, Int arg_count) {
  OlyContext *c = OLY_CTX(env);
  Impl *im = impl_of(c);
  const OlyDynInfo *info = find_dynamic(im, name);
  if (!info) rt_fail(c, OLY_ERR_UNKNOWN_FUNCTION);
  if (!im->heap_executable) rt_fail(c, OLY_ERR_EXECUTABLE_HEAP);
  if (im->channel < 0) rt_fail(c, OLY_ERR_CHANNEL);
  size_t len = strlen(name);
  if (send_frame(im->channel, WIRE_LOAD, name, (uint32_t)len) != 0) rt_fail(c, OLY_ERR_CHANNEL);
  unsigned char head[5];
  if (read_all(im->channel, head, sizeof head) != 0) rt_fail(c, OLY_ERR_CHANNEL);
  uint32_t size = get_u32(head + 1);
  if (head[0] != WIRE_STATUS_OK) rt_fail(c, OLY_ERR_UNKNOWN_FUNCTION);
  /* Code gets whole pages to itself: a store to a page holding live
     instructions (the proc's call counter, a vector) makes x86 cores flush
     the pipeline as self-modifying code. */
  size_t page = im->page_bytes;
  size_t record = (sizeof(struct OlyProc) + 15u) & ~(size_t)15u;
  size_t span = (size + page - 1) & ~(page - 1);
  unsigned char *block = (unsigned char *)heap_alloc(c, record + page - 1 + span);
  unsigned char *code = (unsigned char *)(((uintptr_t)(block + record) + page - 1) & ~(uintptr_t)(page - 1));
  if (read_all(im->channel, code, size) != 0) rt_fail(c, OLY_ERR_CHANNEL);
  Proc p = (Proc)block;
  p->entry = (OlyCode)(uintptr_t)code;
  p->env = c->display_top;
  p->def_frame = c->display_top[0];
  p->arg_count = arg_count;
  p->slot_count = info->slot_count;
  p->depth = 1;
  p->live = 1;
  p->active = 0;
  p->block = block;
  p->next = NULL;
  trace_heap(c, "load");
  return p;
}

static void rt_reclaim_proc(OlyContext *c, Proc p) {
  if (p->block) {
    heap_free(c, p->block);
    trace_heap(c, "reclaim");
  }
}

static void rt_delete_proc(Env env, Int level, Int offset) {
  OlyContext *c = OLY_CTX(env);
  Proc *slot = &((Proc *)env[level])[offset];
  Proc p = *slot;
  *slot = NULL;
  if (!p || !p->block) return;
  p->live = 0;
  if (p->active == 0) rt_reclaim_proc(c, p);
}

/* ---- values ----------------------------------------------------------- */

static Vector rt_vector_fill(OlyContext *c, Int len, Int elem, UInt bits) {
  if (len < 0) len = 0;
  Vector v = (Vector)heap_alloc(c, sizeof(struct OlyVector) + (size_t)len * sizeof(UInt));
  v->len = len;
  v->elem = elem;
  v->ctx = c;
  v->reserved = 0;
  for (Int i = 0; i < len; ++i) v->data[i] = bits;
  return v;
}

static Str rt_intern(OlyContext *c, const char *text) {
  Impl *im = impl_of(c);
  for (Interned *s = im->interned; s; s = s->next)
    if (strcmp(s->text, text) == 0) return s->text;
  size_t len = strlen(text);
  Interned *s = (Interned *)heap_alloc(c, sizeof(Interned) + len + 1);
  memcpy(s->text, text, len + 1);
  s->next = im->interned;
  im->interned = s;
  return s->text;
}

/* ---- output ----------------------------------------------------------- */

static void line_append(OlyContext *c, const char *text, size_t len) {
  Impl *im = impl_of(c);
  if (im->line_len + len + 1 > im->line_cap) {
    size_t cap = im->line_cap ? im->line_cap : 128;
    while (cap < im->line_len + len + 1) cap *= 2;
    char *grown = (char *)realloc(im->line, cap);
    if (!grown) rt_fail(c, OLY_ERR_OUT_OF_MEMORY);
    im->line = grown;
    im->line_cap = cap;
  }
  memcpy(im->line + im->line_len, text, len);
  im->line_len += len;
}

/* Shortest round-trip decimal, laid out the way Python's repr(float) does. */
static void format_real(Real x, char *out, size_t cap) {
  if (x != x) {
    snprintf(out, cap, "nan");
    return;
  }
  if (x == 1.0 / 0.0 || x == -1.0 / 0.0) {
    snprintf(out, cap, x < 0 ? "-inf" : "inf");
    return;
  }
  char sci[40];
  int precision = 1;
  for (; precision <= 17; ++precision) {
    snprintf(sci, sizeof sci, "%.*e", precision - 1, x);
    if (strtod(sci, NULL) == x) break;
  }
  /* sci = [-]d[.ddd]e[+-]XX */
  const char *p = sci;
  int negative = 0;
  if (*p == '-') {
    negative = 1;
    ++p;
  }
  char digits[24];
  int ndigits = 0;
  for (; *p && *p != 'e'; ++p)
    if (*p != '.') digits[ndigits++] = *p;
  while (ndigits > 1 && digits[ndigits - 1] == '0') --ndigits;
  int exponent = atoi(p + 1);
  char buf[64];
  size_t n = 0;
  if (negative) buf[n++] = '-';
  if (exponent >= -4 && exponent < 16) {
    if (exponent < 0) {
      buf[n++] = '0';
      buf[n++] = '.';
      for (int i = 0; i < -exponent - 1; ++i) buf[n++] = '0';
      for (int i = 0; i < ndigits; ++i) buf[n++] = digits[i];
    } else {
      for (int i = 0; i <= exponent; ++i) buf[n++] = i < ndigits ? digits[i] : '0';
      buf[n++] = '.';
      if (ndigits > exponent + 1)
        for (int i = exponent + 1; i < ndigits; ++i) buf[n++] = digits[i];
      else
        buf[n++] = '0';
    }
    buf[n] = '\0';
  } else {
    buf[n++] = digits[0];
    if (ndigits > 1) {
      buf[n++] = '.';
      for (int i = 1; i < ndigits; ++i) buf[n++] = digits[i];
    }
    buf[n] = '\0';
    snprintf(buf + n, sizeof buf - n, "e%c%02d", exponent < 0 ? '-' : '+',
             exponent < 0 ? -exponent : exponent);
  }
  snprintf(out, cap, "%s", buf);
}

static void rt_print_int(OlyContext *c, Int v) {
  char buf[32];
  int n = snprintf(buf, sizeof buf, "%lld", (long long)v);
  line_append(c, buf, (size_t)n);
}

static void rt_print_real(OlyContext *c, Real v) {
  char buf[64];
  format_real(v, buf, sizeof buf);
  line_append(c, buf, strlen(buf));
}

static void rt_print_str(OlyContext *c, Str v) { line_append(c, v, strlen(v)); }

static void rt_print_vector(OlyContext *c, Vector v) {
  line_append(c, "[", 1);
  for (Int i = 0; i < v->len; ++i) {
    if (i) line_append(c, ", ", 2);
    if (v->elem == OLY_ELEM_REAL)
      rt_print_real(c, ((Real *)v->data)[i]);
    else
      rt_print_int(c, ((Int *)v->data)[i]);
  }
  line_append(c, "]", 1);
}

static void rt_print_proc(OlyContext *c, Proc v) {
  (void)v;
  line_append(c, "<function>", 10);
}

static void rt_print_sep(OlyContext *c) { line_append(c, " ", 1); }

static void rt_print_end(OlyContext *c) {
  Impl *im = impl_of(c);
  line_append(c, "\n", 1);
  if (im->channel >= 0) {
    if (send_frame(im->channel, WIRE_OUTPUT, im->line, (uint32_t)im->line_len) != 0)
      rt_fail(c, OLY_ERR_CHANNEL);
  } else {
    fwrite(im->line, 1, im->line_len, stdout);
  }
  im->line_len = 0;
}

static void rt_mark(OlyContext *c, Str label) {
  Impl *im = impl_of(c);
  struct timespec ts;
  clock_gettime(CLOCK_MONOTONIC, &ts);
  uint64_t ns = (uint64_t)ts.tv_sec * 1000000000ull + (uint64_t)ts.tv_nsec;
  if (im->channel < 0) {
    fprintf(stderr, "mark %s %llu\n", label, (unsigned long long)ns);
    return;
  }
  size_t len = strlen(label);
  unsigned char *payload = (unsigned char *)malloc(len + 8);
  if (!payload) rt_fail(c, OLY_ERR_OUT_OF_MEMORY);
  memcpy(payload, label, len);
  for (int i = 0; i < 8; ++i) payload[len + (size_t)i] = (unsigned char)((ns >> (8 * i)) & 0xff);
  /* MARK: opcode, u32 label length, label, u64 monotonic nanoseconds */
  unsigned char head[5];
  head[0] = WIRE_MARK;
  put_u32(head + 1, (uint32_t)len);
  if (write_all(im->channel, head, sizeof head) != 0 ||
      write_all(im->channel, payload, len + 8) != 0)
    rt_fail(c, OLY_ERR_CHANNEL);
  free(payload);
}

static const OlyApi oly_api = {
    rt_fail,        rt_mk_proc,       rt_load_proc,  rt_delete_proc, rt_reclaim_proc,
    rt_release_procs, rt_vector_fill, rt_intern,     rt_print_int,   rt_print_real,
    rt_print_str,   rt_print_vector,  rt_print_proc, rt_print_sep,   rt_print_end,
    rt_mark,
};

/* ---- bootstrap -------------------------------------------------------- */

static size_t env_size(const char *name, size_t fallback) {
  const char *v = getenv(name);
  if (!v || !*v) return fallback;
  char *end = NULL;
  unsigned long long n = strtoull(v, &end, 10);
  return (end && *end == '\0' && n > 0) ? (size_t)n : fallback;
}

int oly_main(int argc, char **argv, const OlyProgram *program) {
  (void)argc;
  (void)argv;
  static OlyContext ctx;
  static Impl im;
  if (program->max_levels <= 0) {
    fprintf(stderr, "error: max lexical levels must be positive\n");
    return 2;
  }
  const char *channel = getenv("OLY_CHANNEL_FD");
  im.channel = (channel && *channel) ? atoi(channel) : -1;
  im.trace_heap = getenv("OLY_TRACE_HEAP") != NULL;
  im.dynamic = program->dynamic;
  im.dynamic_count = program->dynamic_count;

  im.frame_bytes = env_size("OLY_FRAME_BYTES", (size_t)1 << 22);
  im.frames = (char *)malloc(im.frame_bytes);
  im.heap_bytes = env_size("OLY_HEAP_BYTES", (size_t)1 << 22) & ~(size_t)15u;
  long page = sysconf(_SC_PAGESIZE);
  im.page_bytes = page > 0 ? (size_t)page : 4096u;
  if (program->dynamic_count > 0) {
    void *mem = mmap(NULL, im.heap_bytes, PROT_READ | PROT_WRITE | PROT_EXEC,
                     MAP_PRIVATE | MAP_ANONYMOUS, -1, 0);
    if (mem != MAP_FAILED) {
      im.heap = (unsigned char *)mem;
      im.heap_executable = 1;
    }
  } else {
    im.heap = (unsigned char *)malloc(im.heap_bytes);
  }
  im.display = (void **)calloc((size_t)program->max_levels, sizeof(void *));
  ctx.impl = &im;
  ctx.api = &oly_api;
  ctx.max_levels = program->max_levels;
  if (!im.frames || !im.heap || !im.display) rt_fail(&ctx, OLY_ERR_OUT_OF_MEMORY);
  if (program->dynamic_count > 0 && !im.heap_executable) rt_fail(&ctx, OLY_ERR_EXECUTABLE_HEAP);

  HeapBlock *first = heap_first(&im);
  first->size = (uint32_t)(im.heap_bytes - HEAP_HEADER);
  first->free = 1;
  first->prev_size = 0;

  ctx.frame_limit = im.frames;
  ctx.display_top = im.display + program->max_levels - 1;
  char *top = im.frames + im.frame_bytes;
  top -= sizeof(OlyFrame) + (size_t)program->global_slots * sizeof(void *);
  OlyFrame *global = (OlyFrame *)top;
  global->ctx = &ctx;
  global->static_link = NULL;
  global->procs = NULL;
  global->prev_cursor = im.frames + im.frame_bytes;
  memset(global + 1, 0, (size_t)program->global_slots * sizeof(void *));
  ctx.frame_cursor = top;
  ctx.display_top[0] = (void *)(global + 1);

  trace_heap(&ctx, "start");
  program->module(ctx.display_top);
  trace_heap(&ctx, "exit");
  fflush(stdout);
  send_exit(&im, 0);
  return 0;
}
