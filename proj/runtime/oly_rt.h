/*
 * oly_rt.h - abstract machine interface for microdyn generated kernels.
 *
 * Generated C code addresses every variable by (scope level, offset)
 * through a display `env`: env[0] is the frame of the executing scope,
 * env[k] the frame k lexical levels further out. Frames live in a frame
 * arena that grows downwards; each frame carries an OlyFrame header
 * immediately below slot 0 and, below that, the display cells it saved.
 *
 * Everything the generated code calls at runtime goes through the
 * OlyApi table reachable from the frame header, so code extracted from a
 * dynamic unit needs no link-time resolution of any kind.
 */
#ifndef OLY_RT_H
#define OLY_RT_H

#include <stddef.h>
#include <stdint.h>

#if defined(__GNUC__)
#define OLY_INLINE static inline __attribute__((always_inline))
#define OLY_UNLIKELY(x) __builtin_expect(!!(x), 0)
#else
#define OLY_INLINE static inline
#define OLY_UNLIKELY(x) (x)
#endif

typedef int64_t Int;
typedef uint64_t UInt;
typedef double Real;
typedef void *Object;
typedef void **Env;
typedef const char *Str;

typedef struct OlyComplex {
  Real re;
  Real im;
} *Complex;

struct OlyContext;

typedef struct OlyVector {
  Int len;
  Int elem; /* OLY_ELEM_INT or OLY_ELEM_REAL */
  struct OlyContext *ctx;
  Int reserved;
  UInt data[];
} *Vector;

enum { OLY_ELEM_INT = 1, OLY_ELEM_REAL = 2 };

/* Generic code pointer; call sites cast to the callee's real signature. */
typedef void (*OlyCode)(void);

typedef struct OlyProc {
  OlyCode entry;
  Env env;         /* display position of the declaring scope */
  void *def_frame; /* static link handed to each invocation */
  Int arg_count;
  Int slot_count;
  Int depth; /* absolute lexical depth of the callee */
  Int live;
  Int active; /* invocations currently executing */
  void *block; /* heap block holding the code, NULL when resident */
  struct OlyProc *next;
} *Proc;

typedef struct OlyFrame {
  struct OlyContext *ctx;
  void *static_link;
  struct OlyProc *procs; /* procs created in this frame */
  char *prev_cursor;
} OlyFrame;

typedef union OlySlot {
  Int i;
  Real r;
  void *p;
} OlySlot;

enum {
  OLY_ERR_UNLOADED_PROC = 1,
  OLY_ERR_FRAME_OVERFLOW = 2,
  OLY_ERR_OUT_OF_MEMORY = 3,
  OLY_ERR_INDEX = 4,
  OLY_ERR_ZERO_DIVISION = 5,
  OLY_ERR_UNKNOWN_FUNCTION = 6,
  OLY_ERR_CHANNEL = 7,
  OLY_ERR_VALUE = 8,
  OLY_ERR_EXECUTABLE_HEAP = 9
};

typedef struct OlyApi {
  void (*fail)(struct OlyContext *ctx, Int code);
  Proc (*mk_proc)(Env env, OlyCode entry, Int arg_count, Int slot_count);
  Proc (*load_proc)(Env env, Str name, Int arg_count);
  void (*delete_proc)(Env env, Int level, Int offset);
  void (*reclaim_proc)(struct OlyContext *ctx, Proc proc);
  void (*release_procs)(struct OlyContext *ctx, Proc list);
  Vector (*vector_fill)(struct OlyContext *ctx, Int len, Int elem, UInt bits);
  Str (*intern)(struct OlyContext *ctx, const char *text);
  void (*print_int)(struct OlyContext *ctx, Int v);
  void (*print_real)(struct OlyContext *ctx, Real v);
  void (*print_str)(struct OlyContext *ctx, Str v);
  void (*print_vector)(struct OlyContext *ctx, Vector v);
  void (*print_proc)(struct OlyContext *ctx, Proc v);
  void (*print_sep)(struct OlyContext *ctx);
  void (*print_end)(struct OlyContext *ctx);
  void (*mark)(struct OlyContext *ctx, Str label);
} OlyApi;

typedef struct OlyContext {
  char *frame_cursor;
  char *frame_limit;
  void **display_top; /* display position of the global scope */
  const OlyApi *api;
  Int max_levels;
  void *impl;
} OlyContext;

/* One entry per dynamically loadable function, emitted by the compiler. */
typedef struct OlyDynInfo {
  const char *name;
  Int arg_count;
  Int slot_count;
} OlyDynInfo;

typedef struct OlyProgram {
  Int max_levels;
  Int global_slots;
  void (*module)(Env env);
  const OlyDynInfo *dynamic;
  Int dynamic_count;
} OlyProgram;

int oly_main(int argc, char **argv, const OlyProgram *program);

#define OLY_FRAME(base) (((OlyFrame *)(base)) - 1)
#define OLY_CTX(env) (OLY_FRAME((env)[0])->ctx)
#define OLY_API(env) (OLY_CTX(env)->api)

/* Typed slot accessors: direct indexed addressing from the frame base. */
#define lookup_int(env, lex_level, offset) (((Int *)((env)[(lex_level)]))[(offset)])
#define update_int(env, lex_level, offset, value) \
  (((Int *)((env)[(lex_level)]))[(offset)] = (Int)((value)))
#define lookup_real(env, lex_level, offset) (((Real *)((env)[(lex_level)]))[(offset)])
#define update_real(env, lex_level, offset, value) \
  (((Real *)((env)[(lex_level)]))[(offset)] = (Real)((value)))
#define lookup_complex(env, lex_level, offset) (((Complex *)((env)[(lex_level)]))[(offset)])
#define update_complex(env, lex_level, offset, value) \
  (((Complex *)((env)[(lex_level)]))[(offset)] = (Complex)((value)))
#define lookup_vector(env, lex_level, offset) (((Vector *)((env)[(lex_level)]))[(offset)])
#define update_vector(env, lex_level, offset, value) \
  (((Vector *)((env)[(lex_level)]))[(offset)] = (Vector)((value)))
#define lookup_str(env, lex_level, offset) (((Str *)((env)[(lex_level)]))[(offset)])
#define update_str(env, lex_level, offset, value) \
  (((Str *)((env)[(lex_level)]))[(offset)] = (Str)((value)))
#define lookup_object(env, lex_level, offset) (((Object *)((env)[(lex_level)]))[(offset)])
#define update_object(env, lex_level, offset, value) \
  (((Object *)((env)[(lex_level)]))[(offset)] = (Object)((value)))
#define lookup_proc(env, lex_level, offset) (((Proc *)((env)[(lex_level)]))[(offset)])
#define oly_update_proc4(env, lex_level, offset, value) \
  (((Proc *)((env)[(lex_level)]))[(offset)] = (Proc)((value)))
#define oly_update_proc3(env, offset, value) oly_update_proc4(env, 0, offset, value)
#define OLY_PICK4(a, b, c, d, name, ...) name
/* update_proc(env, offset, proc) targets the local frame;
   update_proc(env, level, offset, proc) any frame on the static chain. */
#define update_proc(...) \
  OLY_PICK4(__VA_ARGS__, oly_update_proc4, oly_update_proc3, oly_update_proc_arity)(__VA_ARGS__)

#define update_complex_real(c, value) ((c)->re = (Real)((value)))
#define update_complex_imag(c, value) ((c)->im = (Real)((value)))
#define complex_real(c) ((c)->re)
#define complex_imag(c) ((c)->im)

OLY_INLINE void oly_vector_fail(Vector v) { v->ctx->api->fail(v->ctx, OLY_ERR_INDEX); }

/* Python indexing: negative indices count from the end. */
OLY_INLINE Int oly_vector_index(Vector v, Int i) {
  if (OLY_UNLIKELY((UInt)i >= (UInt)v->len)) {
    if (i < 0) i += v->len;
    if ((UInt)i >= (UInt)v->len) oly_vector_fail(v);
  }
  return i;
}
OLY_INLINE Int vector_lookup_int(Vector v, Int i) { return ((Int *)v->data)[oly_vector_index(v, i)]; }
OLY_INLINE Int vector_update_int(Vector v, Int i, Int value) {
  return ((Int *)v->data)[oly_vector_index(v, i)] = value;
}
OLY_INLINE Real vector_lookup_real(Vector v, Int i) { return ((Real *)v->data)[oly_vector_index(v, i)]; }
OLY_INLINE Real vector_update_real(Vector v, Int i, Real value) {
  return ((Real *)v->data)[oly_vector_index(v, i)] = value;
}
OLY_INLINE Int oly_len(Vector v) { return v->len; }

/* Procedures. */
#define declare_proc(env, offset, name, proc) \
  ((void)sizeof(name), ((Proc *)((env)[0]))[(offset)] = (proc))
#define mk_proc(entry, env, arg_count) \
  (OLY_API(env)->mk_proc((env), (OlyCode)(entry), (arg_count), entry##_slots))
#ifdef OLY_DYNAMIC_UNIT
/* A dynamic unit has no data sections, so a name literal is rebuilt on the
   stack from immediates: at most 63 bytes, packed eight per word. */
#define OLY_NAME_BYTE(s, i) ((UInt)(unsigned char)((i) < sizeof(s) ? (s)[(i) < sizeof(s) ? (i) : 0] : 0))
#define OLY_NAME_WORD(s, w)                                                          \
  oly_word(OLY_NAME_BYTE(s, 8 * (w)) | OLY_NAME_BYTE(s, 8 * (w) + 1) << 8 |          \
           OLY_NAME_BYTE(s, 8 * (w) + 2) << 16 | OLY_NAME_BYTE(s, 8 * (w) + 3) << 24 | \
           OLY_NAME_BYTE(s, 8 * (w) + 4) << 32 | OLY_NAME_BYTE(s, 8 * (w) + 5) << 40 | \
           OLY_NAME_BYTE(s, 8 * (w) + 6) << 48 | OLY_NAME_BYTE(s, 8 * (w) + 7) << 56)
#define OLY_NAME(s)                                                                   \
  ((const char *)(const UInt[8]){OLY_NAME_WORD(s, 0), OLY_NAME_WORD(s, 1), OLY_NAME_WORD(s, 2), \
                                 OLY_NAME_WORD(s, 3), OLY_NAME_WORD(s, 4), OLY_NAME_WORD(s, 5), \
                                 OLY_NAME_WORD(s, 6), OLY_NAME_WORD(s, 7)})
#define load_proc(name, env, arg_count) (OLY_API(env)->load_proc((env), OLY_NAME(name), (arg_count)))
#else
#define load_proc(name, env, arg_count) (OLY_API(env)->load_proc((env), (name), (arg_count)))
#endif
#define delete_proc(env, lex_level, offset) (OLY_API(env)->delete_proc((env), (lex_level), (offset)))

/* Dynamic dispatch: push a frame in the arena, rebuild the callee's static
   chain from the proc, save the display cells that get overwritten. */
OLY_INLINE void **oly_call_begin(Env env, Proc p, Env *callee_env) {
  OlyContext *c = OLY_CTX(env);
  if (OLY_UNLIKELY(p == 0 || !p->live)) c->api->fail(c, OLY_ERR_UNLOADED_PROC);
  Int depth = p->depth;
  char *old = c->frame_cursor;
  char *top = old - (Int)(sizeof(void *) * (size_t)(depth + p->slot_count) + sizeof(OlyFrame));
  if (OLY_UNLIKELY(top < c->frame_limit)) c->api->fail(c, OLY_ERR_FRAME_OVERFLOW);
  void **saved = (void **)top;
  OlyFrame *h = (OlyFrame *)(saved + depth);
  void **base = (void **)(h + 1);
  h->ctx = c;
  h->static_link = p->def_frame;
  h->procs = 0;
  h->prev_cursor = old;
  for (Int k = p->arg_count; k < p->slot_count; ++k) base[k] = 0;
  Env ce = p->env - 1;
  saved[0] = ce[0];
  ce[0] = base;
  void *link = p->def_frame;
  for (Int k = 1; k < depth; ++k) {
    saved[k] = ce[k];
    ce[k] = link;
    link = OLY_FRAME(link)->static_link;
  }
  c->frame_cursor = top;
  p->active++;
  *callee_env = ce;
  return base;
}

OLY_INLINE void oly_call_end(Env ce, Proc p, void **base) {
  OlyFrame *h = OLY_FRAME(base);
  OlyContext *c = h->ctx;
  void **saved = ((void **)h) - p->depth;
  for (Int k = 0; k < p->depth; ++k) ce[k] = saved[k];
  if (h->procs) c->api->release_procs(c, h->procs);
  c->frame_cursor = h->prev_cursor;
  if (--p->active == 0 && !p->live) c->api->reclaim_proc(c, p);
}

/* Static dispatch needs no arena frame: the callee only touches its own
   arguments and the global frame, so a private display on the C stack
   is enough and lets the C compiler see through the whole call. */
#define OLY_STATIC_FRAME(nslots) \
  struct {                       \
    OlyFrame h;                  \
    OlySlot s[(nslots) + 1];     \
  }
#define OLY_STATIC_SETUP(frame, disp, env, depth)    \
  do {                                               \
    OlyContext *oly_c_ = OLY_CTX(env);               \
    (frame).h.ctx = oly_c_;                          \
    (frame).h.static_link = 0;                       \
    (frame).h.procs = 0;                             \
    (frame).h.prev_cursor = 0;                       \
    (disp)[0] = (void *)(frame).s;                   \
    (disp)[(depth)] = oly_c_->display_top[0];        \
  } while (0)

/* Arithmetic with Python semantics where C differs. */
OLY_INLINE void oly_zero_division(Env env) {
  OlyContext *c = OLY_CTX(env);
  c->api->fail(c, OLY_ERR_ZERO_DIVISION);
}
OLY_INLINE Real oly_truediv(Env env, Real a, Real b) {
  if (OLY_UNLIKELY(b == 0)) oly_zero_division(env);
  return a / b;
}
OLY_INLINE Int oly_floordiv(Env env, Int a, Int b) {
  if (OLY_UNLIKELY(b == 0)) oly_zero_division(env);
  if (b == -1) return (Int)(0 - (UInt)a);
  Int q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) q -= 1;
  return q;
}
OLY_INLINE Int oly_mod(Env env, Int a, Int b) {
  if (OLY_UNLIKELY(b == 0)) oly_zero_division(env);
  if (b == -1) return 0;
  Int r = a % b;
  if (r != 0 && ((r < 0) != (b < 0))) r += b;
  return r;
}
OLY_INLINE void oly_range_check(Env env, Int step) {
  if (OLY_UNLIKELY(step == 0)) {
    OlyContext *c = OLY_CTX(env);
    c->api->fail(c, OLY_ERR_VALUE);
  }
}

/* Constants for dynamic units, kept out of read-only data sections so the
   extracted code is self-contained. */
OLY_INLINE UInt oly_word(UInt bits) {
#if defined(__GNUC__)
  __asm__("" : "+r"(bits));
#endif
  return bits;
}
OLY_INLINE Real oly_real_bits(UInt bits) {
  union {
    UInt u;
    Real r;
  } v;
  v.u = oly_word(bits);
  return v.r;
}
OLY_INLINE Real oly_neg_real(Real x) {
  union {
    UInt u;
    Real r;
  } v;
  v.r = x;
  v.u ^= oly_word((UInt)1 << 63);
  return v.r;
}

/* Vectors and strings. */
OLY_INLINE Vector oly_vector_fill_int(Env env, Int len, Int value) {
  OlyContext *c = OLY_CTX(env);
  return c->api->vector_fill(c, len, OLY_ELEM_INT, (UInt)value);
}
OLY_INLINE Vector oly_vector_fill_real(Env env, Int len, Real value) {
  union {
    UInt u;
    Real r;
  } v;
  OlyContext *c = OLY_CTX(env);
  v.r = value;
  return c->api->vector_fill(c, len, OLY_ELEM_REAL, v.u);
}
OLY_INLINE Str oly_intern(Env env, const UInt *words) {
  OlyContext *c = OLY_CTX(env);
  return c->api->intern(c, (const char *)words);
}

/* Output. print(a, b) becomes one print_* call per value, separators, end. */
#define oly_print_int(env, v) (OLY_API(env)->print_int(OLY_CTX(env), (v)))
#define oly_print_real(env, v) (OLY_API(env)->print_real(OLY_CTX(env), (v)))
#define oly_print_str(env, v) (OLY_API(env)->print_str(OLY_CTX(env), (v)))
#define oly_print_vector(env, v) (OLY_API(env)->print_vector(OLY_CTX(env), (v)))
#define oly_print_proc(env, v) (OLY_API(env)->print_proc(OLY_CTX(env), (v)))
#define oly_print_sep(env) (OLY_API(env)->print_sep(OLY_CTX(env)))
#define oly_print_end(env) (OLY_API(env)->print_end(OLY_CTX(env)))
#define oly_mark(env, label) (OLY_API(env)->mark(OLY_CTX(env), (label)))

#endif /* OLY_RT_H */
