"""Hot numeric kernels with a numba fast path and a pure-numpy fallback.

Three loop-heavy pieces live here: the fused activation-derivative maps
used by the jet propagation, the radix-2 FFT butterfly, and Sobol integer
generation.  Matrix products are deliberately NOT reimplemented; those go
through BLAS everywhere.  The sigmoid inside both activations is computed
as tanh through numpy's SIMD loop on either path (measurably faster here
than scalar libm calls); what numba buys is fusing the surrounding
algebra into one memory pass.

Path selection: numba is used when importable unless ``PIDENN_NO_NUMBA=1``
is set.  Both implementations of every kernel stay importable (see
``IMPLS``) so ``benchmarks/bench_kernels.py`` can time them side by side.
All math is float64/complex128.
"""

import math
import os

import numpy as np

_DISABLED = os.environ.get("PIDENN_NO_NUMBA", "").strip().lower() in ("1", "true", "yes")

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):  # pragma: no cover - trivial shim
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def _sigmoid_parts(z):
    """(flat z, flat sigmoid(z)) with the tanh done by numpy SIMD."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    flat = z.ravel()
    s = np.tanh(0.5 * flat)
    s += 1.0
    s *= 0.5
    return z, flat, s


def _softplus_value(flat):
    # overflow-safe: ln(1 + e^z) = max(z, 0) + ln(1 + e^{-|z|})
    out = np.exp(-np.abs(flat))
    np.log1p(out, out=out)
    out += np.maximum(flat, 0.0)
    return out


# ---------------------------------------------------------------------------
# fused post-sigmoid algebra, numba path (one pass over memory)
# ---------------------------------------------------------------------------

def _silu_post_g(z, s, g):
    for i in range(z.shape[0]):
        g[i] = z[i] * s[i]


def _silu_post_g_gp(z, s, g, gp):
    for i in range(z.shape[0]):
        si = s[i]
        g[i] = z[i] * si
        gp[i] = si + z[i] * si * (1.0 - si)


def _silu_post_g_gp_gpp(z, s, g, gp, gpp):
    for i in range(z.shape[0]):
        si = s[i]
        s1 = si * (1.0 - si)
        g[i] = z[i] * si
        gp[i] = si + z[i] * s1
        gpp[i] = s1 * (2.0 + z[i] * (1.0 - 2.0 * si))


def _silu_post_gp_gpp_gppp(z, s, gp, gpp, gppp):
    for i in range(z.shape[0]):
        si = s[i]
        s1 = si * (1.0 - si)
        gp[i] = si + z[i] * s1
        gpp[i] = s1 * (2.0 + z[i] * (1.0 - 2.0 * si))
        gppp[i] = s1 * (3.0 * (1.0 - 2.0 * si) + z[i] * (1.0 - 6.0 * s1))


def _softplus_post_gp(z, s, gp):
    for i in range(z.shape[0]):
        gp[i] = s[i]


def _softplus_post_gp_gpp(z, s, gp, gpp):
    for i in range(z.shape[0]):
        si = s[i]
        gp[i] = si
        gpp[i] = si * (1.0 - si)


def _softplus_post_gp_gpp_gppp(z, s, gp, gpp, gppp):
    for i in range(z.shape[0]):
        si = s[i]
        s1 = si * (1.0 - si)
        gp[i] = si
        gpp[i] = s1
        gppp[i] = s1 * (1.0 - 2.0 * si)


# ---------------------------------------------------------------------------
# the same algebra, pure numpy
# ---------------------------------------------------------------------------

def _np_silu_post_g(z, s, g):
    np.multiply(z, s, out=g)


def _np_silu_post_g_gp(z, s, g, gp):
    np.multiply(z, s, out=g)
    gp[:] = s + g * (1.0 - s)


def _np_silu_post_g_gp_gpp(z, s, g, gp, gpp):
    s1 = s * (1.0 - s)
    np.multiply(z, s, out=g)
    gp[:] = s + z * s1
    gpp[:] = s1 * (2.0 + z * (1.0 - 2.0 * s))


def _np_silu_post_gp_gpp_gppp(z, s, gp, gpp, gppp):
    s1 = s * (1.0 - s)
    gp[:] = s + z * s1
    gpp[:] = s1 * (2.0 + z * (1.0 - 2.0 * s))
    gppp[:] = s1 * (3.0 * (1.0 - 2.0 * s) + z * (1.0 - 6.0 * s1))


def _np_softplus_post_gp(z, s, gp):
    gp[:] = s


def _np_softplus_post_gp_gpp(z, s, gp, gpp):
    gp[:] = s
    gpp[:] = s * (1.0 - s)


def _np_softplus_post_gp_gpp_gppp(z, s, gp, gpp, gppp):
    s1 = s * (1.0 - s)
    gp[:] = s
    gpp[:] = s1
    gppp[:] = s1 * (1.0 - 2.0 * s)


def _activation_family(post, n_out, softplus_value=False):
    """Assemble an activation map from a fused post-sigmoid core."""

    def fn(z):
        z, flat, s = _sigmoid_parts(z)
        outs = [np.empty_like(flat) for _ in range(n_out)]
        if softplus_value:
            outs[0] = _softplus_value(flat)
            post(flat, s, *outs[1:])
        else:
            post(flat, s, *outs)
        outs = tuple(o.reshape(z.shape) for o in outs)
        return outs[0] if n_out == 1 else outs

    return fn


def _softplus_g_only(z):
    z = np.ascontiguousarray(z, dtype=np.float64)
    return _softplus_value(z.ravel()).reshape(z.shape)


# ---------------------------------------------------------------------------
# radix-2 FFT (iterative, in-place butterflies after bit reversal)
# ---------------------------------------------------------------------------

def _fft_core(a):
    n = a.shape[0]
    j = 0
    for i in range(1, n):
        bit = n >> 1
        while j & bit:
            j ^= bit
            bit >>= 1
        j |= bit
        if i < j:
            t = a[i]
            a[i] = a[j]
            a[j] = t
    size = 2
    while size <= n:
        half = size >> 1
        step = -2.0 * math.pi / size
        tw = np.empty(half, np.complex128)
        for k in range(half):
            ang = step * k
            tw[k] = complex(math.cos(ang), math.sin(ang))
        for start in range(0, n, size):
            for k in range(half):
                u = a[start + k]
                v = a[start + k + half] * tw[k]
                a[start + k] = u + v
                a[start + k + half] = u - v
        size <<= 1


def _np_fft(x):
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    levels = n.bit_length() - 1
    rev = np.zeros(n, dtype=np.int64)
    work = np.arange(n)
    for _ in range(levels):
        rev = (rev << 1) | (work & 1)
        work >>= 1
    a = x[rev]
    size = 2
    while size <= n:
        half = size >> 1
        tw = np.exp(-2j * np.pi * np.arange(half) / size)
        a = a.reshape(-1, size)
        u = a[:, :half]
        v = a[:, half:] * tw
        a = np.concatenate((u + v, u - v), axis=1).reshape(-1)
        size <<= 1
    return a


def _nb_fft_wrapper(core):
    def fn(x):
        a = np.array(x, dtype=np.complex128)
        core(a)
        return a

    return fn


# ---------------------------------------------------------------------------
# Sobol integer generation (Gray-code order).  ``v`` holds the direction
# integers, column k for bit k (column 0 unused); points are
# out[i] = x(skip + i) with x(m) = XOR of v[:, k] over set bits of
# gray(m) = m ^ (m >> 1).
# ---------------------------------------------------------------------------

def _sobol_core(v, skip, n, out):
    dim = v.shape[0]
    x = np.zeros(dim, np.uint64)
    g = skip ^ (skip >> 1)
    k = 1
    while g != 0:
        if g & 1:
            for d in range(dim):
                x[d] ^= v[d, k]
        g >>= 1
        k += 1
    for i in range(n):
        for d in range(dim):
            out[i, d] = x[d]
        m = skip + i
        c = 1
        while m & 1:
            m >>= 1
            c += 1
        for d in range(dim):
            x[d] ^= v[d, c]


def _np_sobol_ints(v, skip, n):
    idx = np.arange(skip, skip + n, dtype=np.uint64)
    gray = idx ^ (idx >> np.uint64(1))
    out = np.zeros((n, v.shape[0]), dtype=np.uint64)
    nbits = int(gray.max()).bit_length() if n else 0
    for k in range(nbits):
        bit = (gray >> np.uint64(k)) & np.uint64(1)
        out ^= bit[:, None] * v[None, :, k + 1]
    return out


def _nb_sobol_wrapper(core):
    def fn(v, skip, n):
        out = np.empty((n, v.shape[0]), dtype=np.uint64)
        core(v, skip, n, out)
        return out

    return fn


def _build_impl(jit):
    c = jit if jit is not None else (lambda f: f)
    post = {
        "silu_g": (c(_silu_post_g) if jit else _np_silu_post_g, 1, False),
        "silu_g_gp": (c(_silu_post_g_gp) if jit else _np_silu_post_g_gp, 2, False),
        "silu_g_gp_gpp": (c(_silu_post_g_gp_gpp) if jit else _np_silu_post_g_gp_gpp, 3, False),
        "silu_gp_gpp_gppp": (
            c(_silu_post_gp_gpp_gppp) if jit else _np_silu_post_gp_gpp_gppp, 3, False),
        "softplus_g_gp": (c(_softplus_post_gp) if jit else _np_softplus_post_gp, 2, True),
        "softplus_g_gp_gpp": (
            c(_softplus_post_gp_gpp) if jit else _np_softplus_post_gp_gpp, 3, True),
        "softplus_gp_gpp_gppp": (
            c(_softplus_post_gp_gpp_gppp) if jit else _np_softplus_post_gp_gpp_gppp, 3, False),
    }
    impl = {name: _activation_family(fn, n, sp) for name, (fn, n, sp) in post.items()}
    impl["softplus_g"] = _softplus_g_only
    if jit is not None:
        impl["fft"] = _nb_fft_wrapper(jit(_fft_core))
        impl["sobol_ints"] = _nb_sobol_wrapper(jit(_sobol_core))
    else:
        impl["fft"] = _np_fft
        impl["sobol_ints"] = _np_sobol_ints
    return impl


IMPLS = {"numpy": _build_impl(None)}
if HAVE_NUMBA:
    IMPLS["numba"] = _build_impl(njit(cache=True))

ACTIVE = "numba" if HAVE_NUMBA else "numpy"

silu_g = IMPLS[ACTIVE]["silu_g"]
silu_g_gp = IMPLS[ACTIVE]["silu_g_gp"]
silu_g_gp_gpp = IMPLS[ACTIVE]["silu_g_gp_gpp"]
silu_gp_gpp_gppp = IMPLS[ACTIVE]["silu_gp_gpp_gppp"]
softplus_g = IMPLS[ACTIVE]["softplus_g"]
softplus_g_gp = IMPLS[ACTIVE]["softplus_g_gp"]
softplus_g_gp_gpp = IMPLS[ACTIVE]["softplus_g_gp_gpp"]
softplus_gp_gpp_gppp = IMPLS[ACTIVE]["softplus_gp_gpp_gppp"]
fft = IMPLS[ACTIVE]["fft"]
sobol_ints = IMPLS[ACTIVE]["sobol_ints"]
