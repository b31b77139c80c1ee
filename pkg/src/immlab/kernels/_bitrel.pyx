# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled bitset kernels; same contract as immlab.kernels.pure."""

from libc.stdlib cimport calloc, free
from libc.stdint cimport uint64_t

NAME = "cython"

DEF WORD = 64


cdef uint64_t* _to_words(list rows, Py_ssize_t n, Py_ssize_t nw) except NULL:
    cdef uint64_t* buf = <uint64_t*> calloc(n * nw if n * nw else 1, sizeof(uint64_t))
    if buf == NULL:
        raise MemoryError()
    cdef Py_ssize_t i, w
    cdef object r
    for i in range(n):
        r = rows[i]
        w = 0
        while r:
            buf[i * nw + w] = <uint64_t> (r & 0xFFFFFFFFFFFFFFFF)
            r >>= WORD
            w += 1
    return buf


cdef list _to_rows(uint64_t* buf, Py_ssize_t n, Py_ssize_t nw):
    cdef list out = [0] * n
    cdef Py_ssize_t i, w
    cdef object r
    for i in range(n):
        r = 0
        for w in range(nw - 1, -1, -1):
            r = (r << WORD) | buf[i * nw + w]
        out[i] = r
    return out


cdef void _closure_inplace(uint64_t* m, Py_ssize_t n, Py_ssize_t nw) noexcept:
    cdef Py_ssize_t k, i, w, kw
    cdef uint64_t kbit
    for k in range(n):
        kw = k / WORD
        kbit = (<uint64_t> 1) << (k % WORD)
        for i in range(n):
            if m[i * nw + kw] & kbit:
                for w in range(nw):
                    m[i * nw + w] |= m[k * nw + w]


def transitive_closure(list rows, Py_ssize_t n):
    if n == 0:
        return []
    cdef Py_ssize_t nw = (n + WORD - 1) / WORD
    cdef uint64_t* buf = _to_words(rows, n, nw)
    try:
        _closure_inplace(buf, n, nw)
        return _to_rows(buf, n, nw)
    finally:
        free(buf)


def compose(list a_rows, list b_rows, Py_ssize_t n):
    if n == 0:
        return []
    cdef Py_ssize_t nw = (n + WORD - 1) / WORD
    cdef uint64_t* a = _to_words(a_rows, n, nw)
    cdef uint64_t* b = NULL
    cdef uint64_t* c = NULL
    cdef Py_ssize_t i, j, w, jw
    cdef uint64_t word
    try:
        b = _to_words(b_rows, n, nw)
        c = <uint64_t*> calloc(n * nw, sizeof(uint64_t))
        if c == NULL:
            raise MemoryError()
        for i in range(n):
            for jw in range(nw):
                word = a[i * nw + jw]
                while word:
                    j = jw * WORD + _ctz(word)
                    word &= word - 1
                    for w in range(nw):
                        c[i * nw + w] |= b[j * nw + w]
        return _to_rows(c, n, nw)
    finally:
        free(a)
        if b != NULL:
            free(b)
        if c != NULL:
            free(c)


cdef inline int _ctz(uint64_t x) noexcept:
    cdef int c = 0
    while not (x & 1):
        x >>= 1
        c += 1
    return c


def has_cycle(list rows, Py_ssize_t n):
    if n == 0:
        return False
    cdef Py_ssize_t nw = (n + WORD - 1) / WORD
    cdef uint64_t* buf = _to_words(rows, n, nw)
    cdef Py_ssize_t i
    try:
        _closure_inplace(buf, n, nw)
        for i in range(n):
            if buf[i * nw + i / WORD] & ((<uint64_t> 1) << (i % WORD)):
                return True
        return False
    finally:
        free(buf)
