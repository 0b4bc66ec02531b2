# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: AES-256 single-block encrypt/decrypt and the
xorshift128+ step.

Byte-for-byte interchangeable with evabs._pykernels; the test suite holds
both backends to the same vectors and to random cross-agreement. Tables are
derived at import from the GF(2^8) arithmetic rather than pasted in, same
as the pure backend.
"""

from libc.stdint cimport uint8_t, uint32_t, uint64_t
from libc.string cimport memcpy

BACKEND = "compiled"

cdef uint8_t SBOX[256]
cdef uint8_t INV_SBOX[256]
cdef uint8_t MUL2[256]
cdef uint8_t MUL3[256]
cdef uint8_t MUL9[256]
cdef uint8_t MUL11[256]
cdef uint8_t MUL13[256]
cdef uint8_t MUL14[256]
cdef uint32_t RCON[7]


cdef uint8_t _gmul(uint8_t a, uint8_t b):
    # double-and-add in GF(2^8) mod x^8+x^4+x^3+x+1; init-time only
    cdef uint8_t p = 0
    cdef uint8_t hi
    cdef int i
    for i in range(8):
        if b & 1:
            p ^= a
        hi = a & 0x80
        a = <uint8_t> (a << 1)
        if hi:
            a ^= 0x1B
        b >>= 1
    return p


cdef void _init_tables():
    cdef int a, b
    cdef uint8_t inv, rot, acc
    cdef int i
    SBOX[0] = 0x63
    INV_SBOX[0x63] = 0
    for a in range(1, 256):
        inv = 0
        for b in range(1, 256):
            if _gmul(<uint8_t> a, <uint8_t> b) == 1:
                inv = <uint8_t> b
                break
        rot = inv
        acc = inv
        for i in range(4):
            rot = <uint8_t> ((rot << 1) | (rot >> 7))
            acc ^= rot
        acc ^= 0x63
        SBOX[a] = acc
        INV_SBOX[acc] = <uint8_t> a
    for a in range(256):
        MUL2[a] = _gmul(2, <uint8_t> a)
        MUL3[a] = _gmul(3, <uint8_t> a)
        MUL9[a] = _gmul(9, <uint8_t> a)
        MUL11[a] = _gmul(11, <uint8_t> a)
        MUL13[a] = _gmul(13, <uint8_t> a)
        MUL14[a] = _gmul(14, <uint8_t> a)
    RCON[0] = 0x01
    for i in range(1, 7):
        RCON[i] = _gmul(2, <uint8_t> RCON[i - 1])


_init_tables()


cdef uint32_t _sub_word(uint32_t t):
    return ((<uint32_t> SBOX[(t >> 24) & 0xFF]) << 24 |
            (<uint32_t> SBOX[(t >> 16) & 0xFF]) << 16 |
            (<uint32_t> SBOX[(t >> 8) & 0xFF]) << 8 |
            (<uint32_t> SBOX[t & 0xFF]))


cdef void _expand_key(const uint8_t *key, uint8_t *rkb):
    # 60 words; flattened column-major so rkb indexes line up with the state
    cdef uint32_t w[60]
    cdef uint32_t t
    cdef int i, r, c, b
    for i in range(8):
        w[i] = ((<uint32_t> key[4 * i]) << 24 | (<uint32_t> key[4 * i + 1]) << 16 |
                (<uint32_t> key[4 * i + 2]) << 8 | (<uint32_t> key[4 * i + 3]))
    for i in range(8, 60):
        t = w[i - 1]
        if i % 8 == 0:
            t = (t << 8) | (t >> 24)
            t = _sub_word(t) ^ (RCON[i // 8 - 1] << 24)
        elif i % 8 == 4:
            t = _sub_word(t)
        w[i] = w[i - 8] ^ t
    for r in range(15):
        for c in range(4):
            for b in range(4):
                rkb[16 * r + 4 * c + b] = <uint8_t> (w[4 * r + c] >> (24 - 8 * b))


# State layout matches the pure backend: input byte i at row i % 4,
# column i // 4, flattened as s[r + 4c].


cdef void _encrypt_state(const uint8_t *rkb, uint8_t *s):
    cdef uint8_t t[16]
    cdef int rnd, c, i
    cdef uint8_t a0, a1, a2, a3
    for i in range(16):
        s[i] ^= rkb[i]
    for rnd in range(1, 14):
        t[0] = SBOX[s[0]];  t[1] = SBOX[s[5]];  t[2] = SBOX[s[10]];  t[3] = SBOX[s[15]]
        t[4] = SBOX[s[4]];  t[5] = SBOX[s[9]];  t[6] = SBOX[s[14]];  t[7] = SBOX[s[3]]
        t[8] = SBOX[s[8]];  t[9] = SBOX[s[13]]; t[10] = SBOX[s[2]];  t[11] = SBOX[s[7]]
        t[12] = SBOX[s[12]]; t[13] = SBOX[s[1]]; t[14] = SBOX[s[6]]; t[15] = SBOX[s[11]]
        for c in range(0, 16, 4):
            a0 = t[c]; a1 = t[c + 1]; a2 = t[c + 2]; a3 = t[c + 3]
            s[c] = MUL2[a0] ^ MUL3[a1] ^ a2 ^ a3 ^ rkb[16 * rnd + c]
            s[c + 1] = a0 ^ MUL2[a1] ^ MUL3[a2] ^ a3 ^ rkb[16 * rnd + c + 1]
            s[c + 2] = a0 ^ a1 ^ MUL2[a2] ^ MUL3[a3] ^ rkb[16 * rnd + c + 2]
            s[c + 3] = MUL3[a0] ^ a1 ^ a2 ^ MUL2[a3] ^ rkb[16 * rnd + c + 3]
    t[0] = SBOX[s[0]];  t[1] = SBOX[s[5]];  t[2] = SBOX[s[10]];  t[3] = SBOX[s[15]]
    t[4] = SBOX[s[4]];  t[5] = SBOX[s[9]];  t[6] = SBOX[s[14]];  t[7] = SBOX[s[3]]
    t[8] = SBOX[s[8]];  t[9] = SBOX[s[13]]; t[10] = SBOX[s[2]];  t[11] = SBOX[s[7]]
    t[12] = SBOX[s[12]]; t[13] = SBOX[s[1]]; t[14] = SBOX[s[6]]; t[15] = SBOX[s[11]]
    for i in range(16):
        s[i] = t[i] ^ rkb[224 + i]


cdef void _decrypt_state(const uint8_t *rkb, uint8_t *s):
    cdef uint8_t t[16]
    cdef int rnd, c, i
    cdef uint8_t a0, a1, a2, a3
    for i in range(16):
        s[i] ^= rkb[224 + i]
    for rnd in range(13, 0, -1):
        t[0] = INV_SBOX[s[0]];  t[1] = INV_SBOX[s[13]]; t[2] = INV_SBOX[s[10]]; t[3] = INV_SBOX[s[7]]
        t[4] = INV_SBOX[s[4]];  t[5] = INV_SBOX[s[1]];  t[6] = INV_SBOX[s[14]]; t[7] = INV_SBOX[s[11]]
        t[8] = INV_SBOX[s[8]];  t[9] = INV_SBOX[s[5]];  t[10] = INV_SBOX[s[2]]; t[11] = INV_SBOX[s[15]]
        t[12] = INV_SBOX[s[12]]; t[13] = INV_SBOX[s[9]]; t[14] = INV_SBOX[s[6]]; t[15] = INV_SBOX[s[3]]
        for i in range(16):
            t[i] ^= rkb[16 * rnd + i]
        for c in range(0, 16, 4):
            a0 = t[c]; a1 = t[c + 1]; a2 = t[c + 2]; a3 = t[c + 3]
            s[c] = MUL14[a0] ^ MUL11[a1] ^ MUL13[a2] ^ MUL9[a3]
            s[c + 1] = MUL9[a0] ^ MUL14[a1] ^ MUL11[a2] ^ MUL13[a3]
            s[c + 2] = MUL13[a0] ^ MUL9[a1] ^ MUL14[a2] ^ MUL11[a3]
            s[c + 3] = MUL11[a0] ^ MUL13[a1] ^ MUL9[a2] ^ MUL14[a3]
    t[0] = INV_SBOX[s[0]];  t[1] = INV_SBOX[s[13]]; t[2] = INV_SBOX[s[10]]; t[3] = INV_SBOX[s[7]]
    t[4] = INV_SBOX[s[4]];  t[5] = INV_SBOX[s[1]];  t[6] = INV_SBOX[s[14]]; t[7] = INV_SBOX[s[11]]
    t[8] = INV_SBOX[s[8]];  t[9] = INV_SBOX[s[5]];  t[10] = INV_SBOX[s[2]]; t[11] = INV_SBOX[s[15]]
    t[12] = INV_SBOX[s[12]]; t[13] = INV_SBOX[s[9]]; t[14] = INV_SBOX[s[6]]; t[15] = INV_SBOX[s[3]]
    for i in range(16):
        s[i] = t[i] ^ rkb[i]


def aes256_encrypt_block(key, block):
    """One-block AES-256 encryption. key: 32 bytes, block: 16 bytes."""
    cdef bytes kb = bytes(key)
    cdef bytes pb = bytes(block)
    if len(kb) != 32:
        raise ValueError("aes256: key must be 32 bytes")
    if len(pb) != 16:
        raise ValueError("aes256: block must be 16 bytes")
    cdef uint8_t rkb[240]
    cdef uint8_t s[16]
    _expand_key(<const uint8_t *> kb, rkb)
    memcpy(s, <const uint8_t *> pb, 16)
    _encrypt_state(rkb, s)
    return (<char *> s)[:16]


def aes256_decrypt_block(key, block):
    """One-block AES-256 decryption. key: 32 bytes, block: 16 bytes."""
    cdef bytes kb = bytes(key)
    cdef bytes cb = bytes(block)
    if len(kb) != 32:
        raise ValueError("aes256: key must be 32 bytes")
    if len(cb) != 16:
        raise ValueError("aes256: block must be 16 bytes")
    cdef uint8_t rkb[240]
    cdef uint8_t s[16]
    _expand_key(<const uint8_t *> kb, rkb)
    memcpy(s, <const uint8_t *> cb, 16)
    _decrypt_state(rkb, s)
    return (<char *> s)[:16]


def xorshift128p_next(s0, s1):
    """One xorshift128+ step: (s0, s1) -> (output, s0', s1').

    Shift triple (23, 17, 26); the output is the 64-bit sum of the two
    state words before the shuffle.
    """
    cdef uint64_t x = <uint64_t> s0
    cdef uint64_t y = <uint64_t> s1
    cdef uint64_t result = x + y
    x ^= x << 23
    cdef uint64_t ns1 = x ^ y ^ (x >> 17) ^ (y >> 26)
    return result, y, ns1
