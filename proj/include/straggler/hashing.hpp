#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include "straggler/errors.hpp"

namespace straggler {

// ---------------------------------------------------------------------------
// SHA-1 (FIPS 180-1). Used by the replication hash mode, which pins the exact
// historical configuration (digest reduced mod 101 / mod 10211); the unit
// tests carry the standard published vectors.
// ---------------------------------------------------------------------------

class Sha1 {
public:
    using Digest = std::array<uint8_t, 20>;

    Sha1() { reset(); }

    void reset() {
        h_ = {0x67452301u, 0xEFCDAB89u, 0x98BADCFEu, 0x10325476u, 0xC3D2E1F0u};
        len_ = 0;
        buf_fill_ = 0;
    }

    void update(std::span<const uint8_t> data) {
        len_ += data.size();
        for (uint8_t byte : data) {
            buf_[buf_fill_++] = byte;
            if (buf_fill_ == 64) {
                process_block();
                buf_fill_ = 0;
            }
        }
    }

    Digest finish() {
        const uint64_t bit_len = len_ * 8;
        const uint8_t pad = 0x80;
        update({&pad, 1});
        const uint8_t zero = 0;
        while (buf_fill_ != 56) update({&zero, 1});
        uint8_t len_bytes[8];
        for (int i = 0; i < 8; ++i) len_bytes[i] = static_cast<uint8_t>(bit_len >> (56 - 8 * i));
        update({len_bytes, 8});
        Digest out;
        for (int i = 0; i < 5; ++i)
            for (int j = 0; j < 4; ++j)
                out[4 * i + j] = static_cast<uint8_t>(h_[i] >> (24 - 8 * j));
        reset();
        return out;
    }

    static Digest hash(std::span<const uint8_t> data) {
        Sha1 s;
        s.update(data);
        return s.finish();
    }

private:
    static uint32_t rotl(uint32_t v, int r) { return (v << r) | (v >> (32 - r)); }

    void process_block() {
        uint32_t w[80];
        for (int i = 0; i < 16; ++i)
            w[i] = (uint32_t{buf_[4 * i]} << 24) | (uint32_t{buf_[4 * i + 1]} << 16) |
                   (uint32_t{buf_[4 * i + 2]} << 8) | uint32_t{buf_[4 * i + 3]};
        for (int i = 16; i < 80; ++i) w[i] = rotl(w[i - 3] ^ w[i - 8] ^ w[i - 14] ^ w[i - 16], 1);

        uint32_t a = h_[0], b = h_[1], c = h_[2], d = h_[3], e = h_[4];
        for (int i = 0; i < 80; ++i) {
            uint32_t f, kc;
            if (i < 20) {
                f = (b & c) | (~b & d);
                kc = 0x5A827999u;
            } else if (i < 40) {
                f = b ^ c ^ d;
                kc = 0x6ED9EBA1u;
            } else if (i < 60) {
                f = (b & c) | (b & d) | (c & d);
                kc = 0x8F1BBCDCu;
            } else {
                f = b ^ c ^ d;
                kc = 0xCA62C1D6u;
            }
            const uint32_t t = rotl(a, 5) + f + e + kc + w[i];
            e = d;
            d = c;
            c = rotl(b, 30);
            b = a;
            a = t;
        }
        h_[0] += a;
        h_[1] += b;
        h_[2] += c;
        h_[3] += d;
        h_[4] += e;
    }

    std::array<uint32_t, 5> h_;
    uint8_t buf_[64];
    std::size_t buf_fill_ = 0;
    uint64_t len_ = 0;
};

// ---------------------------------------------------------------------------
// SipHash-2-4: the default keyed 64-bit hash. Short fixed-size messages, so
// one-shot over a small stack buffer.
// ---------------------------------------------------------------------------

inline uint64_t siphash24(const std::array<uint8_t, 16>& key, std::span<const uint8_t> msg) {
    auto le64 = [](const uint8_t* b) {
        uint64_t v = 0;
        for (int i = 7; i >= 0; --i) v = (v << 8) | b[i];
        return v;
    };
    auto rotl = [](uint64_t v, int r) { return (v << r) | (v >> (64 - r)); };

    const uint64_t k0 = le64(key.data());
    const uint64_t k1 = le64(key.data() + 8);
    uint64_t v0 = 0x736f6d6570736575ull ^ k0;
    uint64_t v1 = 0x646f72616e646f6dull ^ k1;
    uint64_t v2 = 0x6c7967656e657261ull ^ k0;
    uint64_t v3 = 0x7465646279746573ull ^ k1;

    auto round = [&] {
        v0 += v1;
        v1 = rotl(v1, 13);
        v1 ^= v0;
        v0 = rotl(v0, 32);
        v2 += v3;
        v3 = rotl(v3, 16);
        v3 ^= v2;
        v0 += v3;
        v3 = rotl(v3, 21);
        v3 ^= v0;
        v2 += v1;
        v1 = rotl(v1, 17);
        v1 ^= v2;
        v2 = rotl(v2, 32);
    };

    const std::size_t n = msg.size();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const uint64_t m = le64(msg.data() + i);
        v3 ^= m;
        round();
        round();
        v0 ^= m;
    }
    uint64_t last = uint64_t{static_cast<uint8_t>(n)} << 56;
    for (std::size_t j = 0; i + j < n; ++j) last |= uint64_t{msg[i + j]} << (8 * j);
    v3 ^= last;
    round();
    round();
    v0 ^= last;
    v2 ^= 0xff;
    round();
    round();
    round();
    round();
    return v0 ^ v1 ^ v2 ^ v3;
}

// ---------------------------------------------------------------------------
// The seeded family supplying the table hashes h_1..h_k (table B), f_1, f_2
// (table C) and the purity-check hash g.
// ---------------------------------------------------------------------------

enum class HashMode : uint8_t {
    Default = 0,      // SipHash-2-4 keyed by the seed; g ranges over [0, n^2]
    Replication = 1,  // SHA-1(seed || tag || i || x); cells mod 101-style m, g mod 10211
};

inline const char* to_string(HashMode m) {
    return m == HashMode::Default ? "default" : "replication";
}

/// g's modulus in replication mode, as used in the original measurements.
inline constexpr uint64_t kReplicationCheckModulus = 10211;

/// Where a hash lands: which of the two tables.
enum class Table : uint8_t { B = 0, C = 1 };

struct HashConfig {
    std::array<uint8_t, 16> seed{};
    uint32_t k = 1;        // number of B-table hash functions h_1..h_k
    uint32_t m = 1;        // cells per table
    uint64_t n_bound = 0;  // identifiers live in [0, n_bound]
    HashMode mode = HashMode::Default;

    bool operator==(const HashConfig&) const = default;
};

/// Expands a 64-bit seed value into the 16-byte hash seed (SplitMix-style
/// diffusion so CLI users can pass small integers).
inline std::array<uint8_t, 16> expand_seed(uint64_t value) {
    std::array<uint8_t, 16> out{};
    uint64_t s = value;
    for (int half = 0; half < 2; ++half) {
        s += 0x9E3779B97F4A7C15ull;
        uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        for (int i = 0; i < 8; ++i) out[8 * half + i] = static_cast<uint8_t>(z >> (8 * i));
    }
    return out;
}

namespace detail {

/// Domain-separated message: tag byte, function index (LE32), id (LE64).
inline std::size_t build_hash_msg(uint8_t* buf, uint8_t tag, uint32_t i, uint64_t x) {
    buf[0] = tag;
    for (int j = 0; j < 4; ++j) buf[1 + j] = static_cast<uint8_t>(i >> (8 * j));
    for (int j = 0; j < 8; ++j) buf[5 + j] = static_cast<uint8_t>(x >> (8 * j));
    return 13;
}

/// One keyed 64-bit value per (seed, tag, i, x), mode-dependent.
inline uint64_t keyed_value(const HashConfig& cfg, uint8_t tag, uint32_t i, uint64_t x) {
    uint8_t msg[13];
    const std::size_t len = build_hash_msg(msg, tag, i, x);
    if (cfg.mode == HashMode::Default) return siphash24(cfg.seed, {msg, len});
    // Replication mode: SHA-1 over seed || msg, first 8 digest bytes big-endian.
    Sha1 s;
    s.update(cfg.seed);
    s.update({msg, len});
    const Sha1::Digest dg = s.finish();
    uint64_t v = 0;
    for (int j = 0; j < 8; ++j) v = (v << 8) | dg[j];
    return v;
}

}  // namespace detail

/// Cell index for table B (1 <= i <= k) or table C (i in {1,2}).
inline uint32_t cell_hash(const HashConfig& cfg, Table table, uint32_t i, uint64_t x) {
    const uint32_t limit = table == Table::B ? cfg.k : 2;
    if (i < 1 || i > limit)
        throw std::out_of_range("cell_hash: function index " + std::to_string(i) +
                                " out of range for table " + (table == Table::B ? "B" : "C"));
    const uint8_t tag = table == Table::B ? 0x42 : 0x43;  // 'B' / 'C'
    return static_cast<uint32_t>(detail::keyed_value(cfg, tag, i, x) % cfg.m);
}

/// The purity-check hash g: [0, n_bound] -> [0, n_bound^2] (default mode) or
/// [0, 10210] (replication mode).
inline uint64_t check_hash(const HashConfig& cfg, uint64_t x) {
    if (x > cfg.n_bound)
        throw IdentifierOutOfRange("check_hash: " + std::to_string(x) + " > n=" +
                                   std::to_string(cfg.n_bound));
    const uint64_t v = detail::keyed_value(cfg, 0x47 /* 'G' */, 0, x);
    if (cfg.mode == HashMode::Replication) return v % kReplicationCheckModulus;
    // Range [0, n^2]: n^2 + 1 values; n_bound^2 can exceed 64 bits only for
    // n >= 2^32, which the id type already excludes at sane scales, but the
    // product is formed in 128 bits anyway.
    const unsigned __int128 range = (unsigned __int128)cfg.n_bound * cfg.n_bound + 1;
    return static_cast<uint64_t>(v % range);
}

}  // namespace straggler
