#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "straggler/bytes.hpp"
#include "straggler/errors.hpp"
#include "straggler/finite_field.hpp"
#include "straggler/hashing.hpp"
#include "straggler/polynomial.hpp"
#include "straggler/rng.hpp"

namespace straggler {

/// Elementary symmetric polynomials sigma_1..sigma_c from power sums s_1..s_c
/// via Newton's identities: k*sigma_k = sum_{i=1..k} (-1)^{i-1} sigma_{k-i} s_i,
/// with sigma_0 = 1. Each step divides by the integer k, which is invertible
/// because the field was chosen with p > d >= c.
inline std::vector<FieldElement> newton_elementary(const Field& F,
                                                   std::span<const FieldElement> s,
                                                   uint32_t c) {
    if (c > s.size()) throw std::invalid_argument("newton_elementary: need s_1..s_c");
    std::vector<FieldElement> sigma;
    sigma.reserve(c + 1);
    sigma.push_back(F.one());  // sigma_0
    std::vector<uint64_t> scratch;
    FieldElement term = F.zero();
    for (uint32_t k = 1; k <= c; ++k) {
        FieldElement acc = F.zero();
        for (uint32_t i = 1; i <= k; ++i) {
            F.mul_into(term, sigma[k - i], s[i - 1], scratch);
            if (i % 2 == 1)
                F.add_assign(acc, term);
            else
                F.sub_assign(acc, term);
        }
        sigma.push_back(F.div_by_int(acc, k));
    }
    sigma.erase(sigma.begin());  // drop sigma_0; callers index sigma_1..sigma_c
    return sigma;
}

/// P(x) = prod (x - x_i) = sum_{k=0}^{c} (-1)^k sigma_k x^{c-k}: monic of
/// degree c = sigmas.size(), alternating-sign sigma coefficients.
inline Poly build_polynomial(const Field& F, std::span<const FieldElement> sigmas) {
    const std::size_t c = sigmas.size();
    Poly P(c + 1, F.zero());
    P[c] = F.one();
    for (std::size_t k = 1; k <= c; ++k) P[c - k] = (k % 2 == 1) ? F.neg(sigmas[k - 1]) : sigmas[k - 1];
    return P;
}

namespace detail {

/// Splits a monic polynomial known to be a product of distinct linear factors
/// into roots, by randomized halving: gcd(f, (x+r)^{(q-1)/2} - 1) separates
/// the roots into quadratic residues / non-residues of the shifted values.
inline bool split_into_roots(const Field& F, const Poly& f, SplitMix64& rng,
                             std::vector<FieldElement>& out) {
    const int deg = poly::degree(f);
    if (deg <= 0) return deg == 0;  // constant 1: no roots; constant 0 cannot happen
    if (deg == 1) {
        out.push_back(F.neg(f[0]));  // monic: x + f0
        return true;
    }
    if (deg == 2) {
        // x^2 + bx + c: roots (-b +- sqrt(b^2 - 4c)) / 2. p is odd on every
        // caller path, so 2 and the discriminant square root are available.
        const FieldElement& b = f[1];
        const FieldElement& c = f[0];
        const FieldElement disc = F.sub(F.mul(b, b), F.mul(F.from_int(4), c));
        auto root = F.sqrt(disc, rng);
        if (!root) return false;
        const FieldElement nb = F.neg(b);
        out.push_back(F.div_by_int(F.add(nb, *root), 2));
        out.push_back(F.div_by_int(F.sub(nb, *root), 2));
        return true;
    }
    const u128 half = (F.order() - 1) / 2;
    for (int attempt = 0; attempt < 128; ++attempt) {
        Poly shift{F.random_element(rng), F.one()};  // x + r
        Poly w = poly::powmod(F, shift, half, f);
        w = poly::sub(F, w, Poly{F.one()});
        Poly g = poly::gcd(F, f, w);
        const int dg = poly::degree(g);
        if (dg <= 0 || dg >= deg) continue;
        Poly rest = poly::divmod(F, f, g).first;
        return split_into_roots(F, g, rng, out) && split_into_roots(F, rest, rng, out);
    }
    return false;
}

}  // namespace detail

/// Roots of a monic P that is a product of distinct linear factors; nullopt
/// when P does not split that way (detected up front via x^q == x mod P and
/// confirmed afterwards by re-expanding the factorization).
inline std::optional<std::vector<FieldElement>> find_roots(const Field& F, const Poly& P,
                                                           SplitMix64& rng) {
    const int deg = poly::degree(P);
    if (deg < 0) return std::nullopt;                     // zero polynomial
    if (deg == 0) return std::vector<FieldElement>{};     // constant (monic: 1)
    if (F.p() == 2 && deg >= 2) return std::nullopt;      // splitter needs odd q

    if (deg >= 2) {
        // P splits into distinct linear factors iff x^q == x (mod P).
        Poly frob = poly::frobenius_power(F, P);
        Poly x_red = poly::rem(F, poly::make_x(F), P);
        if (poly::sub(F, frob, x_red) != Poly{}) return std::nullopt;
    }

    std::vector<FieldElement> roots;
    roots.reserve(deg);
    if (!detail::split_into_roots(F, P, rng, roots)) return std::nullopt;
    if (static_cast<int>(roots.size()) != deg) return std::nullopt;

    // Verification: the factorization must re-expand to P exactly.
    if (poly::from_roots(F, roots) != P) return std::nullopt;
    return roots;
}

enum class SketchStatus : uint8_t {
    Ok = 0,
    Overflow = 1,       // more than d net members; decode not attempted
    DecodeFailure = 2,  // ill-formed stream detected (or Las Vegas cap hit)
};

inline const char* to_string(SketchStatus s) {
    switch (s) {
        case SketchStatus::Ok: return "ok";
        case SketchStatus::Overflow: return "overflow";
        default: return "decode-failure";
    }
}

struct SketchDecodeResult {
    SketchStatus status = SketchStatus::Ok;
    std::vector<uint64_t> ids;  // sorted ascending; empty unless status == Ok
};

/// Deterministic straggler sketch: a signed counter s_0 and power sums
/// s_1..s_d over GF[p^e]. Exact for streams whose net effect is a set of at
/// most d leftover inserts; decode failures are detected, never silent.
class PowerSumSketch {
public:
    static constexpr uint16_t kFormatVersion = 1;

    PowerSumSketch(uint32_t d, uint64_t n) : PowerSumSketch(choose_field(d, n), d) {}

    PowerSumSketch(FieldParams params, uint32_t d)
        : field_(std::move(params)), d_(d), s_(d, field_.zero()) {
        if (d < 1) throw std::invalid_argument("PowerSumSketch: d must be >= 1");
        if (field_.p() <= d)
            throw std::invalid_argument("PowerSumSketch: field characteristic must exceed d");
    }

    const Field& field() const { return field_; }
    uint32_t d() const { return d_; }
    uint64_t n_bound() const { return field_.params().n_bound; }
    int64_t count_stragglers() const { return s0_; }
    std::span<const FieldElement> power_sums() const { return s_; }

    void insert(uint64_t x) { update(x, /*sign=*/+1); }
    void remove(uint64_t x) { update(x, /*sign=*/-1); }

    /// Coordinatewise sum with another sketch built over identical params:
    /// the state of the concatenated update streams.
    void combine(const PowerSumSketch& other) {
        if (other.field_.params() != field_.params() || other.d_ != d_)
            throw ParamsMismatch("combine: sketches have different parameters");
        s0_ += other.s0_;
        for (uint32_t k = 0; k < d_; ++k) field_.add_assign(s_[k], other.s_[k]);
    }

    /// Decode: Newton inversion, polynomial assembly, root finding, id
    /// decoding, then a full re-check of every power sum against the
    /// recovered set. Non-destructive and a pure function of the state.
    SketchDecodeResult list_stragglers() const {
        SketchDecodeResult res;
        if (s0_ > static_cast<int64_t>(d_)) {
            res.status = SketchStatus::Overflow;
            return res;
        }
        if (s0_ < 0) {
            res.status = SketchStatus::DecodeFailure;
            return res;
        }
        const uint32_t c = static_cast<uint32_t>(s0_);

        // Las Vegas steps draw from an RNG seeded by the state itself, so
        // identical states always decode identically.
        SplitMix64 rng(state_digest());

        std::vector<FieldElement> sigma = newton_elementary(field_, s_, c);
        Poly P = build_polynomial(field_, sigma);
        auto roots = find_roots(field_, P, rng);
        if (!roots) {
            res.status = SketchStatus::DecodeFailure;
            return res;
        }

        std::vector<uint64_t> ids;
        ids.reserve(roots->size());
        for (const FieldElement& r : *roots) {
            auto id = field_.decode_id(r);
            if (!id) {
                res.status = SketchStatus::DecodeFailure;
                return res;
            }
            ids.push_back(*id);
        }
        std::sort(ids.begin(), ids.end());
        if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
            res.status = SketchStatus::DecodeFailure;
            return res;
        }

        // Final exactness check: the recovered set must reproduce every
        // stored power sum, not just the ones the decoder consumed.
        if (!matches_state(ids)) {
            res.status = SketchStatus::DecodeFailure;
            return res;
        }
        res.ids = std::move(ids);
        return res;
    }

    /// Wire form: version, field parameters, s0, then s_1..s_d in the field's
    /// canonical packed byte form.
    std::vector<uint8_t> serialize() const {
        ByteWriter w;
        w.u16(kFormatVersion);
        w.u32(field_.p());
        w.u32(field_.e());
        w.u32(d_);
        w.u64(field_.params().n_bound);
        for (uint32_t z : field_.params().modulus) w.u32(z);
        w.i64(s0_);
        for (const FieldElement& v : s_) w.raw(field_.to_bytes(v));
        return w.take();
    }

    static PowerSumSketch deserialize(std::span<const uint8_t> bytes) {
        ByteReader r(bytes);
        const uint16_t version = r.u16();
        if (version != kFormatVersion)
            throw ParseError("sketch: unsupported format version " + std::to_string(version));
        FieldParams params;
        params.p = r.u32();
        params.e = r.u32();
        const uint32_t d = r.u32();
        params.n_bound = r.u64();
        params.modulus.resize(params.e);
        for (auto& z : params.modulus) z = r.u32();
        PowerSumSketch sk(std::move(params), d);  // validates field + d < p
        sk.s0_ = r.i64();
        const std::size_t eb = sk.field_.element_bytes();
        for (uint32_t k = 0; k < d; ++k) sk.s_[k] = sk.field_.from_bytes(r.bytes(eb));
        r.expect_end();
        return sk;
    }

    bool operator==(const PowerSumSketch& other) const {
        return field_.params() == other.field_.params() && d_ == other.d_ && s0_ == other.s0_ &&
               s_ == other.s_;
    }

private:
    void update(uint64_t x, int sign) {
        const FieldElement base = field_.encode_id(x);  // throws if x > n
        s0_ += sign;
        FieldElement pw = base;
        for (uint32_t k = 0; k < d_; ++k) {
            if (sign > 0)
                field_.add_assign(s_[k], pw);
            else
                field_.sub_assign(s_[k], pw);
            if (k + 1 < d_) {
                FieldElement t = pw;
                field_.mul_into(pw, t, base, scratch_);
            }
        }
    }

    bool matches_state(const std::vector<uint64_t>& ids) const {
        if (static_cast<int64_t>(ids.size()) != s0_) return false;
        std::vector<FieldElement> expect(d_, field_.zero());
        std::vector<uint64_t> scratch;
        for (uint64_t x : ids) {
            const FieldElement base = field_.encode_id(x);
            FieldElement pw = base;
            for (uint32_t k = 0; k < d_; ++k) {
                field_.add_assign(expect[k], pw);
                if (k + 1 < d_) {
                    FieldElement t = pw;
                    field_.mul_into(pw, t, base, scratch);
                }
            }
        }
        return expect == s_;
    }

    uint64_t state_digest() const {
        // Fixed-key SipHash over the serialized state: deterministic decode.
        static constexpr std::array<uint8_t, 16> kKey = {0x70, 0x73, 0x73, 0x6b, 0x2d, 0x72,
                                                         0x6f, 0x6f, 0x74, 0x2d, 0x73, 0x65,
                                                         0x65, 0x64, 0x2d, 0x31};
        const std::vector<uint8_t> bytes = serialize();
        return siphash24(kKey, bytes);
    }

    Field field_;
    uint32_t d_;
    int64_t s0_ = 0;
    std::vector<FieldElement> s_;
    mutable std::vector<uint64_t> scratch_;
};

}  // namespace straggler
