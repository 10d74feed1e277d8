#pragma once

#include <cassert>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "straggler/bytes.hpp"
#include "straggler/errors.hpp"
#include "straggler/rng.hpp"

namespace straggler {

using u128 = unsigned __int128;

/// Parameters of GF[p^e]: characteristic p, extension degree e, the monic
/// irreducible modulus Z (coefficients Z_0..Z_{e-1}; the leading 1 is
/// implicit), and the identifier bound n the field was sized for (p^e > n).
struct FieldParams {
    uint32_t p = 0;
    uint32_t e = 0;
    std::vector<uint32_t> modulus;
    uint64_t n_bound = 0;

    bool operator==(const FieldParams&) const = default;
};

/// A value of GF[p^e]: coefficients x_0..x_{e-1}, each in [0, p-1].
/// Plain data; all arithmetic goes through the owning Field.
class FieldElement {
public:
    FieldElement() = default;
    explicit FieldElement(std::vector<uint32_t> coeffs) : c_(std::move(coeffs)) {}

    std::span<const uint32_t> coeffs() const { return c_; }
    std::vector<uint32_t>& raw() { return c_; }
    const std::vector<uint32_t>& raw() const { return c_; }

    bool operator==(const FieldElement&) const = default;

private:
    std::vector<uint32_t> c_;
};

namespace detail {

inline bool is_prime_u64(uint64_t v) {
    if (v < 2) return false;
    for (uint64_t f = 2; f * f <= v; ++f)
        if (v % f == 0) return false;
    return true;
}

/// Unsigned mod-p reduction without a hardware divide on the hot path.
/// Valid for any x when p < 2^32.
struct ModP {
    uint32_t p = 0;
    uint64_t magic = 0;  // floor(2^64 / p)

    explicit ModP(uint32_t prime = 0) : p(prime) {
        if (p) magic = ~uint64_t{0} / p;
    }

    uint32_t reduce(uint64_t x) const {
        uint64_t q = static_cast<uint64_t>((u128(x) * magic) >> 64);
        uint64_t r = x - q * p;
        while (r >= p) r -= p;
        return static_cast<uint32_t>(r);
    }
};

inline uint32_t int_pow_mod(uint64_t base, uint64_t exp, uint32_t mod) {
    uint64_t r = 1 % mod, b = base % mod;
    while (exp) {
        if (exp & 1) r = (r * b) % mod;
        b = (b * b) % mod;
        exp >>= 1;
    }
    return static_cast<uint32_t>(r);
}

inline std::vector<uint32_t> prime_factors(uint32_t v) {
    std::vector<uint32_t> out;
    for (uint32_t f = 2; f * f <= v; ++f) {
        if (v % f == 0) {
            out.push_back(f);
            while (v % f == 0) v /= f;
        }
    }
    if (v > 1) out.push_back(v);
    return out;
}

// --- Dense polynomials over GF(p), coefficients ascending.  Only what the
// --- irreducibility search needs; extension-field polynomials live in
// --- polynomial.hpp.

using ZpPoly = std::vector<uint32_t>;

inline void zp_trim(ZpPoly& a) {
    while (!a.empty() && a.back() == 0) a.pop_back();
}

inline ZpPoly zp_mulmod(const ZpPoly& a, const ZpPoly& b, const ZpPoly& mod, uint32_t p) {
    if (a.empty() || b.empty()) return {};
    std::vector<uint64_t> acc(a.size() + b.size() - 1, 0);
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (!a[i]) continue;
        for (std::size_t j = 0; j < b.size(); ++j) acc[i + j] = (acc[i + j] + uint64_t{a[i]} * b[j]) % p;
    }
    // mod is monic of degree m: reduce by long division.
    const std::size_t m = mod.size() - 1;
    for (std::size_t i = acc.size(); i-- > m;) {
        uint64_t c = acc[i] % p;
        if (!c) continue;
        acc[i] = 0;
        for (std::size_t j = 0; j < m; ++j)
            acc[i - m + j] = (acc[i - m + j] + c * (p - mod[j] % p)) % p;
    }
    ZpPoly out(std::min(acc.size(), m));
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<uint32_t>(acc[i] % p);
    zp_trim(out);
    return out;
}

inline ZpPoly zp_powmod(ZpPoly base, uint64_t exp, const ZpPoly& mod, uint32_t p) {
    ZpPoly r{1};
    while (exp) {
        if (exp & 1) r = zp_mulmod(r, base, mod, p);
        base = zp_mulmod(base, base, mod, p);
        exp >>= 1;
    }
    return r;
}

inline ZpPoly zp_sub(ZpPoly a, const ZpPoly& b, uint32_t p) {
    if (a.size() < b.size()) a.resize(b.size(), 0);
    for (std::size_t i = 0; i < b.size(); ++i) a[i] = (a[i] + p - b[i]) % p;
    zp_trim(a);
    return a;
}

inline ZpPoly zp_rem(ZpPoly a, const ZpPoly& b, uint32_t p) {
    // b need not be monic; scale by the inverse of its leading coefficient.
    const uint32_t lead = b.back();
    const uint32_t inv_lead = int_pow_mod(lead, p - 2, p);
    while (a.size() >= b.size()) {
        uint64_t c = (uint64_t{a.back()} * inv_lead) % p;
        const std::size_t shift = a.size() - b.size();
        if (c) {
            for (std::size_t j = 0; j < b.size(); ++j)
                a[shift + j] = static_cast<uint32_t>((a[shift + j] + c * (p - b[j])) % p);
        }
        a.pop_back();
        zp_trim(a);
        if (a.empty()) break;
    }
    return a;
}

inline ZpPoly zp_gcd(ZpPoly a, ZpPoly b, uint32_t p) {
    zp_trim(a);
    zp_trim(b);
    while (!b.empty()) {
        ZpPoly r = zp_rem(a, b, p);
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.empty() && a.back() != 1) {
        const uint32_t inv = int_pow_mod(a.back(), p - 2, p);
        for (auto& c : a) c = static_cast<uint32_t>((uint64_t{c} * inv) % p);
    }
    return a;
}

/// Irreducibility of the monic polynomial x^e + Z over GF(p), coefficients Z
/// of length e: theta^{p^e} == theta mod Z, and for every prime q | e,
/// gcd(theta^{p^{e/q}} - theta, Z) == 1.
inline bool zp_is_irreducible(const std::vector<uint32_t>& low_coeffs, uint32_t p) {
    const std::size_t e = low_coeffs.size();
    ZpPoly mod(low_coeffs);
    mod.push_back(1);  // monic
    if (e == 1) return true;

    const ZpPoly x{0, 1};
    // theta^{p^j} by iterated Frobenius: t_{j} = t_{j-1}^p.
    std::vector<ZpPoly> frob(e + 1);
    frob[0] = x;
    for (std::size_t j = 1; j <= e; ++j) frob[j] = zp_powmod(frob[j - 1], p, mod, p);

    if (zp_sub(frob[e], x, p) != ZpPoly{}) return false;
    for (uint32_t q : prime_factors(static_cast<uint32_t>(e))) {
        ZpPoly diff = zp_sub(frob[e / q], x, p);
        if (diff.empty()) return false;  // Z divides theta^{p^{e/q}} - theta
        ZpPoly g = zp_gcd(mod, diff, p);
        if (g.size() != 1) return false;
    }
    return true;
}

}  // namespace detail

/// Deterministic modulus search: the first monic irreducible of degree e over
/// GF(p) when coefficient vectors (Z_0..Z_{e-1}) are counted with Z_0 least
/// significant. Returns the low coefficients; the leading 1 is implicit.
inline std::vector<uint32_t> find_irreducible(uint32_t p, uint32_t e) {
    if (!detail::is_prime_u64(p)) throw std::invalid_argument("find_irreducible: p must be prime");
    if (e == 0) throw std::invalid_argument("find_irreducible: e must be positive");
    if (e == 1) return {0};  // Z = theta

    std::vector<uint32_t> coeffs(e, 0);
    for (;;) {
        if (detail::zp_is_irreducible(coeffs, p)) return coeffs;
        // next candidate
        std::size_t i = 0;
        while (i < e && ++coeffs[i] == p) coeffs[i++] = 0;
        if (i == e) throw std::logic_error("find_irreducible: search space exhausted");
    }
}

/// Field selection for a straggler bound d and universe bound n: the smallest
/// prime p > max(d, 2), e minimal with p^e > n, and the deterministic modulus.
inline FieldParams choose_field(uint32_t d, uint64_t n) {
    if (d < 1 || n < 1) throw std::invalid_argument("choose_field: d and n must be >= 1");
    uint64_t p = std::max<uint64_t>(d, 2) + 1;
    while (!detail::is_prime_u64(p)) ++p;
    if (p > UINT32_MAX) throw std::invalid_argument("choose_field: d too large");

    uint32_t e = 1;
    u128 power = p;
    while (power <= n) {
        power *= p;
        ++e;
    }
    return FieldParams{static_cast<uint32_t>(p), e, find_irreducible(static_cast<uint32_t>(p), e), n};
}

/// Arithmetic in GF[p^e]. Construction validates the parameters; elements are
/// plain coefficient vectors and every operation checks they belong here (by
/// width), throwing ParamsMismatch otherwise.
class Field {
public:
    explicit Field(FieldParams params) : params_(std::move(params)), mod_(params_.p) {
        validate();
        bits_per_coeff_ = 1;
        while ((uint64_t{1} << bits_per_coeff_) < params_.p) ++bits_per_coeff_;
        order_ = 1;
        for (uint32_t i = 0; i < params_.e; ++i) order_ *= params_.p;
    }

    const FieldParams& params() const { return params_; }
    uint32_t p() const { return params_.p; }
    uint32_t e() const { return params_.e; }
    u128 order() const { return order_; }
    unsigned bits_per_coeff() const { return bits_per_coeff_; }
    std::size_t element_bytes() const { return (std::size_t{params_.e} * bits_per_coeff_ + 7) / 8; }

    FieldElement zero() const { return FieldElement(std::vector<uint32_t>(params_.e, 0)); }

    FieldElement one() const {
        std::vector<uint32_t> c(params_.e, 0);
        c[0] = 1;
        return FieldElement(std::move(c));
    }

    /// The image of an integer under the prime-subfield embedding (v mod p).
    FieldElement from_int(uint64_t v) const {
        std::vector<uint32_t> c(params_.e, 0);
        c[0] = static_cast<uint32_t>(v % params_.p);
        return FieldElement(std::move(c));
    }

    bool is_zero(const FieldElement& a) const {
        check(a);
        for (uint32_t v : a.coeffs())
            if (v) return false;
        return true;
    }

    FieldElement add(const FieldElement& a, const FieldElement& b) const {
        check(a);
        check(b);
        FieldElement out = a;
        add_assign(out, b);
        return out;
    }

    FieldElement sub(const FieldElement& a, const FieldElement& b) const {
        check(a);
        check(b);
        FieldElement out = a;
        sub_assign(out, b);
        return out;
    }

    FieldElement neg(const FieldElement& a) const {
        check(a);
        FieldElement out = a;
        for (auto& v : out.raw()) v = v ? params_.p - v : 0;
        return out;
    }

    void add_assign(FieldElement& a, const FieldElement& b) const {
        auto& av = a.raw();
        const auto& bv = b.raw();
        for (uint32_t i = 0; i < params_.e; ++i) {
            av[i] += bv[i];
            if (av[i] >= params_.p) av[i] -= params_.p;
        }
    }

    void sub_assign(FieldElement& a, const FieldElement& b) const {
        auto& av = a.raw();
        const auto& bv = b.raw();
        for (uint32_t i = 0; i < params_.e; ++i) {
            av[i] += params_.p - bv[i];
            if (av[i] >= params_.p) av[i] -= params_.p;
        }
    }

    FieldElement mul(const FieldElement& a, const FieldElement& b) const {
        check(a);
        check(b);
        FieldElement out = zero();
        std::vector<uint64_t> scratch;
        mul_into(out, a, b, scratch);
        return out;
    }

    /// Product into `out` using caller-provided scratch; the sketch's update
    /// loop calls this with re-used buffers so steady state never allocates.
    void mul_into(FieldElement& out, const FieldElement& a, const FieldElement& b,
                  std::vector<uint64_t>& scratch) const {
        const uint32_t e = params_.e;
        const uint32_t p = params_.p;
        scratch.assign(2 * std::size_t{e} - 1, 0);
        const auto& av = a.raw();
        const auto& bv = b.raw();
        if (lazy_accumulate_ok()) {
            for (uint32_t i = 0; i < e; ++i) {
                const uint64_t ai = av[i];
                if (!ai) continue;
                for (uint32_t j = 0; j < e; ++j) scratch[i + j] += ai * bv[j];
            }
        } else {
            for (uint32_t i = 0; i < e; ++i) {
                const uint64_t ai = av[i];
                if (!ai) continue;
                for (uint32_t j = 0; j < e; ++j)
                    scratch[i + j] = mod_.reduce(scratch[i + j] + ai * bv[j]);
            }
        }
        // Reduce modulo Z: theta^e = -(Z_0 + ... + Z_{e-1} theta^{e-1}).
        for (std::size_t i = scratch.size(); i-- > e;) {
            const uint64_t c = mod_.reduce(scratch[i]);
            scratch[i] = 0;
            if (!c) continue;
            for (uint32_t j = 0; j < e; ++j) {
                const uint32_t zj = params_.modulus[j];
                if (zj) scratch[i - e + j] = mod_.reduce(scratch[i - e + j] + c * (p - zj));
            }
        }
        auto& ov = out.raw();
        ov.resize(e);
        for (uint32_t i = 0; i < e; ++i) ov[i] = mod_.reduce(scratch[i]);
    }

    /// Division by an integer k in [1, p-1] mod p: multiplies every
    /// coefficient by k^{-1} mod p. k ≡ 0 (mod p) is the characteristic and
    /// has no inverse.
    FieldElement div_by_int(const FieldElement& a, uint64_t k) const {
        check(a);
        const uint32_t kr = static_cast<uint32_t>(k % params_.p);
        if (kr == 0)
            throw DivisionByCharacteristic("div_by_int: divisor " + std::to_string(k) +
                                           " is divisible by p=" + std::to_string(params_.p));
        const uint64_t inv = detail::int_pow_mod(kr, params_.p - 2, params_.p);
        FieldElement out = a;
        for (auto& v : out.raw()) v = mod_.reduce(v * inv);
        return out;
    }

    FieldElement pow(const FieldElement& a, uint64_t k) const { return pow_wide(a, k); }

    /// Multiplicative inverse of a nonzero element via a^(p^e - 2).
    FieldElement inv(const FieldElement& a) const {
        check(a);
        if (is_zero(a)) throw std::domain_error("inv: zero has no inverse");
        return pow_wide(a, order_ - 2);
    }

    /// Identifier embedding: base-p digits of x as coefficients. Injective on
    /// [0, n_bound] because p^e > n_bound.
    FieldElement encode_id(uint64_t x) const {
        if (x > params_.n_bound)
            throw IdentifierOutOfRange("encode_id: " + std::to_string(x) + " > n=" +
                                       std::to_string(params_.n_bound));
        std::vector<uint32_t> c(params_.e, 0);
        for (uint32_t i = 0; i < params_.e && x; ++i) {
            c[i] = static_cast<uint32_t>(x % params_.p);
            x /= params_.p;
        }
        return FieldElement(std::move(c));
    }

    /// Inverse of encode_id. The integer value always exists (it is < p^e);
    /// values above n_bound mean the element is not an identifier image and
    /// are reported via nullopt for the caller to treat as corruption.
    std::optional<uint64_t> decode_id(const FieldElement& a) const {
        check(a);
        u128 v = 0;
        const auto c = a.coeffs();
        for (uint32_t i = params_.e; i-- > 0;) v = v * params_.p + c[i];
        if (v > params_.n_bound) return std::nullopt;
        return static_cast<uint64_t>(v);
    }

    /// Square root by Tonelli-Shanks, or nullopt for quadratic non-residues.
    /// Requires odd p. The rng drives the non-residue search only.
    std::optional<FieldElement> sqrt(const FieldElement& a, SplitMix64& rng) const {
        check(a);
        if (params_.p == 2) throw std::domain_error("sqrt: not supported in characteristic 2");
        if (is_zero(a)) return zero();
        const u128 q = order_;
        if (pow_wide(a, (q - 1) / 2) != one()) return std::nullopt;

        u128 t = q - 1;
        unsigned s = 0;
        while ((t & 1) == 0) {
            t >>= 1;
            ++s;
        }
        if (s == 1) return pow_wide(a, (q + 1) / 4);

        FieldElement z = zero();
        do {
            z = random_element(rng);
        } while (is_zero(z) || pow_wide(z, (q - 1) / 2) == one());

        FieldElement m = pow_wide(z, t);
        FieldElement c = pow_wide(a, t);
        FieldElement r = pow_wide(a, (t + 1) / 2);
        unsigned v = s;
        while (c != one()) {
            FieldElement c2 = c;
            unsigned i = 0;
            while (c2 != one()) {
                c2 = mul(c2, c2);
                ++i;
            }
            FieldElement b = m;
            for (unsigned j = 0; j + i + 1 < v; ++j) b = mul(b, b);
            m = mul(b, b);
            c = mul(c, m);
            r = mul(r, b);
            v = i;
        }
        return r;
    }

    FieldElement random_element(SplitMix64& rng) const {
        std::vector<uint32_t> c(params_.e);
        for (auto& v : c) v = static_cast<uint32_t>(rng.below(params_.p));
        return FieldElement(std::move(c));
    }

    /// Canonical byte form: coefficients x_0..x_{e-1}, ceil(log2 p) bits each,
    /// packed LSB-first.
    std::vector<uint8_t> to_bytes(const FieldElement& a) const {
        check(a);
        BitPacker pk;
        for (uint32_t v : a.coeffs()) pk.push(v, bits_per_coeff_);
        std::vector<uint8_t> out = pk.bytes();
        out.resize(element_bytes(), 0);
        return out;
    }

    FieldElement from_bytes(std::span<const uint8_t> bytes) const {
        if (bytes.size() != element_bytes()) throw ParseError("field element: wrong byte count");
        BitUnpacker up(bytes);
        std::vector<uint32_t> c(params_.e);
        for (auto& v : c) {
            const uint64_t raw = up.pull(bits_per_coeff_);
            if (raw >= params_.p) throw ParseError("field element: coefficient out of range");
            v = static_cast<uint32_t>(raw);
        }
        return FieldElement(std::move(c));
    }

private:
    void validate() const {
        if (!detail::is_prime_u64(params_.p)) throw std::invalid_argument("Field: p must be prime");
        if (params_.e == 0) throw std::invalid_argument("Field: e must be positive");
        if (params_.modulus.size() != params_.e)
            throw std::invalid_argument("Field: modulus must have e coefficients");
        for (uint32_t z : params_.modulus)
            if (z >= params_.p) throw std::invalid_argument("Field: modulus coefficient out of range");
        if (!detail::zp_is_irreducible(params_.modulus, params_.p))
            throw std::invalid_argument("Field: modulus is reducible mod p");
        u128 power = 1;
        for (uint32_t i = 0; i < params_.e; ++i) power *= params_.p;
        if (power <= params_.n_bound) throw std::invalid_argument("Field: p^e must exceed n_bound");
    }

    void check(const FieldElement& a) const {
        if (a.raw().size() != params_.e)
            throw ParamsMismatch("field element has degree " + std::to_string(a.raw().size()) +
                                 ", field expects " + std::to_string(params_.e));
    }

    bool lazy_accumulate_ok() const {
        // Convolution terms accumulate e products below p^2 each.
        const u128 worst = u128(params_.e) * (params_.p - 1) * (params_.p - 1);
        return worst <= UINT64_MAX / 2;
    }

    FieldElement pow_wide(const FieldElement& a, u128 k) const {
        check(a);
        FieldElement result = one();
        FieldElement base = a;
        std::vector<uint64_t> scratch;
        while (k) {
            if (k & 1) {
                FieldElement t = result;
                mul_into(result, t, base, scratch);
            }
            FieldElement t = base;
            mul_into(base, t, t, scratch);
            k >>= 1;
        }
        return result;
    }

    FieldParams params_;
    detail::ModP mod_;
    unsigned bits_per_coeff_ = 0;
    u128 order_ = 0;
};

}  // namespace straggler
