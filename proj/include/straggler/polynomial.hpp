#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "straggler/finite_field.hpp"

namespace straggler {

/// Dense polynomial over GF[p^e], coefficients ascending (coeffs[i] multiplies
/// x^i). The zero polynomial is the empty vector; every function keeps its
/// results trimmed. All operations take the Field explicitly.
using Poly = std::vector<FieldElement>;

namespace poly {

inline void trim(const Field& F, Poly& a) {
    while (!a.empty() && F.is_zero(a.back())) a.pop_back();
}

inline int degree(const Poly& a) { return static_cast<int>(a.size()) - 1; }

inline Poly make_x(const Field& F) { return Poly{F.zero(), F.one()}; }

inline Poly constant(const Field& F, const FieldElement& c) {
    Poly out{c};
    trim(F, out);
    return out;
}

inline Poly add(const Field& F, const Poly& a, const Poly& b) {
    Poly out = a.size() >= b.size() ? a : b;
    const Poly& small = a.size() >= b.size() ? b : a;
    for (std::size_t i = 0; i < small.size(); ++i) out[i] = F.add(out[i], small[i]);
    trim(F, out);
    return out;
}

inline Poly sub(const Field& F, const Poly& a, const Poly& b) {
    Poly out = a;
    out.resize(std::max(a.size(), b.size()), F.zero());
    for (std::size_t i = 0; i < b.size(); ++i) out[i] = F.sub(out[i], b[i]);
    trim(F, out);
    return out;
}

inline Poly mul(const Field& F, const Poly& a, const Poly& b) {
    if (a.empty() || b.empty()) return {};
    Poly out(a.size() + b.size() - 1, F.zero());
    std::vector<uint64_t> scratch;
    FieldElement prod = F.zero();
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (F.is_zero(a[i])) continue;
        for (std::size_t j = 0; j < b.size(); ++j) {
            F.mul_into(prod, a[i], b[j], scratch);
            F.add_assign(out[i + j], prod);
        }
    }
    trim(F, out);
    return out;
}

inline Poly scale(const Field& F, const Poly& a, const FieldElement& c) {
    Poly out(a.size(), F.zero());
    std::vector<uint64_t> scratch;
    for (std::size_t i = 0; i < a.size(); ++i) F.mul_into(out[i], a[i], c, scratch);
    trim(F, out);
    return out;
}

/// Quotient and remainder with nonzero divisor b (need not be monic).
inline std::pair<Poly, Poly> divmod(const Field& F, Poly a, const Poly& b) {
    if (b.empty()) throw std::domain_error("poly divmod: division by zero polynomial");
    trim(F, a);
    if (a.size() < b.size()) return {Poly{}, std::move(a)};
    const FieldElement inv_lead = F.inv(b.back());
    Poly q(a.size() - b.size() + 1, F.zero());
    std::vector<uint64_t> scratch;
    FieldElement c = F.zero(), prod = F.zero();
    while (a.size() >= b.size()) {
        F.mul_into(c, a.back(), inv_lead, scratch);
        const std::size_t shift = a.size() - b.size();
        q[shift] = c;
        for (std::size_t j = 0; j < b.size(); ++j) {
            F.mul_into(prod, c, b[j], scratch);
            F.sub_assign(a[shift + j], prod);
        }
        a.pop_back();  // leading term cancelled exactly
        trim(F, a);
        if (a.empty()) break;
    }
    trim(F, q);
    return {std::move(q), std::move(a)};
}

inline Poly rem(const Field& F, Poly a, const Poly& b) {
    return divmod(F, std::move(a), b).second;
}

/// Monic gcd.
inline Poly gcd(const Field& F, Poly a, Poly b) {
    trim(F, a);
    trim(F, b);
    while (!b.empty()) {
        Poly r = rem(F, std::move(a), b);
        a = std::move(b);
        b = std::move(r);
    }
    if (!a.empty() && a.back() != F.one()) a = scale(F, a, F.inv(a.back()));
    return a;
}

inline Poly mulmod(const Field& F, const Poly& a, const Poly& b, const Poly& mod) {
    return rem(F, mul(F, a, b), mod);
}

inline Poly powmod(const Field& F, Poly base, u128 exp, const Poly& mod) {
    Poly r{F.one()};
    base = rem(F, std::move(base), mod);
    while (exp) {
        if (exp & 1) r = mulmod(F, r, base, mod);
        base = mulmod(F, base, base, mod);
        exp >>= 1;
    }
    return r;
}

/// x^(p^e) mod f by iterated Frobenius (e exponentiations to the p-th power),
/// avoiding a p^e-sized exponent.
inline Poly frobenius_power(const Field& F, const Poly& f) {
    Poly t = make_x(F);
    t = rem(F, std::move(t), f);
    for (uint32_t i = 0; i < F.e(); ++i) t = powmod(F, std::move(t), F.p(), f);
    return t;
}

inline FieldElement eval(const Field& F, const Poly& a, const FieldElement& x) {
    FieldElement acc = F.zero();
    std::vector<uint64_t> scratch;
    FieldElement t = F.zero();
    for (std::size_t i = a.size(); i-- > 0;) {
        F.mul_into(t, acc, x, scratch);
        acc = t;
        F.add_assign(acc, a[i]);
    }
    return acc;
}

/// Monic polynomial with exactly the given roots: prod (x - r_i).
inline Poly from_roots(const Field& F, const std::vector<FieldElement>& roots) {
    Poly out{F.one()};
    for (const auto& r : roots) out = mul(F, out, Poly{F.neg(r), F.one()});
    return out;
}

}  // namespace poly
}  // namespace straggler
