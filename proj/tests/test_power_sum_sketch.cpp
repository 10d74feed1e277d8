#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <set>
#include <vector>

#include "straggler/power_sum_sketch.hpp"

using namespace straggler;

namespace {

Field make_field(uint32_t p, uint32_t e, uint64_t n) {
    FieldParams params;
    params.p = p;
    params.e = e;
    params.modulus = find_irreducible(p, e);
    params.n_bound = n;
    return Field(params);
}

// Brute-force elementary symmetric polynomial oracle: sum over all k-subsets
// of the product of members. Exponential, fine for c <= 6.
std::vector<FieldElement> brute_elementary(const Field& F,
                                           const std::vector<FieldElement>& xs) {
    const std::size_t c = xs.size();
    std::vector<FieldElement> sigma(c, F.zero());
    for (uint32_t mask = 1; mask < (1u << c); ++mask) {
        FieldElement prod = F.one();
        int bits = 0;
        for (std::size_t j = 0; j < c; ++j)
            if (mask & (1u << j)) {
                prod = F.mul(prod, xs[j]);
                ++bits;
            }
        F.add_assign(sigma[bits - 1], prod);
    }
    return sigma;
}

std::vector<FieldElement> power_sums(const Field& F, const std::vector<FieldElement>& xs,
                                     uint32_t d) {
    std::vector<FieldElement> s(d, F.zero());
    for (const auto& x : xs)
        for (uint32_t k = 1; k <= d; ++k) F.add_assign(s[k - 1], F.pow(x, k));
    return s;
}

std::vector<uint64_t> distinct_ids(SplitMix64& rng, uint64_t n, std::size_t count) {
    std::set<uint64_t> out;
    while (out.size() < count) out.insert(rng.below(n + 1));
    return {out.begin(), out.end()};
}

}  // namespace

TEST_CASE("newton_elementary inverts power sums (brute-force oracle)") {
    SplitMix64 rng(11);
    for (auto [p, e] : {std::pair<uint32_t, uint32_t>{11, 3}, {17, 2}, {101, 1}}) {
        const Field F = make_field(p, e, 1);
        for (int iter = 0; iter < 60; ++iter) {
            const uint32_t c = 1 + static_cast<uint32_t>(rng.below(6));
            // Distinct values; Newton's identities do not require distinctness
            // but the decoder always consumes sums of distinct members.
            std::vector<FieldElement> xs;
            while (xs.size() < c) {
                FieldElement v = F.random_element(rng);
                if (std::find(xs.begin(), xs.end(), v) == xs.end()) xs.push_back(v);
            }
            const auto s = power_sums(F, xs, c);
            REQUIRE(newton_elementary(F, s, c) == brute_elementary(F, xs));
        }
    }
}

TEST_CASE("newton_elementary handles c=0 and validates its span") {
    const Field F = make_field(5, 2, 1);
    REQUIRE(newton_elementary(F, {}, 0).empty());
    const std::vector<FieldElement> s{F.one()};
    REQUIRE_THROWS_AS(newton_elementary(F, s, 2), std::invalid_argument);
}

TEST_CASE("build_polynomial produces the monic polynomial with the given roots") {
    SplitMix64 rng(22);
    const Field F = make_field(11, 3, 1);
    for (int iter = 0; iter < 40; ++iter) {
        const uint32_t c = 1 + static_cast<uint32_t>(rng.below(5));
        std::vector<FieldElement> xs;
        while (xs.size() < c) {
            FieldElement v = F.random_element(rng);
            if (std::find(xs.begin(), xs.end(), v) == xs.end()) xs.push_back(v);
        }
        const Poly P = build_polynomial(F, brute_elementary(F, xs));
        REQUIRE(P == poly::from_roots(F, xs));
    }
}

TEST_CASE("worked decode example: members {2,3} over GF[5^2]") {
    const Field F = make_field(5, 2, 24);
    // Power sums of {2,3}: s1 = 5 == 0, s2 = 13 == 3 (mod 5).
    const std::vector<FieldElement> s{F.from_int(0), F.from_int(3)};
    const auto sigma = newton_elementary(F, s, 2);
    REQUIRE(sigma[0] == F.from_int(0));  // sigma_1 = 2 + 3 = 5 == 0
    REQUIRE(sigma[1] == F.from_int(1));  // sigma_2 = 2 * 3 = 6 == 1

    // P(x) = x^2 - sigma_1 x + sigma_2 = x^2 + 1.
    const Poly P = build_polynomial(F, sigma);
    REQUIRE(P == Poly{F.from_int(1), F.from_int(0), F.from_int(1)});

    SplitMix64 rng(1);
    auto roots = find_roots(F, P, rng);
    REQUIRE(roots.has_value());
    std::vector<uint64_t> ids;
    for (const auto& r : *roots) ids.push_back(*F.decode_id(r));
    std::sort(ids.begin(), ids.end());
    REQUIRE(ids == std::vector<uint64_t>{2, 3});
}

TEST_CASE("find_roots recovers planted distinct roots") {
    SplitMix64 rng(33);
    for (auto [p, e] : {std::pair<uint32_t, uint32_t>{5, 2}, {11, 3}, {17, 5}}) {
        const Field F = make_field(p, e, 1);
        for (int iter = 0; iter < 25; ++iter) {
            const std::size_t c = 1 + rng.below(8);
            std::vector<FieldElement> planted;
            while (planted.size() < c) {
                FieldElement v = F.random_element(rng);
                if (std::find(planted.begin(), planted.end(), v) == planted.end())
                    planted.push_back(v);
            }
            const Poly P = poly::from_roots(F, planted);
            auto roots = find_roots(F, P, rng);
            REQUIRE(roots.has_value());
            REQUIRE(poly::from_roots(F, *roots) == P);
            auto sorted_coeffs = [&](std::vector<FieldElement> v) {
                std::sort(v.begin(), v.end(), [](const FieldElement& a, const FieldElement& b) {
                    return a.raw() < b.raw();
                });
                return v;
            };
            REQUIRE(sorted_coeffs(*roots) == sorted_coeffs(planted));
        }
    }
}

TEST_CASE("find_roots rejects polynomials that do not split into distinct linear factors") {
    const Field F = make_field(5, 2, 1);
    SplitMix64 rng(44);

    SECTION("repeated root") {
        const FieldElement r = F.from_int(3);
        const Poly P = poly::mul(F, poly::from_roots(F, {r}), poly::from_roots(F, {r}));
        REQUIRE_FALSE(find_roots(F, P, rng).has_value());
    }

    SECTION("irreducible factor") {
        // Find a quadratic with no roots in GF[25] (i.e. irreducible over the
        // whole field, roots only in GF[625]) by rejection over all 25 points.
        Poly quad;
        while (true) {
            quad = Poly{F.random_element(rng), F.random_element(rng), F.one()};
            bool has_root = false;
            for (uint32_t a = 0; a < 5 && !has_root; ++a)
                for (uint32_t b = 0; b < 5 && !has_root; ++b)
                    if (F.is_zero(poly::eval(F, quad, FieldElement({a, b})))) has_root = true;
            if (!has_root) break;
        }
        REQUIRE_FALSE(find_roots(F, quad, rng).has_value());
        const Poly P = poly::mul(F, quad, poly::from_roots(F, {F.from_int(2)}));
        REQUIRE_FALSE(find_roots(F, P, rng).has_value());
    }

    SECTION("characteristic two is declined beyond degree one") {
        const Field F2 = make_field(2, 3, 1);
        const Poly one_root = poly::from_roots(F2, {F2.one()});
        REQUIRE(find_roots(F2, one_root, rng).has_value());
        const Poly two_roots = poly::from_roots(F2, {F2.zero(), F2.one()});
        REQUIRE_FALSE(find_roots(F2, two_roots, rng).has_value());
    }
}

TEST_CASE("sketch recovers the leftover set exactly") {
    SplitMix64 rng(55);
    for (uint32_t d : {1u, 2u, 4u, 8u, 16u}) {
        PowerSumSketch sk(d, 1u << 20);
        const auto ids = distinct_ids(rng, 1u << 20, d);
        // Bury the stragglers in matched insert/delete noise.
        const auto noise = distinct_ids(rng, 1u << 20, 50);
        for (uint64_t x : noise) sk.insert(x);
        for (uint64_t x : ids) sk.insert(x);
        for (uint64_t x : noise) sk.remove(x);

        const auto res = sk.list_stragglers();
        REQUIRE(res.status == SketchStatus::Ok);
        REQUIRE(res.ids == ids);
        REQUIRE(sk.count_stragglers() == static_cast<int64_t>(d));

        // Decode is non-destructive and deterministic.
        const auto again = sk.list_stragglers();
        REQUIRE(again.status == SketchStatus::Ok);
        REQUIRE(again.ids == ids);
    }
}

TEST_CASE("fewer than d stragglers and the empty sketch decode fine") {
    PowerSumSketch sk(8, 999);
    REQUIRE(sk.list_stragglers().status == SketchStatus::Ok);
    REQUIRE(sk.list_stragglers().ids.empty());
    sk.insert(17);
    sk.insert(3);
    const auto res = sk.list_stragglers();
    REQUIRE(res.status == SketchStatus::Ok);
    REQUIRE(res.ids == std::vector<uint64_t>{3, 17});
}

TEST_CASE("insert and remove are exact inverses on the state") {
    PowerSumSketch sk(4, 1000);
    const PowerSumSketch before = sk;
    sk.insert(123);
    sk.insert(456);
    REQUIRE(!(sk == before));
    sk.remove(456);
    sk.remove(123);
    REQUIRE(sk == before);
    REQUIRE(sk.serialize() == before.serialize());
}

TEST_CASE("sketch state is order-independent") {
    const std::vector<uint64_t> ids{9, 2, 77, 500};
    PowerSumSketch a(4, 1000), b(4, 1000);
    for (uint64_t x : ids) a.insert(x);
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) {
        b.insert(*it);
    }
    REQUIRE(a == b);
    REQUIRE(a.serialize() == b.serialize());
}

TEST_CASE("sketch failure taxonomy") {
    SECTION("overflow: more than d net members") {
        PowerSumSketch sk(4, 1000);
        for (uint64_t x : {1ull, 2ull, 3ull, 4ull, 5ull}) sk.insert(x);
        REQUIRE(sk.list_stragglers().status == SketchStatus::Overflow);
        sk.remove(5);  // back inside capacity
        REQUIRE(sk.list_stragglers().status == SketchStatus::Ok);
    }

    SECTION("negative count: deletes outnumber inserts") {
        PowerSumSketch sk(4, 1000);
        sk.remove(7);
        REQUIRE(sk.list_stragglers().status == SketchStatus::DecodeFailure);
    }

    SECTION("false deletion is detected, not tolerated") {
        PowerSumSketch sk(4, 1000);
        sk.insert(1);
        sk.insert(2);
        sk.insert(3);
        sk.remove(999);  // never inserted
        const auto res = sk.list_stragglers();
        REQUIRE(res.status == SketchStatus::DecodeFailure);
        REQUIRE(res.ids.empty());
    }

    SECTION("duplicate insert decodes as failure, never a wrong list") {
        PowerSumSketch sk(4, 1000);
        sk.insert(42);
        sk.insert(42);
        REQUIRE(sk.list_stragglers().status == SketchStatus::DecodeFailure);
    }

    SECTION("identifiers beyond n are rejected at the boundary") {
        PowerSumSketch sk(4, 1000);
        REQUIRE_NOTHROW(sk.insert(1000));
        REQUIRE_THROWS_AS(sk.insert(1001), IdentifierOutOfRange);
    }
}

TEST_CASE("combine equals the sketch of the concatenated streams") {
    SplitMix64 rng(66);
    PowerSumSketch a(8, 100000), b(8, 100000), whole(8, 100000);
    const auto xs = distinct_ids(rng, 100000, 40);
    for (std::size_t i = 0; i < xs.size(); ++i) {
        (i % 2 ? a : b).insert(xs[i]);
        whole.insert(xs[i]);
    }
    // Knock most of them back out across shards; leftovers split arbitrarily.
    for (std::size_t i = 0; i < 34; ++i) {
        (i % 3 ? b : a).remove(xs[i]);
        whole.remove(xs[i]);
    }
    a.combine(b);
    REQUIRE(a == whole);
    const auto res = a.list_stragglers();
    REQUIRE(res.status == SketchStatus::Ok);
    REQUIRE(res.ids == std::vector<uint64_t>(xs.begin() + 34, xs.end()));

    SECTION("mismatched parameters refuse to combine") {
        PowerSumSketch other_d(4, 100000);
        PowerSumSketch other_n(8, 99999);
        REQUIRE_THROWS_AS(a.combine(other_d), ParamsMismatch);
        REQUIRE_THROWS_AS(a.combine(other_n), ParamsMismatch);
    }
}

TEST_CASE("sketch serialization round-trips bit-exactly") {
    SplitMix64 rng(77);
    for (int iter = 0; iter < 20; ++iter) {
        PowerSumSketch sk(1 + static_cast<uint32_t>(rng.below(16)), 1 + rng.below(1u << 20));
        const std::size_t ops = rng.below(30);
        for (std::size_t i = 0; i < ops; ++i) {
            const uint64_t x = rng.below(sk.n_bound() + 1);
            if (rng.below(3) == 0)
                sk.remove(x);
            else
                sk.insert(x);
        }
        const auto bytes = sk.serialize();
        const PowerSumSketch back = PowerSumSketch::deserialize(bytes);
        REQUIRE(back == sk);
        REQUIRE(back.serialize() == bytes);
        REQUIRE(back.list_stragglers().status == sk.list_stragglers().status);
    }

    SECTION("malformed input is rejected") {
        PowerSumSketch sk(4, 1000);
        auto bytes = sk.serialize();
        auto bad_version = bytes;
        bad_version[0] = 0xFF;
        REQUIRE_THROWS_AS(PowerSumSketch::deserialize(bad_version), ParseError);
        auto truncated = bytes;
        truncated.pop_back();
        REQUIRE_THROWS_AS(PowerSumSketch::deserialize(truncated), ParseError);
        auto padded = bytes;
        padded.push_back(0);
        REQUIRE_THROWS_AS(PowerSumSketch::deserialize(padded), ParseError);
    }
}

TEST_CASE("decode is a pure function of the serialized state") {
    // Two sketches that arrive at the same state by different op orders must
    // produce identical decode results (the internal randomness is derived
    // from the state, not from a global generator).
    PowerSumSketch a(8, 4095), b(8, 4095);
    const std::vector<uint64_t> ids{1, 2000, 3, 4000, 5, 600, 7, 80};
    for (uint64_t x : ids) a.insert(x);
    for (auto it = ids.rbegin(); it != ids.rend(); ++it) b.insert(*it);
    const auto ra = a.list_stragglers();
    const auto rb = b.list_stragglers();
    REQUIRE(ra.status == SketchStatus::Ok);
    REQUIRE(ra.status == rb.status);
    REQUIRE(ra.ids == rb.ids);
}
