#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "straggler/bytes.hpp"
#include "straggler/errors.hpp"
#include "straggler/hashing.hpp"

namespace straggler {

/// One cell: three wrap-around two's-complement accumulators of configurable
/// width. Stored as raw uint64_t masked to the declared widths; signedness is
/// applied on read (sign extension).
struct IbfCell {
    uint64_t count = 0;
    uint64_t id_sum = 0;
    uint64_t hash_sum = 0;

    bool operator==(const IbfCell&) const = default;
    bool is_zero() const { return count == 0 && id_sum == 0 && hash_sum == 0; }
};

struct IbfParams {
    uint32_t d = 1;
    uint32_t eps_num = 1;   // epsilon as an exact rational in (0, 1/4)
    uint32_t eps_den = 16;
    uint8_t w_count = 64;   // cell field widths, bits (multiples of 8)
    uint8_t w_id = 64;
    uint8_t w_hash = 64;
    HashConfig hash;        // carries k, m, n_bound, seed, mode

    uint32_t k() const { return hash.k; }
    uint32_t m() const { return hash.m; }
    uint64_t n_bound() const { return hash.n_bound; }

    bool operator==(const IbfParams&) const = default;

    /// Failure-bound sizing: k = ceil(log2(1/eps)), m = 4dk. Widths are
    /// 64/64/64 in default mode; replication mode pins the historical 16-bit
    /// count/idSum and 32-bit hashSum (callers should keep ids below 2^12
    /// there so in-contract sums cannot wrap).
    static IbfParams with_defaults(uint32_t d, uint32_t eps_num, uint32_t eps_den, uint64_t n,
                                   uint64_t seed, HashMode mode = HashMode::Default) {
        IbfParams p;
        p.d = d;
        p.eps_num = eps_num;
        p.eps_den = eps_den;
        uint32_t k = 1;
        while ((uint64_t{1} << k) * eps_num < eps_den) ++k;  // smallest k with 2^k >= 1/eps
        p.hash.k = k;
        p.hash.m = 4 * d * k;
        p.hash.n_bound = n;
        p.hash.seed = expand_seed(seed);
        p.hash.mode = mode;
        if (mode == HashMode::Replication) {
            p.w_count = 16;
            p.w_id = 16;
            p.w_hash = 32;
        }
        return p;
    }

    void validate() const {
        if (d < 1) throw std::invalid_argument("IbfParams: d must be >= 1");
        if (eps_num < 1 || 4ull * eps_num >= eps_den)
            throw std::invalid_argument("IbfParams: epsilon must lie in (0, 1/4)");
        if (hash.k < 1 || hash.m < 1) throw std::invalid_argument("IbfParams: k and m must be >= 1");
        if (hash.k > 65535) throw std::invalid_argument("IbfParams: k exceeds wire-format limit");
        for (uint8_t w : {w_count, w_id, w_hash})
            if (w == 0 || w > 64 || w % 8 != 0)
                throw std::invalid_argument("IbfParams: widths must be multiples of 8 in [8, 64]");
    }
};

enum class DecodeStatus : uint8_t { Complete = 0, Incomplete = 1 };

inline const char* to_string(DecodeStatus s) {
    return s == DecodeStatus::Complete ? "complete" : "incomplete";
}

/// Decode output: net signed multiplicities (positive = leftover insert,
/// negative = false deletion), zero entries elided. Complete means peeling
/// emptied every cell of both tables and the global count.
struct DecodeResult {
    std::map<uint64_t, int64_t> recovered;
    DecodeStatus status = DecodeStatus::Incomplete;

    bool complete() const { return status == DecodeStatus::Complete; }
};

struct DecodeOptions {
    bool use_fallback = true;  // peel table C after B (the two-table decoder)
};

namespace detail {

inline uint64_t width_mask(uint8_t w) { return w == 64 ? ~uint64_t{0} : (uint64_t{1} << w) - 1; }

inline int64_t sign_extend(uint64_t v, uint8_t w) {
    if (w == 64) return static_cast<int64_t>(v);
    const uint64_t sign_bit = uint64_t{1} << (w - 1);
    return static_cast<int64_t>((v ^ sign_bit)) - static_cast<int64_t>(sign_bit);
}

}  // namespace detail

/// Invertible Bloom filter: table B indexed by h_1..h_k plus fallback table C
/// indexed by f_1, f_2, all cells (count, idSum, hashSum) under wrap-around
/// arithmetic, plus a global signed count. Supports false deletions; decoding
/// lists the net signed multiset when few anomalies remain.
class InvertibleBloomFilter {
public:
    static constexpr uint16_t kFormatVersion = 1;
    static constexpr char kMagic[4] = {'I', 'B', 'F', '1'};

    explicit InvertibleBloomFilter(IbfParams params)
        : params_(std::move(params)), b_(params_.m()), c_(params_.m()) {
        params_.validate();
    }

    const IbfParams& params() const { return params_; }
    int64_t global_count() const { return global_count_; }
    std::span<const IbfCell> table_b() const { return b_; }
    std::span<const IbfCell> table_c() const { return c_; }

    bool all_zero() const {
        if (global_count_ != 0) return false;
        for (const auto& cell : b_)
            if (!cell.is_zero()) return false;
        for (const auto& cell : c_)
            if (!cell.is_zero()) return false;
        return true;
    }

    void insert(uint64_t x) { apply(x, +1); }
    void remove(uint64_t x) { apply(x, -1); }

    /// Signed purity probe: (x, multiplicity) iff count != 0, count divides
    /// idSum with quotient x in [0, n], count divides hashSum, and
    /// g(x)*count == hashSum under the cell's wrap arithmetic.
    std::optional<std::pair<uint64_t, int64_t>> is_pure(const IbfCell& cell) const {
        const int64_t cnt = detail::sign_extend(cell.count, params_.w_count);
        if (cnt == 0) return std::nullopt;
        const __int128 count = cnt;
        const __int128 ids = detail::sign_extend(cell.id_sum, params_.w_id);
        if (ids % count != 0) return std::nullopt;
        const __int128 q = ids / count;
        if (q < 0 || q > static_cast<__int128>(params_.n_bound())) return std::nullopt;
        const __int128 hs = detail::sign_extend(cell.hash_sum, params_.w_hash);
        if (hs % count != 0) return std::nullopt;
        const uint64_t x = static_cast<uint64_t>(q);
        // Wrap-multiply re-check: robust even when the sums overflowed.
        const uint64_t expect =
            (check_hash(params_.hash, x) * static_cast<uint64_t>(cnt)) &
            detail::width_mask(params_.w_hash);
        if (expect != cell.hash_sum) return std::nullopt;
        return std::make_pair(x, cnt);
    }

    /// Peeling decoder. Phase 1 peels B; phase 2 (if enabled and needed)
    /// peels C. Recovered items are removed (scaled by multiplicity) as they
    /// are found and restored once at the end, leaving the structure
    /// bit-identical. Status is Complete iff peeling emptied everything.
    DecodeResult list_stragglers(const DecodeOptions& opts = {}) {
        DecodeResult result;

        // The peel stack below stores pointers into the memo, so trim it only
        // here, never while a decode is in flight.
        if (memo_.size() > (1u << 20)) memo_.clear();

        // Termination budget: peeling can extract at most the total count
        // mass; the extra m absorbs wrap-induced miscounts.
        uint64_t budget = params_.m();
        auto abs_count = [this](const IbfCell& cell) {
            const int64_t c = detail::sign_extend(cell.count, params_.w_count);
            return static_cast<uint64_t>(c < 0 ? -c : c);
        };
        for (const auto& cell : b_) budget += abs_count(cell);
        for (const auto& cell : c_) budget += abs_count(cell);

        struct Peeled {
            const CachedHashes* hashes;
            int64_t mult;
        };
        std::vector<Peeled> stack;

        auto peel_pass = [&](std::vector<IbfCell>& table, Table which) {
            bool progress = false;
            for (uint32_t idx = 0; idx < params_.m() && budget > 0; ++idx) {
                auto pure = is_pure(table[idx]);
                if (!pure) continue;
                const auto [x, cell_mult] = *pure;
                const CachedHashes& hs = hashes_for(x);
                // Sanity check: the candidate must hash to the revealing
                // cell; a g-collision ghost usually does not. An item may
                // hash here through r > 1 of its functions, in which case
                // the cell count is r times the item's multiplicity.
                const int64_t r = occurrences(hs, which, idx);
                if (r == 0 || cell_mult % r != 0) continue;
                const int64_t mult = cell_mult / r;
                scaled_apply(hs, -mult);
                stack.push_back({&hs, mult});
                --budget;
                progress = true;
            }
            return progress;
        };

        // Removing an item updates both tables, so a peel from C can expose
        // new pure cells in B and vice versa: alternate full passes until a
        // whole round makes no progress (or the budget runs out).
        while (budget > 0) {
            bool progress = false;
            while (peel_pass(b_, Table::B)) progress = true;
            if (opts.use_fallback && !all_zero())
                while (peel_pass(c_, Table::C)) progress = true;
            if (!progress) break;
        }

        result.status = all_zero() ? DecodeStatus::Complete : DecodeStatus::Incomplete;

        // Net multiplicities; a self-colliding id can surface in several peel
        // events whose contributions sum to the true value.
        for (const Peeled& item : stack) result.recovered[item.hashes->x] += item.mult;
        std::erase_if(result.recovered, [](const auto& kv) { return kv.second == 0; });

        for (const Peeled& item : stack) scaled_apply(*item.hashes, item.mult);  // restore
        return result;
    }

    /// Cellwise wrap-around sum: the state of the concatenated update streams.
    InvertibleBloomFilter merged(const InvertibleBloomFilter& other) const {
        check_params(other);
        InvertibleBloomFilter out(*this);
        for (uint32_t i = 0; i < params_.m(); ++i) {
            cell_accumulate(out.b_[i], other.b_[i], /*negate=*/false);
            cell_accumulate(out.c_[i], other.c_[i], /*negate=*/false);
        }
        out.global_count_ += other.global_count_;
        return out;
    }

    /// Cellwise wrap-around difference: this stream minus the other stream.
    InvertibleBloomFilter subtracted(const InvertibleBloomFilter& other) const {
        check_params(other);
        InvertibleBloomFilter out(*this);
        for (uint32_t i = 0; i < params_.m(); ++i) {
            cell_accumulate(out.b_[i], other.b_[i], /*negate=*/true);
            cell_accumulate(out.c_[i], other.c_[i], /*negate=*/true);
        }
        out.global_count_ -= other.global_count_;
        return out;
    }

    std::vector<uint8_t> serialize() const {
        ByteWriter w;
        w.raw(reinterpret_cast<const uint8_t*>(kMagic), 4);
        w.u16(kFormatVersion);
        w.u32(params_.d);
        w.u32(params_.eps_num);
        w.u32(params_.eps_den);
        w.u16(static_cast<uint16_t>(params_.hash.k));
        w.u32(params_.hash.m);
        w.u64(params_.hash.n_bound);
        w.u8(params_.w_count);
        w.u8(params_.w_id);
        w.u8(params_.w_hash);
        w.u8(static_cast<uint8_t>(params_.hash.mode));
        w.raw(params_.hash.seed.data(), params_.hash.seed.size());
        for (const auto* table : {&b_, &c_})
            for (const IbfCell& cell : *table) {
                w.uint_le(cell.count, params_.w_count / 8);
                w.uint_le(cell.id_sum, params_.w_id / 8);
                w.uint_le(cell.hash_sum, params_.w_hash / 8);
            }
        w.i64(global_count_);
        return w.take();
    }

    static InvertibleBloomFilter deserialize(std::span<const uint8_t> bytes) {
        ByteReader r(bytes);
        char magic[4];
        r.raw(reinterpret_cast<uint8_t*>(magic), 4);
        if (std::memcmp(magic, kMagic, 4) != 0) throw ParseError("ibf: bad magic");
        const uint16_t version = r.u16();
        if (version != kFormatVersion)
            throw ParseError("ibf: unsupported format version " + std::to_string(version));
        IbfParams p;
        p.d = r.u32();
        p.eps_num = r.u32();
        p.eps_den = r.u32();
        p.hash.k = r.u16();
        p.hash.m = r.u32();
        p.hash.n_bound = r.u64();
        p.w_count = r.u8();
        p.w_id = r.u8();
        p.w_hash = r.u8();
        const uint8_t mode = r.u8();
        if (mode > 1) throw ParseError("ibf: unknown hash mode " + std::to_string(mode));
        p.hash.mode = static_cast<HashMode>(mode);
        r.raw(p.hash.seed.data(), p.hash.seed.size());
        try {
            p.validate();
        } catch (const std::invalid_argument& e) {
            throw ParseError(std::string("ibf: ") + e.what());
        }
        InvertibleBloomFilter f(std::move(p));
        const auto& q = f.params_;
        for (auto* table : {&f.b_, &f.c_})
            for (IbfCell& cell : *table) {
                cell.count = r.uint_le(q.w_count / 8);
                cell.id_sum = r.uint_le(q.w_id / 8);
                cell.hash_sum = r.uint_le(q.w_hash / 8);
            }
        f.global_count_ = r.i64();
        r.expect_end();
        return f;
    }

    bool operator==(const InvertibleBloomFilter& other) const {
        return params_ == other.params_ && b_ == other.b_ && c_ == other.c_ &&
               global_count_ == other.global_count_;
    }

private:
    /// All hash-derived facts about one identifier, computed once per decode
    /// lifetime. Decoding re-touches the same ids many times (pureness
    /// sanity, scaled removal, final restore), so this is the hot-path cache.
    struct CachedHashes {
        uint64_t x;
        uint64_t g;
        std::vector<uint32_t> b_idx;            // h_1..h_k
        std::array<uint32_t, 2> c_idx;          // f_1, f_2
    };

    const CachedHashes& hashes_for(uint64_t x) const {
        auto it = memo_.find(x);
        if (it != memo_.end()) return it->second;
        CachedHashes h;
        h.x = x;
        h.g = check_hash(params_.hash, x);
        h.b_idx.resize(params_.k());
        for (uint32_t i = 1; i <= params_.k(); ++i)
            h.b_idx[i - 1] = cell_hash(params_.hash, Table::B, i, x);
        for (uint32_t i = 1; i <= 2; ++i) h.c_idx[i - 1] = cell_hash(params_.hash, Table::C, i, x);
        return memo_.emplace(x, std::move(h)).first->second;
    }

    /// How many of the item's hash functions for `which` point at cell idx.
    static int64_t occurrences(const CachedHashes& h, Table which, uint32_t idx) {
        int64_t r = 0;
        if (which == Table::B) {
            for (uint32_t e : h.b_idx) r += e == idx;
        } else {
            for (uint32_t e : h.c_idx) r += e == idx;
        }
        return r;
    }

    void cell_add(IbfCell& cell, int64_t mult, uint64_t x, uint64_t g) const {
        const uint64_t m = static_cast<uint64_t>(mult);
        cell.count = (cell.count + m) & detail::width_mask(params_.w_count);
        cell.id_sum = (cell.id_sum + m * x) & detail::width_mask(params_.w_id);
        cell.hash_sum = (cell.hash_sum + m * g) & detail::width_mask(params_.w_hash);
    }

    void apply(uint64_t x, int64_t mult) {
        if (x > params_.n_bound())
            throw IdentifierOutOfRange("ibf: " + std::to_string(x) + " > n=" +
                                       std::to_string(params_.n_bound()));
        // Bulk-load path: hash directly, bypassing the decode memo.
        const uint64_t g = check_hash(params_.hash, x);
        for (uint32_t i = 1; i <= params_.k(); ++i)
            cell_add(b_[cell_hash(params_.hash, Table::B, i, x)], mult, x, g);
        for (uint32_t i = 1; i <= 2; ++i)
            cell_add(c_[cell_hash(params_.hash, Table::C, i, x)], mult, x, g);
        global_count_ += mult;
    }

    /// One update scaled by mult through cached indices (decode hot path).
    void scaled_apply(const CachedHashes& h, int64_t mult) {
        for (uint32_t idx : h.b_idx) cell_add(b_[idx], mult, h.x, h.g);
        for (uint32_t idx : h.c_idx) cell_add(c_[idx], mult, h.x, h.g);
        global_count_ += mult;
    }

    void check_params(const InvertibleBloomFilter& other) const {
        if (!(params_ == other.params_))
            throw ParamsMismatch("ibf: structures built with different parameters");
    }

    void cell_accumulate(IbfCell& dst, const IbfCell& src, bool negate) const {
        const uint64_t cm = detail::width_mask(params_.w_count);
        const uint64_t im = detail::width_mask(params_.w_id);
        const uint64_t hm = detail::width_mask(params_.w_hash);
        if (negate) {
            dst.count = (dst.count - src.count) & cm;
            dst.id_sum = (dst.id_sum - src.id_sum) & im;
            dst.hash_sum = (dst.hash_sum - src.hash_sum) & hm;
        } else {
            dst.count = (dst.count + src.count) & cm;
            dst.id_sum = (dst.id_sum + src.id_sum) & im;
            dst.hash_sum = (dst.hash_sum + src.hash_sum) & hm;
        }
    }

    IbfParams params_;
    std::vector<IbfCell> b_;
    std::vector<IbfCell> c_;
    int64_t global_count_ = 0;
    mutable std::unordered_map<uint64_t, CachedHashes> memo_;
};

/// Serialized size in bytes for a given parameter set (communication volume
/// is a function of params only).
inline std::size_t serialized_size(const IbfParams& p) {
    const std::size_t header = 4 + 2 + 4 + 4 + 4 + 2 + 4 + 8 + 3 + 1 + 16;
    const std::size_t cell = std::size_t{p.w_count} / 8 + p.w_id / 8 + p.w_hash / 8;
    return header + 2 * std::size_t{p.m()} * cell + 8;
}

}  // namespace straggler
