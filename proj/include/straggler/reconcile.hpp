#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "straggler/errors.hpp"
#include "straggler/ibf.hpp"

namespace straggler {

/// Outcome of one reconciliation: the split symmetric difference, or Failure
/// when the decode was incomplete (caller's recourse: retry with larger d/m).
struct ReconcileDiff {
    std::vector<uint64_t> remote_only;  // in the encoded remote set, not ours
    std::vector<uint64_t> local_only;   // in ours, not the remote set
    bool ok = false;
};

/// Party A's message: its whole set loaded into one filter. Elements must be
/// distinct and within [0, n_bound].
inline InvertibleBloomFilter encode_set(const IbfParams& params, std::span<const uint64_t> set) {
    InvertibleBloomFilter f(params);
    for (uint64_t x : set) f.insert(x);
    return f;
}

/// Party B's step: delete every local element from a working copy of the
/// remote filter (equivalent to subtracting encode(local)) and decode what
/// remains. Positive multiplicities are remote-only ids, negative local-only.
inline ReconcileDiff diff_decode(InvertibleBloomFilter remote, std::span<const uint64_t> local_set) {
    for (uint64_t x : local_set) remote.remove(x);
    const DecodeResult decoded = remote.list_stragglers();

    ReconcileDiff diff;
    if (!decoded.complete()) return diff;
    for (const auto& [x, mult] : decoded.recovered) {
        // Sets in, sets out: any |multiplicity| != 1 means the inputs were
        // not sets (or a hash collision fooled the decoder); refuse rather
        // than emit something unrepresentable.
        if (mult == 1)
            diff.remote_only.push_back(x);
        else if (mult == -1)
            diff.local_only.push_back(x);
        else
            return ReconcileDiff{};
    }
    diff.ok = true;
    return diff;
}

/// One-shot session report: A encodes, bytes travel, B checks the header
/// matches its expected parameters, subtracts, decodes.
struct SessionReport {
    std::size_t size_a = 0;
    std::size_t size_b = 0;
    std::size_t bytes_transferred = 0;
    ReconcileDiff diff;
};

inline SessionReport session_roundtrip(std::span<const uint64_t> set_a,
                                       std::span<const uint64_t> set_b, const IbfParams& params) {
    SessionReport report;
    report.size_a = set_a.size();
    report.size_b = set_b.size();

    const std::vector<uint8_t> wire = encode_set(params, set_a).serialize();
    report.bytes_transferred = wire.size();

    InvertibleBloomFilter received = InvertibleBloomFilter::deserialize(wire);
    if (!(received.params() == params))
        throw ParamsMismatch("reconcile: received header disagrees with local parameters");
    report.diff = diff_decode(std::move(received), set_b);
    return report;
}

}  // namespace straggler
