#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "straggler/errors.hpp"
#include "straggler/ibf.hpp"
#include "straggler/power_sum_sketch.hpp"
#include "straggler/reconcile.hpp"
#include "straggler/rng.hpp"

namespace straggler {

// ---------------------------------------------------------------------------
// Op streams: the replayable text format. Header "n=<bound> d=<bound>", then
// one op per line: "+ <id>", "- <id>", or "?". Blank lines and #-comments are
// skipped.
// ---------------------------------------------------------------------------

struct Op {
    enum class Kind : uint8_t { Insert, Delete, Query } kind;
    uint64_t id = 0;
};

struct OpStream {
    uint64_t n_bound = 0;
    uint32_t d = 0;
    std::vector<Op> ops;

    static OpStream parse(std::istream& in) {
        OpStream stream;
        std::string line;
        std::size_t lineno = 0;
        bool have_header = false;
        while (std::getline(in, line)) {
            ++lineno;
            const std::string trimmed = trim(line);
            if (trimmed.empty() || trimmed[0] == '#') continue;
            if (!have_header) {
                parse_header(trimmed, lineno, stream);
                have_header = true;
                continue;
            }
            stream.ops.push_back(parse_op(trimmed, lineno, stream.n_bound));
        }
        if (!have_header) throw ParseError("missing header line \"n=<bound> d=<bound>\"", 1);
        return stream;
    }

    static OpStream parse(const std::string& text) {
        std::istringstream in(text);
        return parse(in);
    }

    std::string to_text() const {
        std::string out = "n=" + std::to_string(n_bound) + " d=" + std::to_string(d) + "\n";
        for (const Op& op : ops) {
            switch (op.kind) {
                case Op::Kind::Insert: out += "+ " + std::to_string(op.id) + "\n"; break;
                case Op::Kind::Delete: out += "- " + std::to_string(op.id) + "\n"; break;
                case Op::Kind::Query: out += "?\n"; break;
            }
        }
        return out;
    }

private:
    static std::string trim(const std::string& s) {
        const auto first = s.find_first_not_of(" \t\r");
        if (first == std::string::npos) return "";
        const auto last = s.find_last_not_of(" \t\r");
        return s.substr(first, last - first + 1);
    }

    static uint64_t parse_u64(const std::string& tok, std::size_t lineno, const char* what) {
        if (tok.empty() || tok.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError(std::string("expected nonnegative integer for ") + what + ", got \"" +
                                 tok + "\"",
                             lineno);
        try {
            return std::stoull(tok);
        } catch (const std::out_of_range&) {
            throw ParseError(std::string(what) + " out of range: \"" + tok + "\"", lineno);
        }
    }

    static void parse_header(const std::string& line, std::size_t lineno, OpStream& out) {
        std::istringstream ss(line);
        std::string ntok, dtok, extra;
        ss >> ntok >> dtok;
        if (ss >> extra || ntok.rfind("n=", 0) != 0 || dtok.rfind("d=", 0) != 0)
            throw ParseError("header must be \"n=<bound> d=<bound>\", got \"" + line + "\"", lineno);
        out.n_bound = parse_u64(ntok.substr(2), lineno, "n");
        out.d = static_cast<uint32_t>(parse_u64(dtok.substr(2), lineno, "d"));
    }

    static Op parse_op(const std::string& line, std::size_t lineno, uint64_t n_bound) {
        std::istringstream ss(line);
        std::string head, idtok, extra;
        ss >> head;
        if (head == "?") {
            if (ss >> extra) throw ParseError("query takes no argument", lineno);
            return {Op::Kind::Query, 0};
        }
        if (head != "+" && head != "-")
            throw ParseError("unknown op \"" + head + "\" (want +, -, or ?)", lineno);
        if (!(ss >> idtok)) throw ParseError("missing identifier after " + head, lineno);
        if (ss >> extra) throw ParseError("trailing token \"" + extra + "\"", lineno);
        const uint64_t id = parse_u64(idtok, lineno, "identifier");
        if (id > n_bound)
            throw ParseError("identifier " + std::to_string(id) + " exceeds declared n=" +
                                 std::to_string(n_bound),
                             lineno);
        return {head == "+" ? Op::Kind::Insert : Op::Kind::Delete, id};
    }
};

/// Replays a stream through a sketch; one result per query op.
inline std::vector<SketchDecodeResult> run_stream(PowerSumSketch& sk, const OpStream& stream) {
    std::vector<SketchDecodeResult> out;
    for (const Op& op : stream.ops) {
        switch (op.kind) {
            case Op::Kind::Insert: sk.insert(op.id); break;
            case Op::Kind::Delete: sk.remove(op.id); break;
            case Op::Kind::Query: out.push_back(sk.list_stragglers()); break;
        }
    }
    return out;
}

/// Replays a stream through an IBF; one result per query op.
inline std::vector<DecodeResult> run_stream(InvertibleBloomFilter& f, const OpStream& stream,
                                            const DecodeOptions& opts = {}) {
    std::vector<DecodeResult> out;
    for (const Op& op : stream.ops) {
        switch (op.kind) {
            case Op::Kind::Insert: f.insert(op.id); break;
            case Op::Kind::Delete: f.remove(op.id); break;
            case Op::Kind::Query: out.push_back(f.list_stragglers(opts)); break;
        }
    }
    return out;
}

namespace detail {

/// Runs `trials` jobs on `threads` workers into a position-indexed result
/// vector, so aggregation order (and hence every report) is independent of
/// the thread count.
template <typename R, typename Fn>
std::vector<R> run_trials(uint32_t trials, uint32_t threads, Fn&& trial_fn) {
    std::vector<R> results(trials);
    if (threads <= 1) {
        for (uint32_t t = 0; t < trials; ++t) results[t] = trial_fn(t);
        return results;
    }
    std::atomic<uint32_t> next{0};
    auto worker = [&] {
        for (;;) {
            const uint32_t t = next.fetch_add(1);
            if (t >= trials) return;
            results[t] = trial_fn(t);
        }
    };
    std::vector<std::thread> pool;
    const uint32_t spawn = std::min(threads, trials ? trials : 1u);
    pool.reserve(spawn);
    for (uint32_t i = 0; i < spawn; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

struct RunningStats {
    double mean = 0.0;
    double stddev = 0.0;  // sample standard deviation
};

inline RunningStats stats_of(const std::vector<uint32_t>& xs) {
    RunningStats s;
    if (xs.empty()) return s;
    double sum = 0;
    for (uint32_t v : xs) sum += v;
    s.mean = sum / xs.size();
    if (xs.size() > 1) {
        double ss = 0;
        for (uint32_t v : xs) ss += (v - s.mean) * (v - s.mean);
        s.stddev = std::sqrt(ss / (xs.size() - 1));
    }
    return s;
}

/// Draws a fresh identifier not yet in `used`.
inline uint64_t fresh_id(SplitMix64& rng, uint64_t n_bound, std::set<uint64_t>& used) {
    for (;;) {
        const uint64_t x = rng.below(n_bound + 1);
        if (used.insert(x).second) return x;
    }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Saturation experiment: per trial, insert fresh random ids one at a time and
// decode after each; the saturation point is the largest count that still
// decoded fully (i.e. inserts before the first failure).
// ---------------------------------------------------------------------------

struct SaturateOptions {
    uint32_t cells = 101;
    uint32_t k = 4;
    uint32_t trials = 1000;
    bool with_fallback = false;
    HashMode mode = HashMode::Replication;
    uint64_t seed = 0;
    uint64_t n_bound = 0;  // 0: mode default (4095 replication, 2^20-1 default)
    uint32_t threads = 1;
};

struct SaturationReport {
    SaturateOptions options;
    std::vector<uint32_t> points;  // one per trial, in trial order
    double mean = 0.0;
    double stddev = 0.0;

    std::map<uint32_t, uint32_t> histogram() const {
        std::map<uint32_t, uint32_t> h;
        for (uint32_t p : points) ++h[p];
        return h;
    }

    /// CSV rows "bucket,frequency", ascending buckets, with a header row.
    std::string histogram_csv() const {
        std::string out = "bucket,frequency\n";
        for (const auto& [bucket, freq] : histogram())
            out += std::to_string(bucket) + "," + std::to_string(freq) + "\n";
        return out;
    }

    bool operator==(const SaturationReport& other) const {
        return points == other.points;  // mean/std derive from points
    }
};

inline SaturationReport saturate(const SaturateOptions& options) {
    SaturateOptions opts = options;
    if (opts.n_bound == 0)
        opts.n_bound = opts.mode == HashMode::Replication ? 4095 : (uint64_t{1} << 20) - 1;

    IbfParams params;
    params.d = opts.cells;  // d is not exercised here; keep the invariant d>=1
    params.hash.k = opts.k;
    params.hash.m = opts.cells;
    params.hash.n_bound = opts.n_bound;
    params.hash.seed = expand_seed(opts.seed);
    params.hash.mode = opts.mode;
    if (opts.mode == HashMode::Replication) {
        params.w_count = 16;
        params.w_id = 16;
        params.w_hash = 32;
    }
    params.validate();

    auto trial_fn = [&](uint32_t t) -> uint32_t {
        SplitMix64 rng(derive_seed(opts.seed, 1 + t));
        InvertibleBloomFilter f(params);
        std::set<uint64_t> inserted;
        const DecodeOptions decode_opts{.use_fallback = opts.with_fallback};
        uint32_t count = 0;
        while (count <= opts.n_bound) {  // distinct ids bound the trial
            f.insert(detail::fresh_id(rng, opts.n_bound, inserted));
            ++count;
            const DecodeResult r = f.list_stragglers(decode_opts);
            if (!r.complete() || r.recovered.size() != inserted.size()) break;
            bool exact = true;
            for (const auto& [x, mult] : r.recovered)
                if (mult != 1 || !inserted.count(x)) {
                    exact = false;
                    break;
                }
            if (!exact) break;
        }
        return count - 1;  // inserts before the first failure
    };

    SaturationReport report;
    report.options = opts;
    report.points = detail::run_trials<uint32_t>(opts.trials, opts.threads, trial_fn);
    const auto stats = detail::stats_of(report.points);
    report.mean = stats.mean;
    report.stddev = stats.stddev;
    return report;
}

// ---------------------------------------------------------------------------
// Failure-rate estimator: default-sized structures (m = 4dk) loaded with
// random streams whose net anomalies (leftover inserts and false deletions)
// number at most d, decoded once; reports the empirical failure fraction.
// ---------------------------------------------------------------------------

enum class AnomalyMix : uint8_t {
    Mixed = 0,        // each anomaly is a straggler or a false deletion at random
    InsertsOnly = 1,  // anomalies are all stragglers
    DeletesOnly = 2,  // anomalies are all false deletions
    None = 3,         // no anomalies: decode must find nothing
};

inline const char* to_string(AnomalyMix m) {
    switch (m) {
        case AnomalyMix::Mixed: return "mixed";
        case AnomalyMix::InsertsOnly: return "inserts-only";
        case AnomalyMix::DeletesOnly: return "deletes-only";
        default: return "none";
    }
}

struct FailureRateOptions {
    uint32_t d = 8;
    uint32_t eps_num = 1;
    uint32_t eps_den = 16;
    uint32_t trials = 2000;
    AnomalyMix mix = AnomalyMix::Mixed;
    uint64_t n_bound = (uint64_t{1} << 20) - 1;
    uint64_t seed = 0;
    uint32_t max_pairs = 200;  // background matched insert/delete pairs per trial
    uint32_t threads = 1;
};

struct FailureRateReport {
    FailureRateOptions options;
    std::vector<uint8_t> outcomes;  // per trial: 1 = failed, 0 = exact
    uint32_t failures = 0;
    double fraction = 0.0;
    double sigma = 0.0;     // binomial standard error of the fraction
    double ci_low = 0.0;    // 95% normal-approximation interval, clamped
    double ci_high = 0.0;

    bool operator==(const FailureRateReport& other) const { return outcomes == other.outcomes; }
};

inline FailureRateReport failure_rate(const FailureRateOptions& opts) {
    auto trial_fn = [&](uint32_t t) -> uint8_t {
        // Fresh hash functions each trial: the failure probability is over
        // the hash draw, not the stream alone.
        const uint64_t hash_seed = derive_seed(opts.seed, 2 * uint64_t{t});
        SplitMix64 rng(derive_seed(opts.seed, 2 * uint64_t{t} + 1));
        const IbfParams params = IbfParams::with_defaults(opts.d, opts.eps_num, opts.eps_den,
                                                          opts.n_bound, hash_seed);
        InvertibleBloomFilter f(params);

        std::set<uint64_t> used;
        std::map<uint64_t, int64_t> expected;

        const uint32_t anomalies =
            opts.mix == AnomalyMix::None ? 0 : static_cast<uint32_t>(rng.below(opts.d + 1));
        for (uint32_t i = 0; i < anomalies; ++i) {
            const uint64_t x = detail::fresh_id(rng, opts.n_bound, used);
            bool straggler = true;
            if (opts.mix == AnomalyMix::DeletesOnly)
                straggler = false;
            else if (opts.mix == AnomalyMix::Mixed)
                straggler = rng.below(2) == 0;
            if (straggler) {
                f.insert(x);
                expected[x] = 1;
            } else {
                f.remove(x);
                expected[x] = -1;
            }
        }

        // Matched pairs: churn that must cancel exactly.
        const uint32_t pairs =
            opts.max_pairs ? static_cast<uint32_t>(rng.below(opts.max_pairs + 1)) : 0;
        for (uint32_t i = 0; i < pairs; ++i) {
            const uint64_t x = detail::fresh_id(rng, opts.n_bound, used);
            f.insert(x);
            f.remove(x);
        }

        const DecodeResult r = f.list_stragglers();
        const bool ok = r.complete() && r.recovered == expected;
        return ok ? 0 : 1;
    };

    FailureRateReport report;
    report.options = opts;
    report.outcomes = detail::run_trials<uint8_t>(opts.trials, opts.threads, trial_fn);
    for (uint8_t o : report.outcomes) report.failures += o;
    if (opts.trials > 0) {
        report.fraction = static_cast<double>(report.failures) / opts.trials;
        report.sigma = std::sqrt(report.fraction * (1.0 - report.fraction) / opts.trials);
        report.ci_low = std::max(0.0, report.fraction - 1.96 * report.sigma);
        report.ci_high = std::min(1.0, report.fraction + 1.96 * report.sigma);
    }
    return report;
}

}  // namespace straggler
