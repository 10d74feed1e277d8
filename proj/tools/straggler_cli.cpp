// Command-line harness: replays op streams through either structure, runs the
// saturation and failure-rate experiments, and drives reconciliation
// sessions. Query results and session reports are emitted as JSON lines;
// histograms as CSV. Any structural or parse error exits nonzero.

#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "straggler/harness.hpp"

using json = nlohmann::ordered_json;
using namespace straggler;

namespace {

HashMode parse_mode(const std::string& s) {
    if (s == "default") return HashMode::Default;
    if (s == "replication") return HashMode::Replication;
    throw CLI::ValidationError("--mode", "must be 'default' or 'replication'");
}

AnomalyMix parse_mix(const std::string& s) {
    if (s == "mixed") return AnomalyMix::Mixed;
    if (s == "inserts-only") return AnomalyMix::InsertsOnly;
    if (s == "deletes-only") return AnomalyMix::DeletesOnly;
    if (s == "none") return AnomalyMix::None;
    throw CLI::ValidationError("--mix", "must be mixed, inserts-only, deletes-only, or none");
}

/// "NUM/DEN" as an exact rational.
std::pair<uint32_t, uint32_t> parse_epsilon(const std::string& s) {
    const auto slash = s.find('/');
    if (slash == std::string::npos)
        throw CLI::ValidationError("--epsilon", "expected NUM/DEN, e.g. 1/16");
    try {
        const unsigned long num = std::stoul(s.substr(0, slash));
        const unsigned long den = std::stoul(s.substr(slash + 1));
        return {static_cast<uint32_t>(num), static_cast<uint32_t>(den)};
    } catch (const std::exception&) {
        throw CLI::ValidationError("--epsilon", "expected NUM/DEN, e.g. 1/16");
    }
}

OpStream load_stream(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open stream file: " + path);
    return OpStream::parse(in);
}

std::vector<uint64_t> load_set(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open set file: " + path);
    std::vector<uint64_t> out;
    std::set<uint64_t> seen;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        const std::string tok = line.substr(first, last - first + 1);
        if (tok[0] == '#') continue;
        if (tok.find_first_not_of("0123456789") != std::string::npos)
            throw ParseError("expected one identifier per line, got \"" + tok + "\"", lineno);
        const uint64_t id = std::stoull(tok);
        if (!seen.insert(id).second)
            throw ParseError("duplicate identifier " + std::to_string(id) + " in set file", lineno);
        out.push_back(id);
    }
    return out;
}

std::vector<uint8_t> load_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, const void* data, std::size_t len) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(len));
    if (!out) throw std::runtime_error("write failed: " + path);
}

/// Merges a possibly-given flag with a stream-header value; they must agree.
uint64_t merged_bound(std::optional<uint64_t> flag, uint64_t header, const char* name) {
    if (!flag) return header;
    if (*flag != header)
        throw std::runtime_error(std::string("--") + name + "=" + std::to_string(*flag) +
                                 " conflicts with stream header " + name + "=" +
                                 std::to_string(header));
    return *flag;
}

json diff_to_json(const ReconcileDiff& diff) {
    json j;
    j["status"] = diff.ok ? "ok" : "failure";
    if (diff.ok) {
        j["remote_only"] = diff.remote_only;
        j["local_only"] = diff.local_only;
    }
    return j;
}

json ibf_params_to_json(const IbfParams& p) {
    json j;
    j["d"] = p.d;
    j["epsilon"] = std::to_string(p.eps_num) + "/" + std::to_string(p.eps_den);
    j["k"] = p.k();
    j["cells"] = p.m();
    j["n"] = p.n_bound();
    j["mode"] = to_string(p.hash.mode);
    return j;
}

struct IbfParamFlags {
    std::optional<uint32_t> d;
    std::optional<uint64_t> n;
    std::optional<uint32_t> cells;
    std::optional<uint32_t> k;
    std::string epsilon = "1/16";
    uint64_t seed = 0;
    std::string mode = "default";

    void attach(CLI::App* cmd) {
        cmd->add_option("--d", d, "straggler bound");
        cmd->add_option("--n", n, "largest identifier");
        cmd->add_option("--cells", cells, "cells per table (default 4*d*k)");
        cmd->add_option("--k", k, "hash functions for the primary table");
        cmd->add_option("--epsilon", epsilon, "failure bound as NUM/DEN")->capture_default_str();
        cmd->add_option("--seed", seed, "hash-family seed")->capture_default_str();
        cmd->add_option("--mode", mode, "hash mode: default|replication")->capture_default_str();
    }

    IbfParams build(uint64_t n_bound, uint32_t d_value) const {
        const auto [num, den] = parse_epsilon(epsilon);
        IbfParams p = IbfParams::with_defaults(d_value, num, den, n_bound, seed, parse_mode(mode));
        if (k) p.hash.k = *k;
        if (cells) p.hash.m = *cells;
        p.validate();
        return p;
    }
};

int cmd_sketch_run(const std::string& in_path, std::optional<uint64_t> n_flag,
                   std::optional<uint32_t> d_flag) {
    const OpStream stream = load_stream(in_path);
    const uint64_t n = merged_bound(n_flag, stream.n_bound, "n");
    const uint32_t d = static_cast<uint32_t>(
        merged_bound(d_flag ? std::optional<uint64_t>(*d_flag) : std::nullopt, stream.d, "d"));

    PowerSumSketch sk(d, n);
    std::size_t query = 0;
    for (const Op& op : stream.ops) {
        switch (op.kind) {
            case Op::Kind::Insert: sk.insert(op.id); break;
            case Op::Kind::Delete: sk.remove(op.id); break;
            case Op::Kind::Query: {
                const SketchDecodeResult r = sk.list_stragglers();
                json j;
                j["query"] = query++;
                j["status"] = to_string(r.status);
                j["count"] = sk.count_stragglers();
                if (r.status == SketchStatus::Ok) j["ids"] = r.ids;
                std::cout << j.dump() << "\n";
                break;
            }
        }
    }
    return 0;
}

int cmd_ibf_run(const std::string& in_path, const IbfParamFlags& flags, bool no_fallback) {
    const OpStream stream = load_stream(in_path);
    const uint64_t n = merged_bound(flags.n, stream.n_bound, "n");
    const uint32_t d = static_cast<uint32_t>(merged_bound(
        flags.d ? std::optional<uint64_t>(*flags.d) : std::nullopt, stream.d, "d"));

    InvertibleBloomFilter f(flags.build(n, d));
    const DecodeOptions opts{.use_fallback = !no_fallback};
    std::size_t query = 0;
    for (const Op& op : stream.ops) {
        switch (op.kind) {
            case Op::Kind::Insert: f.insert(op.id); break;
            case Op::Kind::Delete: f.remove(op.id); break;
            case Op::Kind::Query: {
                const DecodeResult r = f.list_stragglers(opts);
                json recovered = json::object();
                for (const auto& [x, mult] : r.recovered) recovered[std::to_string(x)] = mult;
                json j;
                j["query"] = query++;
                j["status"] = to_string(r.status);
                j["recovered"] = recovered;
                std::cout << j.dump() << "\n";
                break;
            }
        }
    }
    return 0;
}

int cmd_saturate(const SaturateOptions& opts, const std::string& out_path) {
    const SaturationReport report = saturate(opts);
    json j;
    j["cells"] = report.options.cells;
    j["k"] = report.options.k;
    j["trials"] = report.options.trials;
    j["with_fallback"] = report.options.with_fallback;
    j["mode"] = to_string(report.options.mode);
    j["n"] = report.options.n_bound;
    j["seed"] = report.options.seed;
    j["id_distribution"] = "uniform over [0, n], distinct per trial";
    j["mean"] = report.mean;
    j["stddev"] = report.stddev;
    j["points"] = report.points;
    std::cout << j.dump() << "\n";

    const std::string csv = report.histogram_csv();
    if (!out_path.empty())
        write_file(out_path, csv.data(), csv.size());
    else
        std::cout << csv;
    return 0;
}

int cmd_failure_rate(const FailureRateOptions& opts) {
    const FailureRateReport report = failure_rate(opts);
    json j;
    j["d"] = report.options.d;
    j["epsilon"] = std::to_string(report.options.eps_num) + "/" +
                   std::to_string(report.options.eps_den);
    j["trials"] = report.options.trials;
    j["mix"] = to_string(report.options.mix);
    j["n"] = report.options.n_bound;
    j["seed"] = report.options.seed;
    j["failures"] = report.failures;
    j["fraction"] = report.fraction;
    j["sigma"] = report.sigma;
    j["ci95"] = {report.ci_low, report.ci_high};
    std::cout << j.dump() << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"straggler identification structures: sketch/IBF harness"};
    app.require_subcommand(1);

    // --- sketch run ---
    auto* sketch = app.add_subcommand("sketch", "deterministic power-sum sketch");
    sketch->require_subcommand(1);
    auto* sketch_run = sketch->add_subcommand("run", "replay an op stream; JSON line per query");
    std::string sketch_in;
    std::optional<uint64_t> sketch_n;
    std::optional<uint32_t> sketch_d;
    sketch_run->add_option("--in", sketch_in, "op-stream file")->required();
    sketch_run->add_option("--n", sketch_n, "largest identifier (default: stream header)");
    sketch_run->add_option("--d", sketch_d, "straggler bound (default: stream header)");

    // --- ibf run ---
    auto* ibf = app.add_subcommand("ibf", "invertible Bloom filter");
    ibf->require_subcommand(1);
    auto* ibf_run = ibf->add_subcommand("run", "replay an op stream; JSON line per query");
    std::string ibf_in;
    IbfParamFlags ibf_flags;
    bool ibf_no_fallback = false;
    ibf_run->add_option("--in", ibf_in, "op-stream file")->required();
    ibf_flags.attach(ibf_run);
    ibf_run->add_flag("--no-fallback", ibf_no_fallback, "decode with the primary table only");

    // --- saturate ---
    auto* sat = app.add_subcommand("saturate", "insert-until-decode-failure experiment");
    SaturateOptions sat_opts;
    std::string sat_mode = "replication";
    std::string sat_out;
    uint64_t sat_n = 0;
    sat->add_option("--cells", sat_opts.cells, "cells per table")->capture_default_str();
    sat->add_option("--k", sat_opts.k, "hash functions for the primary table")
        ->capture_default_str();
    sat->add_option("--trials", sat_opts.trials, "number of trials")->capture_default_str();
    sat->add_flag("--with-fallback", sat_opts.with_fallback, "peel the fallback table too");
    sat->add_option("--mode", sat_mode, "hash mode: default|replication")->capture_default_str();
    sat->add_option("--seed", sat_opts.seed, "master seed")->capture_default_str();
    sat->add_option("--n", sat_n, "largest identifier (0 = mode default)");
    sat->add_option("--threads", sat_opts.threads, "worker threads")->capture_default_str();
    sat->add_option("--out", sat_out, "write histogram CSV here (default: stdout)");

    // --- failure-rate ---
    auto* fr = app.add_subcommand("failure-rate", "empirical decode-failure fraction");
    FailureRateOptions fr_opts;
    std::string fr_eps = "1/16";
    std::string fr_mix = "mixed";
    fr->add_option("--d", fr_opts.d, "straggler bound")->capture_default_str();
    fr->add_option("--epsilon", fr_eps, "failure bound as NUM/DEN")->capture_default_str();
    fr->add_option("--trials", fr_opts.trials, "number of trials")->capture_default_str();
    fr->add_option("--mix", fr_mix, "anomaly mix: mixed|inserts-only|deletes-only|none")
        ->capture_default_str();
    fr->add_option("--n", fr_opts.n_bound, "largest identifier")->capture_default_str();
    fr->add_option("--seed", fr_opts.seed, "master seed")->capture_default_str();
    fr->add_option("--max-pairs", fr_opts.max_pairs, "max background insert/delete pairs")
        ->capture_default_str();
    fr->add_option("--threads", fr_opts.threads, "worker threads")->capture_default_str();

    // --- reconcile ---
    auto* rec = app.add_subcommand("reconcile", "two-party set reconciliation");
    rec->require_subcommand(1);

    auto* rec_enc = rec->add_subcommand("encode", "encode a set into filter bytes");
    IbfParamFlags enc_flags;
    std::string enc_set, enc_out;
    enc_flags.attach(rec_enc);
    rec_enc->add_option("--set", enc_set, "set file, one identifier per line")->required();
    rec_enc->add_option("--out", enc_out, "output file for the wire bytes")->required();

    auto* rec_diff = rec->add_subcommand("diff", "decode a received filter against a local set");
    IbfParamFlags diff_flags;
    std::string diff_in, diff_set;
    diff_flags.attach(rec_diff);
    rec_diff->add_option("--in", diff_in, "received filter bytes")->required();
    rec_diff->add_option("--set", diff_set, "local set file")->required();

    auto* rec_rt = rec->add_subcommand("roundtrip", "run a full session between two set files");
    IbfParamFlags rt_flags;
    std::string rt_set_a, rt_set_b;
    rt_flags.attach(rec_rt);
    rec_rt->add_option("--set-a", rt_set_a, "encoding party's set file")->required();
    rec_rt->add_option("--set-b", rt_set_b, "decoding party's set file")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sketch_run->parsed()) return cmd_sketch_run(sketch_in, sketch_n, sketch_d);
        if (ibf_run->parsed()) return cmd_ibf_run(ibf_in, ibf_flags, ibf_no_fallback);
        if (sat->parsed()) {
            sat_opts.mode = parse_mode(sat_mode);
            sat_opts.n_bound = sat_n;
            return cmd_saturate(sat_opts, sat_out);
        }
        if (fr->parsed()) {
            const auto [num, den] = parse_epsilon(fr_eps);
            fr_opts.eps_num = num;
            fr_opts.eps_den = den;
            fr_opts.mix = parse_mix(fr_mix);
            return cmd_failure_rate(fr_opts);
        }
        if (rec_enc->parsed()) {
            const std::vector<uint64_t> set = load_set(enc_set);
            if (!enc_flags.d || !enc_flags.n)
                throw std::runtime_error("reconcile encode requires --d and --n");
            const IbfParams params = enc_flags.build(*enc_flags.n, *enc_flags.d);
            const std::vector<uint8_t> wire = encode_set(params, set).serialize();
            write_file(enc_out, wire.data(), wire.size());
            json j;
            j["set_size"] = set.size();
            j["bytes"] = wire.size();
            j["params"] = ibf_params_to_json(params);
            std::cout << j.dump() << "\n";
            return 0;
        }
        if (rec_diff->parsed()) {
            const std::vector<uint64_t> set = load_set(diff_set);
            const std::vector<uint8_t> wire = load_bytes(diff_in);
            InvertibleBloomFilter received = InvertibleBloomFilter::deserialize(wire);
            if (diff_flags.d && diff_flags.n) {
                const IbfParams expect = diff_flags.build(*diff_flags.n, *diff_flags.d);
                if (!(received.params() == expect))
                    throw ParamsMismatch("received header disagrees with local parameters");
            }
            const ReconcileDiff diff = diff_decode(std::move(received), set);
            json j = diff_to_json(diff);
            j["local_size"] = set.size();
            j["bytes"] = wire.size();
            std::cout << j.dump() << "\n";
            return diff.ok ? 0 : 2;
        }
        if (rec_rt->parsed()) {
            const std::vector<uint64_t> a = load_set(rt_set_a);
            const std::vector<uint64_t> b = load_set(rt_set_b);
            if (!rt_flags.d || !rt_flags.n)
                throw std::runtime_error("reconcile roundtrip requires --d and --n");
            const IbfParams params = rt_flags.build(*rt_flags.n, *rt_flags.d);
            const SessionReport report = session_roundtrip(a, b, params);
            json j;
            j["size_a"] = report.size_a;
            j["size_b"] = report.size_b;
            j["bytes"] = report.bytes_transferred;
            j["diff"] = diff_to_json(report.diff);
            j["params"] = ibf_params_to_json(params);
            std::cout << j.dump() << "\n";
            return report.diff.ok ? 0 : 2;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
