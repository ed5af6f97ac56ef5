#pragma once

#include <chrono>
#include <cstdint>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rackcoop/codec.hpp"
#include "rackcoop/error.hpp"
#include "rackcoop/harness.hpp"
#include "rackcoop/ifg.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/tradeoff.hpp"

namespace rackcoop {

namespace cli_detail {

inline std::vector<std::string> split(const std::string& text, char sep) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(text);
    while (std::getline(in, item, sep)) out.push_back(item);
    if (!text.empty() && text.back() == sep) out.emplace_back();
    return out;
}

// "1,3" -> {0, 2}
inline std::vector<std::int64_t> parse_racks(const std::string& text, const std::string& flag) {
    std::vector<std::int64_t> out;
    for (const auto& item : split(text, ',')) {
        if (item.empty() || item.size() > 9 || item.find_first_not_of("0123456789") != std::string::npos)
            throw ValidationError("malformed " + flag + " '" + text + "' (expected comma-separated rack numbers)");
        const std::int64_t v = std::stoll(item);
        if (v < 1) throw ValidationError(flag + ": rack numbers are 1-based");
        out.push_back(v - 1);
    }
    if (out.empty()) throw ValidationError(flag + " is empty");
    return out;
}

// "1:1,2:2" -> {{0,0},{1,1}}
inline std::vector<NodeId> parse_nodes(const std::string& text) {
    std::vector<NodeId> out;
    for (const auto& item : split(text, ',')) out.push_back(detail::parse_label(item));
    if (out.empty()) throw ValidationError("--nodes is empty");
    return out;
}

inline std::vector<std::uint8_t> read_input(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot read " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_output(const std::string& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ValidationError("cannot write " + path);
}

inline std::string rack_list(const std::vector<std::int64_t>& racks) {
    std::string s;
    for (std::size_t i = 0; i < racks.size(); ++i) s += (i ? "," : "") + std::to_string(racks[i] + 1);
    return s;
}

inline void print_point(std::ostream& out, const TradeoffPoint& t) {
    out << role_name(t.role) << " alpha=" << to_string(t.alpha) << " gamma=" << to_string(t.gamma)
        << " beta1=" << to_string(t.beta1) << " beta2=" << to_string(t.beta2) << "\n";
}

struct EncodeArgs {
    std::string params, in, out, field, parity = "block-scalar";
    std::uint64_t seed = 1;
    bool raw = false;
};

inline int encode_cmd(const EncodeArgs& a, std::ostream& out) {
    const CodeParams p = parse_params(a.params);
    BuildOptions options;
    if (!a.field.empty()) options.field = FieldSpec::parse(a.field);
    options.parity = parse_parity(a.parity);
    if (options.parity == ParityKind::Zero) throw ValidationError("parity kind 'zero' is not recoverable and cannot be stored");
    const CodeSpec spec = build_code(p, a.seed, options);
    const auto data = read_input(a.in);
    const auto message = a.raw ? raw_message(spec, data) : frame_message(spec, data);
    const ClusterState state = encode(spec, message);
    const Manifest m = save(state, spec, a.out);
    out << "encoded " << data.size() << " bytes as B=" << spec.file_size() << " symbols over " << spec.field->spec().name()
        << "\n";
    out << "layout: " << p.r << " racks x " << p.nodes_per_rack << " nodes, alpha=" << spec.alpha()
        << ", N=" << spec.layout.global_symbols << "\n";
    out << "content digest " << m.content_digest << "\n";
    return 0;
}

struct CollectArgs {
    std::string dir, nodes, recover;
    bool raw = false;
};

inline int collect_cmd(const CollectArgs& a, std::ostream& out) {
    const LoadedCluster c = load(a.dir);
    const auto nodes = parse_nodes(a.nodes);
    const auto message = collect(c.spec, c.state, nodes);
    std::vector<std::uint8_t> bytes;
    if (a.raw) c.spec.field->serialize(message, bytes);
    else bytes = unframe_message(c.spec, message);
    write_output(a.recover, bytes);
    out << "recovered " << bytes.size() << " bytes from " << nodes.size() << " nodes\n";
    return 0;
}

struct RepairArgs {
    std::string dir, racks, nodes, helpers;
};

inline int repair_cmd(const RepairArgs& a, std::ostream& out) {
    LoadedCluster c = load(a.dir);
    const CodeParams& p = c.spec.params;
    auto racks = parse_racks(a.racks, "--racks");
    std::sort(racks.begin(), racks.end());
    const auto helpers = parse_racks(a.helpers, "--helpers");
    ClusterState damaged = c.state;
    for (const auto& id : parse_nodes(a.nodes)) {
        if (!std::binary_search(racks.begin(), racks.end(), id.rack))
            throw ValidationError("node " + ClusterState::label(id) + " is not in --racks " + rack_list(racks));
        damaged.erase(id);
    }
    std::set<std::int64_t> hit;
    for (const auto& id : damaged.erased_nodes()) hit.insert(id.rack);
    if (std::vector<std::int64_t>(hit.begin(), hit.end()) != racks)
        throw ValidationError("--racks " + rack_list(racks) + " does not match the racks with erased nodes");

    const RepairResult result = repair(c.spec, damaged, helpers);
    const auto& tr = result.transcript;
    for (const auto& t : tr.round1)
        if (t.symbols != c.spec.layout.beta1) throw IntegrityError("round 1 transfer size differs from beta1");
    for (const auto& t : tr.round2)
        if (t.symbols != c.spec.layout.beta2) throw IntegrityError("round 2 transfer size differs from beta2");
    save(result.state, c.spec, a.dir);

    const std::int64_t gamma = p.d * c.spec.layout.beta1 + (p.f - 1) * c.spec.layout.beta2;
    out << "repaired racks " << rack_list(racks) << " with helpers " << rack_list(helpers) << "\n";
    for (const auto& t : tr.round1) out << "  round 1: rack " << t.from_rack + 1 << " -> rack " << t.to_rack + 1 << ": " << t.symbols << "\n";
    for (const auto& t : tr.round2) out << "  round 2: rack " << t.from_rack + 1 << " -> rack " << t.to_rack + 1 << ": " << t.symbols << "\n";
    for (auto l : racks) {
        const auto got = tr.cross_rack_download(l);
        out << "  rack " << l + 1 << " cross-rack download " << got << " (gamma " << gamma << ")\n";
        if (got != gamma) throw IntegrityError("rack " + std::to_string(l + 1) + " downloaded " + std::to_string(got) + " symbols");
    }
    for (const auto& t : tr.intra_rack) out << "  rack " << t.rack + 1 << " intra-rack " << t.symbols << "\n";
    return 0;
}

struct TradeoffArgs {
    std::string params, file_size, csv;
    std::int64_t sweep = 0;
};

inline int tradeoff_cmd(const TradeoffArgs& a, std::ostream& out) {
    const CodeParams p = parse_params(a.params);
    const Rational b = a.file_size.empty() ? Rational(construction_params(p).file_size) : parse_rational(a.file_size);
    print_point(out, msrcr_point(p, b));
    print_point(out, mbrcr_point(p, b));
    if (a.sweep > 0 || !a.csv.empty()) {
        const auto curve = tradeoff_curve(p, b, std::max<std::int64_t>(a.sweep, 1));
        if (a.sweep > 0) {
            out << "curve (" << curve.size() << " points):\n";
            for (const auto& t : curve) {
                out << "  ";
                print_point(out, t);
            }
        }
        if (!a.csv.empty()) {
            std::ofstream csv(a.csv, std::ios::trunc);
            if (!csv) throw ValidationError("cannot write " + a.csv);
            write_curve_csv(csv, curve);
        }
    }
    return 0;
}

struct VerifyArgs {
    std::string params, alpha, beta1, beta2;
    std::int64_t max_stages = 0;
    std::size_t scenarios = 64;
    std::uint64_t seed = 1;
};

inline int verify_cmd(const VerifyArgs& a, std::ostream& out) {
    const CodeParams p = parse_params(a.params);
    const Rational alpha = parse_rational(a.alpha), beta1 = parse_rational(a.beta1), beta2 = parse_rational(a.beta2);
    if (alpha < 0 || beta1 < 0 || beta2 < 0) throw ValidationError("alpha, beta1, beta2 must be non-negative");
    const std::int64_t stages = a.max_stages > 0 ? a.max_stages : p.m;
    const FileSizeBound bound = max_file_size(p, alpha, beta1, beta2);
    const WorstCaseMinCut oracle = worst_case_mincut(p, alpha, beta1, beta2, stages, {a.scenarios, a.seed});
    out << "bound  " << to_string(bound.value) << " (minimizing compositions";
    for (const auto& u : bound.argmin) out << " " << to_string(u);
    out << ")\n";
    out << "oracle " << to_string(oracle.value) << " over " << oracle.scenarios << " scenarios\n";
    out << "witness " << describe(oracle.witness);
    if (bound.value != oracle.value) {
        out << "MISMATCH\n";
        return 2;
    }
    out << "agree\n";
    return 0;
}

struct BenchArgs {
    std::string params, field;
    std::size_t rounds = 10;
    std::size_t probes = 10;
    std::uint64_t seed = 1;
};

inline int bench_cmd(const BenchArgs& a, std::ostream& out) {
    using clock = std::chrono::steady_clock;
    auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
    const CodeParams p = parse_params(a.params);
    BuildOptions options;
    if (!a.field.empty()) options.field = FieldSpec::parse(a.field);
    const auto t0 = clock::now();
    const CodeSpec spec = build_code(p, a.seed, options);
    const auto t1 = clock::now();
    Rng rng(a.seed);
    std::vector<Symbol> message(static_cast<std::size_t>(spec.file_size()));
    for (auto& s : message) s = static_cast<Symbol>(rng.below(spec.field->order()));
    ClusterState state = encode(spec, message);
    const auto t2 = clock::now();
    const ScenarioReport report = run_scenario(spec, state, random_scenario(p, a.seed, a.rounds, a.probes));
    const auto t3 = clock::now();
    out << report.text();
    out << std::fixed << std::setprecision(3) << "build " << ms(t1 - t0) << " ms, encode " << ms(t2 - t1) << " ms, "
        << a.rounds << " repairs + " << a.probes << " probes " << ms(t3 - t2) << " ms\n";
    return 0;
}

}  // namespace cli_detail

// Runs the command line; args excludes the program name. Returns 0 on success,
// 1 on validation errors, 2 on integrity failures.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    using namespace cli_detail;
    CLI::App app{"rack-aware cooperative regenerating codes", "rackcoop"};
    app.require_subcommand(1);

    EncodeArgs enc;
    auto* encode_app = app.add_subcommand("encode", "encode a file into a cluster directory");
    encode_app->add_option("--params", enc.params, "n,k,d,r,e,f")->required();
    encode_app->add_option("--seed", enc.seed, "construction seed");
    encode_app->add_option("--in", enc.in, "input file")->required();
    encode_app->add_option("--out", enc.out, "cluster directory")->required();
    encode_app->add_option("--field", enc.field, "gf8, gf16 or prime:p (default: smallest binary field that fits)");
    encode_app->add_option("--parity", enc.parity, "block-scalar or dense");
    encode_app->add_flag("--raw", enc.raw, "input is exactly B serialized symbols");

    CollectArgs col;
    auto* collect_app = app.add_subcommand("collect", "recover the file from k nodes");
    collect_app->add_option("--out", col.dir, "cluster directory")->required();
    collect_app->add_option("--nodes", col.nodes, "k nodes as rack:node, comma separated")->required();
    collect_app->add_option("--recover", col.recover, "output file")->required();
    collect_app->add_flag("--raw", col.raw, "write the B message symbols instead of the unframed file");

    RepairArgs rep;
    auto* repair_app = app.add_subcommand("repair", "erase and repair nodes in f racks");
    repair_app->add_option("--dir", rep.dir, "cluster directory")->required();
    repair_app->add_option("--racks", rep.racks, "failed racks, comma separated")->required();
    repair_app->add_option("--nodes", rep.nodes, "failed nodes as rack:node, comma separated")->required();
    repair_app->add_option("--helpers", rep.helpers, "d helper racks, comma separated")->required();

    TradeoffArgs tra;
    auto* tradeoff_app = app.add_subcommand("tradeoff", "corner points and the storage/bandwidth curve");
    tradeoff_app->add_option("--params", tra.params, "n,k,d,r,e,f")->required();
    tradeoff_app->add_option("--B", tra.file_size, "file size, integer or p/q (default: construction B)");
    tradeoff_app->add_option("--sweep", tra.sweep, "intervals between the corner alphas")->check(CLI::NonNegativeNumber);
    tradeoff_app->add_option("--csv", tra.csv, "write the curve as CSV");

    VerifyArgs ver;
    auto* verify_app = app.add_subcommand("verify-mincut", "compare the closed-form bound with max-flow");
    verify_app->add_option("--params", ver.params, "n,k,d,r,e,f")->required();
    verify_app->add_option("--alpha", ver.alpha, "node storage")->required();
    verify_app->add_option("--beta1", ver.beta1, "first-round download per helper")->required();
    verify_app->add_option("--beta2", ver.beta2, "second-round download per peer")->required();
    verify_app->add_option("--max-stages", ver.max_stages, "repair stages in random scenarios (default m)");
    verify_app->add_option("--scenarios", ver.scenarios, "random scenarios on top of the canonical ones");
    verify_app->add_option("--seed", ver.seed, "seed for random scenarios");

    BenchArgs ben;
    auto* bench_app = app.add_subcommand("bench", "random repair rounds with a bandwidth ledger");
    bench_app->add_option("--params", ben.params, "n,k,d,r,e,f")->required();
    bench_app->add_option("--rounds", ben.rounds, "repair rounds");
    bench_app->add_option("--probes", ben.probes, "collector probes after the rounds");
    bench_app->add_option("--seed", ben.seed, "seed");
    bench_app->add_option("--field", ben.field, "gf8, gf16 or prime:p");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) {
            out << app.help();
            return 0;
        }
        err << "error: " << e.what() << "\n";
        return 1;
    }

    try {
        if (*encode_app) return encode_cmd(enc, out);
        if (*collect_app) return collect_cmd(col, out);
        if (*repair_app) return repair_cmd(rep, out);
        if (*tradeoff_app) return tradeoff_cmd(tra, out);
        if (*verify_app) return verify_cmd(ver, out);
        if (*bench_app) return bench_cmd(ben, out);
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const Error& e) {
        err << "integrity failure: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        err << "failure: " << e.what() << "\n";
        return 2;
    }
    return 1;
}

}  // namespace rackcoop
