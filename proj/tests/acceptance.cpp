// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
#include <unistd.h>

#include <array>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "rackcoop/cli.hpp"
#include "rackcoop/rackcoop.hpp"

using namespace rackcoop;

namespace {

struct Outcome {
    bool ok = true;
    std::string detail;
};

// Collects the first few problems; ok stays false once anything is recorded.
class Check {
public:
    void fail(const std::string& what) {
        if (failures_++ < 3) notes_ += (notes_.empty() ? "" : "; ") + what;
    }
    void expect(bool cond, const std::function<std::string()>& what) {
        if (!cond) fail(what());
    }
    Outcome done(const std::string& summary) const {
        if (failures_ == 0) return {true, summary};
        return {false, std::to_string(failures_) + " problem(s): " + notes_};
    }

private:
    std::size_t failures_ = 0;
    std::string notes_;
};

const CodeParams kReference = validate(8, 4, 2, 4, 2, 2);

std::vector<Symbol> random_message(const CodeSpec& spec, Rng& rng) {
    std::vector<Symbol> m(static_cast<std::size_t>(spec.file_size()));
    for (auto& s : m) s = static_cast<Symbol>(rng.below(spec.field->order()));
    return m;
}

std::vector<CodeParams> all_tuples(std::int64_t max_n, std::int64_t max_r) {
    std::vector<CodeParams> out;
    for (std::int64_t r = 1; r <= max_r; ++r)
        for (std::int64_t n = r; n <= max_n; n += r)
            for (std::int64_t k = 1; k <= n; ++k)
                for (std::int64_t d = 1; d < r; ++d)
                    for (std::int64_t f = 1; f <= r; ++f)
                        for (std::int64_t e = f; e <= n; e += f) try {
                                out.push_back(validate(n, k, d, r, e, f));
                            } catch (const ParamsError&) {
                            }
    return out;
}

std::vector<CodeParams> random_tuples(std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<CodeParams> out;
    while (out.size() < count) {
        const auto r = static_cast<std::int64_t>(2 + rng.below(7));
        const auto per = static_cast<std::int64_t>(1 + rng.below(4));
        const auto f = static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(r)));
        const auto e = f * static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(per)));
        const auto k = static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(r * per)));
        const auto d = static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(r)));
        try {
            out.push_back(validate(r * per, k, d, r, e, f));
        } catch (const ParamsError&) {
        }
    }
    return out;
}

Outcome construction_point_identity() {
    Check c;
    std::size_t count = 0;
    for (const auto& p : all_tuples(24, 8)) {
        const std::int64_t m = p.k * p.r / p.n, w = p.e / p.f;
        const std::int64_t b = p.k * (2 * p.d + p.f - 1) + w * (m - m * m);
        const ConstructionLayout l = construction_params(p);
        const TradeoffPoint t = mbrcr_point(p, b);
        c.expect(l.file_size == b, [&] { return p.to_string() + " B"; });
        c.expect(t.alpha == Rational(2 * p.d + p.f - 1) && t.beta1 == Rational(2 * w) && t.beta2 == Rational(w) &&
                     t.gamma == Rational(p.d * 2 * w + (p.f - 1) * w),
                 [&] { return p.to_string() + " point " + to_string(t.alpha) + "," + to_string(t.beta1) + "," + to_string(t.beta2); });
        c.expect(l.point.alpha == t.alpha && l.point.beta1 == t.beta1 && l.point.beta2 == t.beta2,
                 [&] { return p.to_string() + " layout point"; });
        ++count;
    }
    if (count < 50) c.fail("only " + std::to_string(count) + " tuples");
    return c.done(std::to_string(count) + " tuples with n <= 24, r <= 8");
}

Outcome corner_reductions() {
    Check c;
    std::size_t cooperative = 0, rack_aware = 0;
    for (const auto& p : all_tuples(16, 16)) {
        for (std::int64_t b : {1, 7, 60}) {
            const Rational B(b);
            const TradeoffPoint msr = msrcr_point(p, B), mbr = mbrcr_point(p, B);
            if (p.n == p.r && p.e == p.f) {
                const Rational mbcr = B * (2 * p.d + p.e - 1) / (p.k * (2 * p.d + p.e - p.k));
                c.expect(mbr.alpha == mbcr && mbr.gamma == mbcr, [&] { return p.to_string() + " MBCR"; });
                const Rational mscr = B * (p.d + p.e - 1) / (p.k * (p.d + p.e - p.k));
                c.expect(msr.alpha == B / p.k && msr.gamma == mscr, [&] { return p.to_string() + " MSCR"; });
                ++cooperative;
            }
            if (p.e == 1 && p.f == 1) {
                const std::int64_t m = p.m;
                c.expect(msr.alpha == B / p.k && msr.gamma == B * p.d / (p.k * (p.d - m + 1)),
                         [&] { return p.to_string() + " MSRR"; });
                const Rational mbrr = B * p.d / (Rational((p.k - m) * p.d) + Rational(m) * (Rational(p.d) - Rational(m - 1, 2)));
                c.expect(mbr.alpha == mbrr && mbr.gamma == mbrr, [&] { return p.to_string() + " MBRR"; });
                ++rack_aware;
            }
        }
    }
    if (cooperative == 0 || rack_aware == 0) c.fail("no specialised tuples enumerated");
    return c.done(std::to_string(cooperative) + " cooperative and " + std::to_string(rack_aware) + " rack-aware cases");
}

Outcome bound_oracle_agreement() {
    Check c;
    const std::vector<CodeParams> tuples{kReference,
                                         validate(12, 8, 4, 6, 2, 2),
                                         validate(10, 4, 3, 5, 2, 2),
                                         validate(6, 4, 4, 6, 2, 2),
                                         validate(12, 6, 2, 4, 2, 2),
                                         validate(12, 6, 3, 6, 3, 3),
                                         validate(9, 4, 1, 3, 1, 1)};
    std::size_t points = 0;
    for (const auto& p : tuples) {
        const Rational B(construction_params(p).file_size);
        const TradeoffPoint msr = msrcr_point(p, B), mbr = mbrcr_point(p, B);
        std::vector<std::array<Rational, 3>> grid{{msr.alpha, msr.beta1, msr.beta2}, {mbr.alpha, mbr.beta1, mbr.beta2}};
        const std::size_t perturbed = grid.size();
        if (p.f > 1) {
            grid.push_back({msr.alpha, msr.beta1, msr.beta2 / 2});
            grid.push_back({mbr.alpha, mbr.beta1, mbr.beta2 / 2});
        } else {
            // no second round with one failed rack; halve beta1 instead
            grid.push_back({msr.alpha, msr.beta1 / 2, msr.beta2});
            grid.push_back({mbr.alpha, mbr.beta1 / 2, mbr.beta2});
        }
        const std::size_t regular = grid.size();
        for (const auto& t : tradeoff_curve(p, B, 10))
            if (t.role == PointRole::Custom) grid.push_back({t.alpha, t.beta1, t.beta2});
        for (const auto& [num, den] : std::vector<std::pair<int, int>>{{1, 2}, {3, 4}, {5, 4}, {3, 2}, {2, 1}, {7, 8}, {9, 8}, {1, 3}})
            grid.push_back({mbr.alpha * Rational(num, den), mbr.beta1 * Rational(den, num + den), msr.beta2 * Rational(num, 2)});
        for (std::size_t i = 0; i < grid.size(); ++i) {
            const auto& [a, b1, b2] = grid[i];
            const FileSizeBound bound = max_file_size(p, a, b1, b2);
            const WorstCaseMinCut oracle = worst_case_mincut(p, a, b1, b2, p.m, {24, 7 + i});
            c.expect(oracle.value == bound.value, [&] {
                return p.to_string() + " at (" + to_string(a) + "," + to_string(b1) + "," + to_string(b2) + "): bound " +
                       to_string(bound.value) + " oracle " + to_string(oracle.value);
            });
            if (i < perturbed) c.expect(bound.value >= B, [&] { return p.to_string() + " corner below B"; });
            else if (i < regular)
                c.expect(oracle.value < B, [&] { return p.to_string() + " halved beta2 still reaches B"; });
            ++points;
        }
        if (grid.size() < 20) c.fail(p.to_string() + " grid has " + std::to_string(grid.size()) + " points");
    }
    return c.done(std::to_string(points) + " points on " + std::to_string(tuples.size()) + " tuples");
}

const CodeSpec& reference_spec() {
    static const CodeSpec spec = build_code(kReference, 2024, {FieldSpec::gf256()});
    return spec;
}

std::vector<NodeId> nodes_of(const CodeParams& p, const std::vector<std::size_t>& flat) {
    std::vector<NodeId> ids;
    for (auto x : flat) ids.push_back({static_cast<std::int64_t>(x) / p.nodes_per_rack, static_cast<std::int64_t>(x) % p.nodes_per_rack});
    return ids;
}

Outcome codec_roundtrip() {
    Check c;
    const CodeSpec& spec = reference_spec();
    Rng rng(4);
    const auto message = random_message(spec, rng);
    const ClusterState state = encode(spec, message);
    std::size_t count = 0;
    for_each_combination(8, 4, [&](const std::vector<std::size_t>& flat) {
        const auto ids = nodes_of(kReference, flat);
        try {
            c.expect(collect(spec, state, ids) == message, [&] { return "wrong message from subset " + std::to_string(count); });
        } catch (const Error& e) {
            c.fail(e.what());
        }
        ++count;
        return true;
    });
    if (count != 70) c.fail(std::to_string(count) + " subsets");
    return c.done(std::to_string(count) + " subsets over " + spec.field->spec().name() + ", B = " + std::to_string(spec.file_size()));
}

Outcome exact_repair() {
    Check c;
    const CodeSpec& spec = reference_spec();
    Rng rng(5);
    const ClusterState state = encode(spec, random_message(spec, rng));
    std::size_t patterns = 0;
    for_each_combination(4, 2, [&](const std::vector<std::size_t>& chosen) {
        const std::vector<std::int64_t> racks{static_cast<std::int64_t>(chosen[0]), static_cast<std::int64_t>(chosen[1])};
        std::vector<std::int64_t> helpers;
        for (std::int64_t l = 0; l < 4; ++l)
            if (l != racks[0] && l != racks[1]) helpers.push_back(l);
        for (std::int64_t a = 0; a < 2; ++a)
            for (std::int64_t b = 0; b < 2; ++b) {
                ++patterns;
                const std::string tag = "racks " + std::to_string(racks[0] + 1) + "," + std::to_string(racks[1] + 1);
                const RepairResult res = repair(spec, erase(state, {racks, {{a}, {b}}}), helpers);
                c.expect(res.state == state, [&] { return tag + " not exact"; });
                for (auto l : racks) c.expect(res.transcript.cross_rack_download(l) == 5, [&] { return tag + " gamma"; });
                std::map<std::pair<std::int64_t, std::int64_t>, std::int64_t> first, second;
                for (const auto& t : res.transcript.round1) first[{t.from_rack, t.to_rack}] += t.symbols;
                for (const auto& t : res.transcript.round2) second[{t.from_rack, t.to_rack}] += t.symbols;
                c.expect(first.size() == 4 && second.size() == 2, [&] { return tag + " transfer count"; });
                for (auto h : helpers)
                    for (auto l : racks) c.expect(first[{h, l}] == 2, [&] { return tag + " helper transfer"; });
                c.expect(second[{racks[0], racks[1]}] == 1 && second[{racks[1], racks[0]}] == 1, [&] { return tag + " peer transfer"; });
            }
        return true;
    });
    if (patterns != 24) c.fail(std::to_string(patterns) + " patterns");
    return c.done(std::to_string(patterns) + " patterns, 5 cross-rack symbols per failed rack");
}

Outcome dependence_relation() {
    Check c;
    const CodeSpec& spec = reference_spec();
    const Field& F = *spec.field;
    Rng rng(6);
    std::size_t checks = 0;
    for (int trial = 0; trial < 100; ++trial) {
        const auto message = random_message(spec, rng);
        const ClusterState state = encode(spec, message);
        const auto matrices = message_matrices(spec, vecmat(message, spec.generator));
        for (std::int64_t l = 0; l < kReference.r; ++l) {
            const auto u = spec.u_col(l), v = spec.v_col(l);
            const auto stripped = strip_parities(spec, l, state);
            for (std::size_t i = 0; i < matrices.size(); ++i) {
                // last entry of M^T u, and both sides of u^T (M v) = v^T (M^T u)
                const auto mv = matvec(matrices[i], v);
                const auto mtu = vecmat(u, matrices[i]);
                c.expect(dot(F, u, mv) == dot(F, v, mtu), [&] { return std::string("relation"); });
                const auto completed = complete_mbcr(spec, l, *stripped[i]);
                c.expect(completed.back() == mtu.back(), [&] { return "rack " + std::to_string(l + 1) + " matrix " + std::to_string(i + 1); });
                ++checks;
            }
        }
    }
    return c.done(std::to_string(checks) + " reconstructions over 100 messages");
}

Outcome vector_mds() {
    Check c;
    std::size_t subsets = 0;
    for (const CodeParams& p : {kReference, validate(12, 7, 2, 4, 2, 2)}) {
        const CodeSpec spec = build_code(p, 31);
        Rng rng(7);
        const ClusterState state = encode(spec, random_message(spec, rng));
        const auto t = static_cast<std::size_t>(spec.global_nodes());
        for (std::int64_t l = 0; l < p.r; ++l) {
            std::vector<Symbol> c_l;
            for (std::int64_t j = spec.mbcr_nodes(); j < p.nodes_per_rack; ++j) {
                const auto& node = state.node({l, j});
                c_l.insert(c_l.end(), node.begin(), node.end());
            }
            const auto blocks = local_blocks(spec, c_l, l);
            for_each_combination(blocks.size(), t, [&](const std::vector<std::size_t>& ids) {
                std::vector<std::pair<std::size_t, std::vector<Symbol>>> known;
                for (auto b : ids) known.emplace_back(b, blocks[b]);
                c.expect(recover_blocks(spec, l, known) == blocks, [&] { return p.to_string() + " rack " + std::to_string(l + 1); });
                ++subsets;
                return true;
            });
        }
    }
    return c.done(std::to_string(subsets) + " block subsets");
}

void brute_force(std::int64_t remaining, std::int64_t f, Composition& prefix, std::set<Composition>& out) {
    if (remaining == 0) out.insert(prefix);
    for (std::int64_t x = 1; x <= f && x <= remaining; ++x) {
        prefix.push_back(x);
        brute_force(remaining - x, f, prefix, out);
        prefix.pop_back();
    }
}

Outcome composition_counts() {
    Check c;
    std::string counts;
    for (const auto& [m, f] : std::vector<std::pair<std::int64_t, std::int64_t>>{{2, 2}, {3, 2}, {4, 2}, {4, 4}, {6, 3}}) {
        std::set<Composition> oracle;
        Composition prefix;
        brute_force(m, f, prefix, oracle);
        const auto got = compositions(m, f);
        const std::set<Composition> as_set(got.begin(), got.end());
        c.expect(got.size() == oracle.size() && as_set == oracle, [&] { return "(" + std::to_string(m) + "," + std::to_string(f) + ")"; });
        counts += (counts.empty() ? "" : " ") + std::to_string(got.size());
    }
    return c.done("counts " + counts);
}

Outcome lp_corners() {
    Check c;
    for (const auto& p : random_tuples(20, 404)) {
        const Rational B(construction_params(p).file_size);
        const TradeoffPoint msr = msrcr_point(p, B), mbr = mbrcr_point(p, B);
        c.expect(min_gamma_given_alpha(p, B, msr.alpha).gamma == msr.gamma, [&] { return p.to_string() + " MSRCR"; });
        c.expect(min_gamma_given_alpha(p, B, mbr.alpha).gamma == mbr.gamma, [&] { return p.to_string() + " MBRCR"; });
    }
    return c.done("20 random tuples, both corners");
}

struct CliRun {
    std::string transcript;
    std::map<std::string, std::string> files;
};

CliRun cli_session(const fs::path& root) {
    fs::remove_all(root);
    fs::create_directories(root);
    std::ofstream(root / "in.bin", std::ios::binary) << "repeatable";
    CliRun run;
    std::ostringstream out, err;
    const std::string dir = (root / "cluster").string();
    auto call = [&](const std::vector<std::string>& args) {
        const int code = run_cli(args, out, err);
        out << "exit " << code << "\n";
    };
    call({"encode", "--params", "8,4,2,4,2,2", "--seed", "77", "--in", (root / "in.bin").string(), "--out", dir});
    call({"repair", "--dir", dir, "--racks", "2,4", "--nodes", "2:1,4:2", "--helpers", "1,3"});
    call({"verify-mincut", "--params", "8,4,2,4,2,2", "--alpha", "5", "--beta1", "2", "--beta2", "1", "--seed", "77"});
    run.transcript = out.str() + err.str();
    if (fs::exists(dir))
        for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        std::ifstream in(entry.path(), std::ios::binary);
        run.files[fs::relative(entry.path(), dir).string()] = {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
    }
    fs::remove_all(root);
    return run;
}

Outcome determinism() {
    Check c;
    const fs::path base = fs::temp_directory_path() / ("rackcoop_acceptance_" + std::to_string(::getpid()));
    const CliRun a = cli_session(base / "a");
    const CliRun b = cli_session(base / "b");
    fs::remove_all(base);
    c.expect(a.transcript == b.transcript, [] { return std::string("stdout differs"); });
    c.expect(a.files == b.files, [] { return std::string("cluster files differ"); });
    c.expect(a.files.size() == 9, [&] { return std::to_string(a.files.size()) + " files written"; });
    c.expect(a.transcript.find("exit 1") == std::string::npos && a.transcript.find("exit 2") == std::string::npos,
             [&] { return "a command failed: " + a.transcript; });
    return c.done(std::to_string(a.files.size()) + " files and stdout byte-identical");
}

}  // namespace

int main() {
    const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
        {"construction point equals MBRCR point", construction_point_identity},
        {"corner points reduce to known special cases", corner_reductions},
        {"closed-form bound equals max-flow oracle", bound_oracle_agreement},
        {"reference code recovers from every k-subset", codec_roundtrip},
        {"exact repair with gamma cross-rack symbols", exact_repair},
        {"dropped symbol follows from the dependence relation", dependence_relation},
        {"rack blocks form a vector-MDS code", vector_mds},
        {"composition enumeration matches brute force", composition_counts},
        {"linear program reproduces both corners", lp_corners},
        {"encode, repair and verify-mincut are deterministic", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        if (!o.ok) ++failed;
        std::cout << (o.ok ? "PASS " : "FAIL ") << i + 1 << ": " << criteria[i].first << " (" << o.detail << ")" << std::endl;
    }
    std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed" << std::endl;
    return failed == 0 ? 0 : 1;
}
