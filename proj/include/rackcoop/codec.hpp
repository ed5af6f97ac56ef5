#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rackcoop/error.hpp"
#include "rackcoop/field.hpp"
#include "rackcoop/linalg.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/util.hpp"

namespace rackcoop {

// How the local parity maps P_{i,l} are generated.
enum class ParityKind {
    BlockScalar,  // coefficient lambda_{i,t} applied to whole block t; [I; Lambda] systematic MDS (Cauchy)
    Dense,        // random dense maps, vector-MDS verified
    Zero,         // no parities at all; only for tests, violates the vector-MDS requirement
};

inline std::string_view parity_name(ParityKind k) {
    switch (k) {
        case ParityKind::BlockScalar: return "block-scalar";
        case ParityKind::Dense: return "dense";
        case ParityKind::Zero: return "zero";
    }
    return "block-scalar";
}

inline ParityKind parse_parity(std::string_view s) {
    if (s == "block-scalar") return ParityKind::BlockScalar;
    if (s == "dense") return ParityKind::Dense;
    if (s == "zero") return ParityKind::Zero;
    throw ValidationError("unknown parity kind '" + std::string(s) + "'");
}

struct BuildOptions {
    std::optional<FieldSpec> field;  // default: GF(2^8) if it fits, else GF(2^16)
    ParityKind parity = ParityKind::BlockScalar;
    int max_resamples = 32;
};

struct NodeId {
    std::int64_t rack = 0;  // 0-based
    std::int64_t node = 0;  // 0-based; node 0 is the relayer
    friend auto operator<=>(const NodeId&, const NodeId&) = default;
};

// Generator material of the minimum-bandwidth code. Immutable after build.
struct CodeSpec {
    CodeParams params;
    ConstructionLayout layout;
    FieldPtr field;
    std::uint64_t seed = 0;
    ParityKind parity_kind = ParityKind::BlockScalar;
    int attempts = 1;  // resamples consumed by construction-time verification

    Matrix generator;  // B x N outer MDS code
    Matrix u;          // d x r
    Matrix v;          // (d+f) x r
    // parity[l][i]: (2d+f) x ((n/r - e/f) alpha), last row zero.
    std::vector<std::vector<Matrix>> parity;
    // Every stored symbol as a linear functional of the message: (n alpha) x B,
    // rows ordered rack-major, node-major, position-major.
    Matrix encoding;

    std::int64_t alpha() const noexcept { return layout.alpha; }
    std::int64_t file_size() const noexcept { return layout.file_size; }
    std::int64_t mbcr_nodes() const noexcept { return params.failures_per_rack; }
    std::int64_t global_nodes() const noexcept { return params.global_nodes_per_rack(); }
    bool is_mbcr_node(std::int64_t node) const noexcept { return node < params.failures_per_rack; }
    std::size_t flat(NodeId id) const noexcept { return static_cast<std::size_t>(id.rack * params.nodes_per_rack + id.node); }

    std::vector<Symbol> u_col(std::int64_t l) const { return u.column(static_cast<std::size_t>(l)); }
    std::vector<Symbol> v_col(std::int64_t l) const { return v.column(static_cast<std::size_t>(l)); }
};

// r racks x n/r nodes; each node holds alpha symbols or is erased.
class ClusterState {
public:
    ClusterState() = default;
    ClusterState(std::int64_t racks, std::int64_t nodes_per_rack, std::int64_t alpha)
        : racks_(racks), per_rack_(nodes_per_rack), alpha_(alpha),
          nodes_(static_cast<std::size_t>(racks * nodes_per_rack), std::vector<Symbol>(static_cast<std::size_t>(alpha), 0)),
          erased_(static_cast<std::size_t>(racks * nodes_per_rack), false) {}

    std::int64_t racks() const noexcept { return racks_; }
    std::int64_t nodes_per_rack() const noexcept { return per_rack_; }
    std::int64_t alpha() const noexcept { return alpha_; }

    bool erased(NodeId id) const { return erased_.at(index(id)); }

    const std::vector<Symbol>& node(NodeId id) const {
        if (erased(id)) throw ValidationError("node " + label(id) + " is erased");
        return nodes_[index(id)];
    }

    void set_node(NodeId id, std::vector<Symbol> symbols) {
        if (static_cast<std::int64_t>(symbols.size()) != alpha_)
            throw DimensionError("node " + label(id) + " must hold alpha = " + std::to_string(alpha_) + " symbols");
        nodes_[index(id)] = std::move(symbols);
        erased_[index(id)] = false;
    }

    void erase(NodeId id) {
        const std::size_t i = index(id);
        erased_[i] = true;
        std::fill(nodes_[i].begin(), nodes_[i].end(), 0);
    }

    std::vector<NodeId> erased_nodes() const {
        std::vector<NodeId> out;
        for (std::int64_t l = 0; l < racks_; ++l)
            for (std::int64_t i = 0; i < per_rack_; ++i)
                if (erased_[index({l, i})]) out.push_back({l, i});
        return out;
    }

    static std::string label(NodeId id) { return std::to_string(id.rack + 1) + ":" + std::to_string(id.node + 1); }

    friend bool operator==(const ClusterState&, const ClusterState&) = default;

private:
    std::size_t index(NodeId id) const {
        if (id.rack < 0 || id.rack >= racks_ || id.node < 0 || id.node >= per_rack_)
            throw ValidationError("node " + label(id) + " out of range");
        return static_cast<std::size_t>(id.rack * per_rack_ + id.node);
    }

    std::int64_t racks_ = 0;
    std::int64_t per_rack_ = 0;
    std::int64_t alpha_ = 0;
    std::vector<std::vector<Symbol>> nodes_;
    std::vector<bool> erased_;
};

// Fills a d x (d+f) message matrix [A B; C 0] from m(2d+f-m) symbols:
// A (m x m), then B (m x (d+f-m)), then C ((d-m) x m), each row-major.
inline Matrix message_matrix(const FieldPtr& field, const CodeParams& p, std::span<const Symbol> symbols) {
    const auto d = static_cast<std::size_t>(p.d), m = static_cast<std::size_t>(p.m), w = static_cast<std::size_t>(p.d + p.f);
    if (symbols.size() != m * (2 * d + static_cast<std::size_t>(p.f) - m))
        throw DimensionError("message matrix needs m(2d+f-m) symbols");
    Matrix mm(field, d, w);
    std::size_t next = 0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < m; ++j) mm(i, j) = symbols[next++];
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = m; j < w; ++j) mm(i, j) = symbols[next++];
    for (std::size_t i = m; i < d; ++i)
        for (std::size_t j = 0; j < m; ++j) mm(i, j) = symbols[next++];
    return mm;
}

// [M v_l ; M^T u_l], 2d+f symbols.
inline std::vector<Symbol> mbcr_symbols(const Matrix& mm, std::span<const Symbol> u_l, std::span<const Symbol> v_l) {
    std::vector<Symbol> out = matvec(mm, v_l);
    const std::vector<Symbol> right = vecmat(u_l, mm);
    out.insert(out.end(), right.begin(), right.end());
    return out;
}

// Restores the unstored last symbol of [M v_l ; M^T u_l] from the first 2d+f-1
// via u_l^T (M v_l) = v_l^T (M^T u_l).
inline std::vector<Symbol> complete_mbcr(const CodeSpec& spec, std::int64_t rack, std::span<const Symbol> stored) {
    const auto d = static_cast<std::size_t>(spec.params.d);
    const std::size_t w = d + static_cast<std::size_t>(spec.params.f);
    if (stored.size() != d + w - 1)
        throw DimensionError("expected 2d+f-1 MBCR symbols");
    const Field& f = *spec.field;
    const auto u_l = spec.u_col(rack);
    const auto v_l = spec.v_col(rack);
    Symbol acc = dot(f, u_l, stored.subspan(0, d));
    for (std::size_t k = 0; k + 1 < w; ++k) acc = f.sub(acc, f.mul(v_l[k], stored[d + k]));
    std::vector<Symbol> full(stored.begin(), stored.end());
    full.push_back(f.div(acc, v_l[w - 1]));
    return full;
}

namespace detail {

inline std::vector<Symbol> first_rows_times(const Matrix& p, std::size_t rows, std::span<const Symbol> c) {
    std::vector<Symbol> out(rows, 0);
    const Field& f = p.f();
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < p.cols(); ++j) out[i] = f.fma(out[i], p(i, j), c[j]);
    return out;
}

// Rack-local generator of the n/r blocks in terms of c_l: identity rows for the
// global blocks, then the stored rows of each P_{i,l}. Block b occupies rows
// [b alpha, (b+1) alpha); global blocks come first.
inline Matrix local_generator(const CodeSpec& spec, std::int64_t rack) {
    const auto a = static_cast<std::size_t>(spec.alpha());
    const auto t = static_cast<std::size_t>(spec.global_nodes());
    const auto ef = static_cast<std::size_t>(spec.mbcr_nodes());
    Matrix q(spec.field, (t + ef) * a, t * a);
    for (std::size_t i = 0; i < t * a; ++i) q(i, i) = 1;
    for (std::size_t i = 0; i < ef; ++i) {
        const Matrix& p = spec.parity[static_cast<std::size_t>(rack)][i];
        for (std::size_t row = 0; row < a; ++row)
            for (std::size_t col = 0; col < t * a; ++col) q((t + i) * a + row, col) = p(row, col);
    }
    return q;
}

inline std::vector<std::size_t> block_rows(const std::vector<std::size_t>& blocks, std::size_t alpha) {
    std::vector<std::size_t> rows;
    for (auto b : blocks)
        for (std::size_t k = 0; k < alpha; ++k) rows.push_back(b * alpha + k);
    return rows;
}

}  // namespace detail

// Local blocks of a rack in block order: globals c_1..c_t, then parities
// P_{1,l} c_l .. P_{e/f,l} c_l (stored rows only).
inline std::vector<std::vector<Symbol>> local_blocks(const CodeSpec& spec, std::span<const Symbol> c_l, std::int64_t rack) {
    const auto a = static_cast<std::size_t>(spec.alpha());
    const auto all = matvec(detail::local_generator(spec, rack), c_l);
    std::vector<std::vector<Symbol>> blocks;
    for (std::size_t b = 0; b * a < all.size(); ++b) blocks.emplace_back(all.begin() + b * a, all.begin() + (b + 1) * a);
    return blocks;
}

// Vector-MDS decoding: any n/r - e/f known blocks determine c_l, and with it
// every block. known maps block index -> contents.
inline std::vector<std::vector<Symbol>> recover_blocks(const CodeSpec& spec, std::int64_t rack,
                                                       const std::vector<std::pair<std::size_t, std::vector<Symbol>>>& known) {
    const auto a = static_cast<std::size_t>(spec.alpha());
    std::vector<std::size_t> ids;
    std::vector<Symbol> values;
    for (const auto& [b, content] : known) {
        ids.push_back(b);
        values.insert(values.end(), content.begin(), content.end());
    }
    const Matrix q = detail::local_generator(spec, rack);
    const auto c_l = solve_full_column_rank(q.select_rows(detail::block_rows(ids, a)), values);
    return local_blocks(spec, c_l, rack);
}

inline std::vector<Matrix> message_matrices(const CodeSpec& spec, std::span<const Symbol> globals) {
    std::vector<Matrix> out;
    const auto base = static_cast<std::size_t>(spec.layout.rack_global_symbols);
    const auto size = static_cast<std::size_t>(spec.layout.message_matrix_symbols);
    for (std::int64_t i = 0; i < spec.mbcr_nodes(); ++i)
        out.push_back(message_matrix(spec.field, spec.params, globals.subspan(base + static_cast<std::size_t>(i) * size, size)));
    return out;
}

// The message goes through the outer MDS code. The first (n - r e/f) alpha
// global symbols fill the global nodes rack-major, node-major, position-major
// and the rest fill the message matrices. MBCR node (l, i) stores the first
// alpha symbols of [M_i v_l ; M_i^T u_l] + P_{i,l} c_l.
inline ClusterState encode(const CodeSpec& spec, std::span<const Symbol> message) {
    const CodeParams& p = spec.params;
    if (static_cast<std::int64_t>(message.size()) != spec.file_size())
        throw ValidationError("message has " + std::to_string(message.size()) + " symbols, expected B = " +
                              std::to_string(spec.file_size()));
    for (Symbol s : message)
        if (!spec.field->contains(s)) throw ValidationError("message symbol outside " + spec.field->spec().name());
    const auto a = static_cast<std::size_t>(spec.alpha());
    const auto t = static_cast<std::size_t>(spec.global_nodes());
    const std::vector<Symbol> globals = vecmat(message, spec.generator);
    const std::vector<Matrix> mm = message_matrices(spec, globals);

    ClusterState state(p.r, p.nodes_per_rack, spec.alpha());
    for (std::int64_t l = 0; l < p.r; ++l) {
        const auto base = static_cast<std::size_t>(l) * t * a;
        const std::span<const Symbol> c_l(globals.data() + base, t * a);
        for (std::size_t j = 0; j < t; ++j)
            state.set_node({l, spec.mbcr_nodes() + static_cast<std::int64_t>(j)},
                           std::vector<Symbol>(c_l.begin() + j * a, c_l.begin() + (j + 1) * a));
        const auto u_l = spec.u_col(l);
        const auto v_l = spec.v_col(l);
        for (std::int64_t i = 0; i < spec.mbcr_nodes(); ++i) {
            std::vector<Symbol> x = mbcr_symbols(mm[static_cast<std::size_t>(i)], u_l, v_l);
            const auto par = detail::first_rows_times(spec.parity[static_cast<std::size_t>(l)][static_cast<std::size_t>(i)], a, c_l);
            x.resize(a);
            for (std::size_t k = 0; k < a; ++k) x[k] = spec.field->add(x[k], par[k]);
            state.set_node({l, i}, std::move(x));
        }
    }
    return state;
}

// Removes local parities from the live MBCR nodes of a rack, giving the first
// 2d+f-1 symbols of [M_i v_l ; M_i^T u_l]. Needs every global node of the rack.
inline std::vector<std::optional<std::vector<Symbol>>> strip_parities(const CodeSpec& spec, std::int64_t rack,
                                                                      const ClusterState& state) {
    const auto a = static_cast<std::size_t>(spec.alpha());
    std::vector<Symbol> c_l;
    for (std::int64_t j = spec.mbcr_nodes(); j < spec.params.nodes_per_rack; ++j) {
        if (state.erased({rack, j}))
            throw ValidationError("cannot strip parities of rack " + std::to_string(rack + 1) + ": global node " +
                                  ClusterState::label({rack, j}) + " is erased");
        const auto& content = state.node({rack, j});
        c_l.insert(c_l.end(), content.begin(), content.end());
    }
    std::vector<std::optional<std::vector<Symbol>>> out;
    for (std::int64_t i = 0; i < spec.mbcr_nodes(); ++i) {
        if (state.erased({rack, i})) {
            out.emplace_back(std::nullopt);
            continue;
        }
        std::vector<Symbol> x = state.node({rack, i});
        const auto par = detail::first_rows_times(spec.parity[static_cast<std::size_t>(rack)][static_cast<std::size_t>(i)], a, c_l);
        for (std::size_t k = 0; k < a; ++k) x[k] = spec.field->sub(x[k], par[k]);
        out.emplace_back(std::move(x));
    }
    return out;
}

// Rank of the stacked functionals of the given nodes (B means decodable).
inline std::size_t collector_rank(const CodeSpec& spec, const std::vector<NodeId>& nodes) {
    std::vector<std::size_t> rows;
    const auto a = static_cast<std::size_t>(spec.alpha());
    for (const auto& id : nodes)
        for (std::size_t k = 0; k < a; ++k) rows.push_back(spec.flat(id) * a + k);
    return rank(spec.encoding.select_rows(rows));
}

// Recovers the message from k live nodes.
inline std::vector<Symbol> collect(const CodeSpec& spec, const ClusterState& state, const std::vector<NodeId>& nodes) {
    if (static_cast<std::int64_t>(nodes.size()) != spec.params.k)
        throw ValidationError("collect needs exactly k = " + std::to_string(spec.params.k) + " nodes, got " +
                              std::to_string(nodes.size()));
    std::set<NodeId> unique(nodes.begin(), nodes.end());
    if (unique.size() != nodes.size()) throw ValidationError("collect: node listed twice");
    const auto a = static_cast<std::size_t>(spec.alpha());
    const auto t = static_cast<std::size_t>(spec.global_nodes());
    std::vector<Symbol> values;
    bool globals_only = true;
    for (const auto& id : nodes) {
        const auto& content = state.node(id);
        values.insert(values.end(), content.begin(), content.end());
        globals_only = globals_only && !spec.is_mbcr_node(id.node);
    }
    try {
        if (globals_only) {
            // Plain global symbols: outer MDS decoding only.
            std::vector<std::size_t> positions;
            for (const auto& id : nodes)
                for (std::size_t k = 0; k < a; ++k)
                    positions.push_back((static_cast<std::size_t>(id.rack) * t + static_cast<std::size_t>(id.node - spec.mbcr_nodes())) * a + k);
            return solve_full_column_rank(transpose(spec.generator.select_columns(positions)), values);
        }
        std::vector<std::size_t> rows;
        for (const auto& id : nodes)
            for (std::size_t k = 0; k < a; ++k) rows.push_back(spec.flat(id) * a + k);
        return solve_full_column_rank(spec.encoding.select_rows(rows), values);
    } catch (const SingularMatrixError& e) {
        throw IntegrityError(std::string("code integrity failure: collector system is rank deficient: ") + e.what());
    }
}

struct Transfer {
    std::int64_t from_rack = 0;
    std::int64_t to_rack = 0;
    std::int64_t symbols = 0;
    friend bool operator==(const Transfer&, const Transfer&) = default;
};

struct IntraRackTraffic {
    std::int64_t rack = 0;
    std::int64_t symbols = 0;
    friend bool operator==(const IntraRackTraffic&, const IntraRackTraffic&) = default;
};

// Symbols moved during one repair. Only round1 and round2 cross racks.
struct RepairTranscript {
    std::vector<Transfer> round1;  // helper -> failed rack, beta1 each
    std::vector<Transfer> round2;  // failed -> failed rack, beta2 each
    std::vector<IntraRackTraffic> intra_rack;  // informational, never part of gamma

    std::int64_t cross_rack_download(std::int64_t rack) const {
        std::int64_t total = 0;
        for (const auto& t : round1)
            if (t.to_rack == rack) total += t.symbols;
        for (const auto& t : round2)
            if (t.to_rack == rack) total += t.symbols;
        return total;
    }

    friend bool operator==(const RepairTranscript&, const RepairTranscript&) = default;
};

struct FailurePattern {
    std::vector<std::int64_t> racks;               // f racks, 0-based
    std::vector<std::vector<std::int64_t>> nodes;  // e/f node indices per rack, 0-based
};

inline ClusterState erase(ClusterState state, const FailurePattern& pattern) {
    if (pattern.racks.size() != pattern.nodes.size()) throw ValidationError("one node list per failed rack is required");
    for (std::size_t a = 0; a < pattern.racks.size(); ++a)
        for (auto i : pattern.nodes[a]) state.erase({pattern.racks[a], i});
    return state;
}

struct RepairResult {
    ClusterState state;
    RepairTranscript transcript;
};

namespace detail {

// Failed racks (sorted) and their erased node indices; validates the uniform
// f x (e/f) shape.
inline FailurePattern failure_pattern(const CodeSpec& spec, const ClusterState& state) {
    FailurePattern pattern;
    for (const auto& id : state.erased_nodes()) {
        if (pattern.racks.empty() || pattern.racks.back() != id.rack) {
            pattern.racks.push_back(id.rack);
            pattern.nodes.emplace_back();
        }
        pattern.nodes.back().push_back(id.node);
    }
    const CodeParams& p = spec.params;
    bool uniform = static_cast<std::int64_t>(pattern.racks.size()) == p.f;
    for (const auto& nodes : pattern.nodes) uniform = uniform && static_cast<std::int64_t>(nodes.size()) == p.failures_per_rack;
    if (!uniform) {
        std::ostringstream os;
        os << "erasure pattern must be exactly e/f = " << p.failures_per_rack << " nodes in each of f = " << p.f
           << " racks; found";
        for (std::size_t a = 0; a < pattern.racks.size(); ++a) os << " rack " << pattern.racks[a] + 1 << ": " << pattern.nodes[a].size();
        if (pattern.racks.empty()) os << " no erasures";
        throw ValidationError(os.str());
    }
    return pattern;
}

}  // namespace detail

// Two-round cooperative repair of e erased nodes spread over f racks.
// Round 1: helper rack j sends u_l^T M_i v_j and v_l^T M_i^T u_j to each failed
// rack l. Round 2: failed rack l sends u_t^T M_i v_l to every other failed rack
// t. Failed racks then rebuild their nodes from the recovered MBCR symbols and
// the vector-MDS property of their local blocks.
inline RepairResult repair(const CodeSpec& spec, const ClusterState& damaged, std::vector<std::int64_t> helpers) {
    const CodeParams& p = spec.params;
    const Field& f = *spec.field;
    const FailurePattern pattern = detail::failure_pattern(spec, damaged);
    const auto& failed = pattern.racks;

    std::sort(helpers.begin(), helpers.end());
    if (static_cast<std::int64_t>(helpers.size()) != p.d)
        throw ValidationError("repair needs exactly d = " + std::to_string(p.d) + " helper racks, got " +
                              std::to_string(helpers.size()));
    if (std::adjacent_find(helpers.begin(), helpers.end()) != helpers.end()) throw ValidationError("repeated helper rack");
    for (auto j : helpers) {
        if (j < 0 || j >= p.r) throw ValidationError("helper rack " + std::to_string(j + 1) + " out of range");
        if (std::find(failed.begin(), failed.end(), j) != failed.end())
            throw ValidationError("helper rack " + std::to_string(j + 1) + " has failed nodes");
    }

    const auto ef = static_cast<std::size_t>(p.failures_per_rack);
    const auto d = static_cast<std::size_t>(p.d);
    const auto a = static_cast<std::size_t>(spec.alpha());
    RepairResult result{damaged, {}};
    RepairTranscript& tr = result.transcript;

    // Round 1, helper side: the relayer reads its rack, strips the parities
    // and completes each MBCR vector.
    struct Payload {
        std::int64_t from, to;
        std::vector<Symbol> symbols;
    };
    std::vector<Payload> round1;
    for (auto j : helpers) {
        const auto stripped = strip_parities(spec, j, damaged);
        tr.intra_rack.push_back({j, (p.nodes_per_rack - 1) * spec.alpha()});
        std::vector<std::vector<Symbol>> full;
        for (const auto& x : stripped) full.push_back(complete_mbcr(spec, j, *x));
        for (auto l : failed) {
            const auto u_l = spec.u_col(l);
            const auto v_l = spec.v_col(l);
            Payload msg{j, l, {}};
            for (std::size_t i = 0; i < ef; ++i) {
                const std::span<const Symbol> mv(full[i].data(), d);          // M_i v_j
                const std::span<const Symbol> mtu(full[i].data() + d, d + static_cast<std::size_t>(p.f));  // M_i^T u_j
                msg.symbols.push_back(dot(f, u_l, mv));
                msg.symbols.push_back(dot(f, v_l, mtu));
            }
            round1.push_back(std::move(msg));
        }
    }

    // Round 1, failed side: u_j^T M_i v_l for all helpers j gives M_i v_l.
    const Matrix u_helpers_t = transpose(spec.u.select_columns(std::vector<std::size_t>(helpers.begin(), helpers.end())));
    std::vector<std::vector<std::vector<Symbol>>> mv_of(failed.size());  // [failed idx][i] = M_i v_l
    for (std::size_t fi = 0; fi < failed.size(); ++fi) {
        for (std::size_t i = 0; i < ef; ++i) {
            std::vector<Symbol> rhs;
            for (const auto& msg : round1)
                if (msg.to == failed[fi]) rhs.push_back(msg.symbols[2 * i + 1]);
            mv_of[fi].push_back(solve(u_helpers_t, rhs));
        }
    }

    // Round 2: rack l sends u_t^T M_i v_l to every other failed rack t.
    std::vector<Payload> round2;
    for (std::size_t li = 0; li < failed.size(); ++li)
        for (std::size_t ti = 0; ti < failed.size(); ++ti) {
            if (li == ti) continue;
            const auto u_t = spec.u_col(failed[ti]);
            Payload msg{failed[li], failed[ti], {}};
            for (std::size_t i = 0; i < ef; ++i) msg.symbols.push_back(dot(f, u_t, mv_of[li][i]));
            round2.push_back(std::move(msg));
        }

    // Each failed rack t now has d + f projections of M_i^T u_t onto columns
    // of V: helpers, peers and itself.
    for (std::size_t ti = 0; ti < failed.size(); ++ti) {
        const std::int64_t t = failed[ti];
        const auto u_t = spec.u_col(t);
        std::vector<std::size_t> cols;
        std::vector<std::vector<Symbol>> rhs(ef);
        for (const auto& msg : round1)
            if (msg.to == t) {
                cols.push_back(static_cast<std::size_t>(msg.from));
                for (std::size_t i = 0; i < ef; ++i) rhs[i].push_back(msg.symbols[2 * i]);
            }
        for (const auto& msg : round2)
            if (msg.to == t) {
                cols.push_back(static_cast<std::size_t>(msg.from));
                for (std::size_t i = 0; i < ef; ++i) rhs[i].push_back(msg.symbols[i]);
            }
        cols.push_back(static_cast<std::size_t>(t));
        for (std::size_t i = 0; i < ef; ++i) rhs[i].push_back(dot(f, u_t, mv_of[ti][i]));
        const Matrix v_sys = transpose(spec.v.select_columns(cols));

        std::vector<std::vector<Symbol>> mbcr(ef);  // first alpha symbols of [M_i v_t ; M_i^T u_t]
        for (std::size_t i = 0; i < ef; ++i) {
            const auto mtu = solve(v_sys, rhs[i]);
            mbcr[i] = mv_of[ti][i];
            mbcr[i].insert(mbcr[i].end(), mtu.begin(), mtu.end());
            mbcr[i].resize(a);
        }

        // Inside the rack: surviving MBCR nodes expose their parity block,
        // surviving global nodes their content; n/r - e/f blocks in total.
        const auto& lost = pattern.nodes[ti];
        auto is_lost = [&](std::int64_t i) { return std::find(lost.begin(), lost.end(), i) != lost.end(); };
        std::vector<std::pair<std::size_t, std::vector<Symbol>>> known;
        const auto globals = static_cast<std::size_t>(spec.global_nodes());
        for (std::int64_t j = spec.mbcr_nodes(); j < p.nodes_per_rack; ++j)
            if (!is_lost(j)) known.emplace_back(static_cast<std::size_t>(j - spec.mbcr_nodes()), damaged.node({t, j}));
        for (std::int64_t i = 0; i < spec.mbcr_nodes(); ++i)
            if (!is_lost(i)) {
                std::vector<Symbol> par = damaged.node({t, i});
                for (std::size_t k = 0; k < a; ++k) par[k] = f.sub(par[k], mbcr[static_cast<std::size_t>(i)][k]);
                known.emplace_back(globals + static_cast<std::size_t>(i), std::move(par));
            }
        const auto blocks = recover_blocks(spec, t, known);
        for (auto i : lost) {
            if (spec.is_mbcr_node(i)) {
                std::vector<Symbol> x = mbcr[static_cast<std::size_t>(i)];
                const auto& par = blocks[globals + static_cast<std::size_t>(i)];
                for (std::size_t k = 0; k < a; ++k) x[k] = f.add(x[k], par[k]);
                result.state.set_node({t, i}, std::move(x));
            } else {
                result.state.set_node({t, i}, blocks[static_cast<std::size_t>(i - spec.mbcr_nodes())]);
            }
        }
        tr.intra_rack.push_back({t, static_cast<std::int64_t>(known.size() + lost.size()) * spec.alpha()});
    }

    for (const auto& msg : round1) tr.round1.push_back({msg.from, msg.to, static_cast<std::int64_t>(msg.symbols.size())});
    for (const auto& msg : round2) tr.round2.push_back({msg.from, msg.to, static_cast<std::int64_t>(msg.symbols.size())});
    auto by_rack = [](const auto& x, const auto& y) { return std::tie(x.from_rack, x.to_rack) < std::tie(y.from_rack, y.to_rack); };
    std::sort(tr.round1.begin(), tr.round1.end(), by_rack);
    std::sort(tr.round2.begin(), tr.round2.end(), by_rack);
    std::sort(tr.intra_rack.begin(), tr.intra_rack.end(), [](const auto& x, const auto& y) { return x.rack < y.rack; });
    return result;
}

namespace detail {

inline std::vector<Symbol> distinct_points(const Field& f, std::size_t count, bool nonzero, Rng& rng) {
    std::set<Symbol> seen;
    std::vector<Symbol> out;
    const std::uint64_t span = f.order() - (nonzero ? 1 : 0);
    if (count > span) throw ValidationError("field " + f.spec().name() + " too small for " + std::to_string(count) + " distinct points");
    while (out.size() < count) {
        const auto s = static_cast<Symbol>(rng.below(span) + (nonzero ? 1 : 0));
        if (seen.insert(s).second) out.push_back(s);
    }
    return out;
}

constexpr std::uint64_t kExhaustiveSubsetLimit = 10'000;
constexpr std::size_t kSampledCollectors = 1'000;

// Every B columns of G invertible: exhaustive for small C(N, B), sampled otherwise.
inline bool verify_mds(const Matrix& g, std::uint64_t seed) {
    const std::size_t b = g.rows(), n = g.cols();
    auto ok = [&](const std::vector<std::size_t>& cols) { return is_invertible(g.select_columns(cols)); };
    if (binomial(n, b) <= kExhaustiveSubsetLimit) return for_each_combination(n, b, ok);
    Rng rng(seed);
    for (std::size_t s = 0; s < kSampledCollectors; ++s)
        if (!ok(rng.subset(n, b))) return false;
    return true;
}

inline bool verify_vector_mds(const CodeSpec& spec, std::int64_t rack) {
    const auto a = static_cast<std::size_t>(spec.alpha());
    const auto t = static_cast<std::size_t>(spec.global_nodes());
    const auto blocks = static_cast<std::size_t>(spec.params.nodes_per_rack);
    const Matrix q = local_generator(spec, rack);
    return for_each_combination(blocks, t, [&](const std::vector<std::size_t>& ids) {
        return rank(q.select_rows(block_rows(ids, a))) == t * a;
    });
}

// Returns the first k-subset whose stacked functionals have rank < B.
inline std::optional<std::vector<NodeId>> find_rank_deficient_collector(const CodeSpec& spec, std::uint64_t seed) {
    const CodeParams& p = spec.params;
    auto to_nodes = [&](const std::vector<std::size_t>& flat) {
        std::vector<NodeId> ids;
        for (auto x : flat) ids.push_back({static_cast<std::int64_t>(x) / p.nodes_per_rack, static_cast<std::int64_t>(x) % p.nodes_per_rack});
        return ids;
    };
    std::optional<std::vector<NodeId>> bad;
    auto ok = [&](const std::vector<std::size_t>& flat) {
        auto ids = to_nodes(flat);
        if (collector_rank(spec, ids) == static_cast<std::size_t>(spec.file_size())) return true;
        bad = std::move(ids);
        return false;
    };
    const auto n = static_cast<std::size_t>(p.n), k = static_cast<std::size_t>(p.k);
    if (binomial(n, k) <= kExhaustiveSubsetLimit) {
        for_each_combination(n, k, ok);
        return bad;
    }
    Rng rng(seed);
    for (std::size_t s = 0; s < kSampledCollectors && !bad; ++s) ok(rng.subset(n, k));
    return bad;
}

inline FieldSpec default_field(const ConstructionLayout& layout, const CodeParams& p) {
    const bool fits = layout.global_symbols <= 255 && p.r <= 255 && p.nodes_per_rack <= 256;
    return fits ? FieldSpec::gf256() : FieldSpec::gf65536();
}

inline void check_field_size(const Field& f, const ConstructionLayout& layout, const CodeParams& p) {
    auto need = [&](bool ok, const std::string& what) {
        if (!ok) throw ValidationError("field " + f.spec().name() + " too small: " + what);
    };
    need(static_cast<std::uint64_t>(layout.global_symbols) <= max_mds_length(f),
         "outer MDS code length N = " + std::to_string(layout.global_symbols));
    need(static_cast<std::uint64_t>(p.r) <= f.order() - 1, "needs r distinct nonzero evaluation points");
    need(static_cast<std::uint64_t>(p.nodes_per_rack) <= f.order(), "needs n/r distinct parity points");
}

inline std::string summarize(const std::vector<std::string>& lines) {
    constexpr std::size_t shown = 4;
    std::string out;
    for (std::size_t i = 0; i < lines.size() && i < shown; ++i) out += "\n  " + lines[i];
    if (lines.size() > shown) out += "\n  ... " + std::to_string(lines.size() - shown) + " more";
    return out;
}

inline CodeSpec try_build(const CodeParams& p, const FieldPtr& field, std::uint64_t seed, const BuildOptions& options) {
    std::vector<std::string> diagnostics;
    const ConstructionLayout layout = construction_params(p);
    const auto a = static_cast<std::size_t>(layout.alpha);
    const auto t = static_cast<std::size_t>(p.global_nodes_per_rack());
    const auto ef = static_cast<std::size_t>(p.failures_per_rack);
    const auto rows = static_cast<std::size_t>(2 * p.d + p.f);

    Matrix generator = mds_generator(field, static_cast<std::size_t>(layout.file_size), static_cast<std::size_t>(layout.global_symbols));
    if (!verify_mds(generator, seed)) throw IntegrityError("outer generator failed the MDS check");

    Rng rng(seed);
    for (int attempt = 1; attempt <= options.max_resamples; ++attempt) {
        const auto u_points = distinct_points(*field, static_cast<std::size_t>(p.r), true, rng);
        const auto v_points = distinct_points(*field, static_cast<std::size_t>(p.r), true, rng);
        CodeSpec spec{p,
                      layout,
                      field,
                      seed,
                      options.parity,
                      attempt,
                      generator,
                      vandermonde(field, static_cast<std::size_t>(p.d), u_points),
                      vandermonde(field, static_cast<std::size_t>(p.d + p.f), v_points),
                      {},
                      Matrix(field, 0, 0)};
        if (!check_U_property(spec.u, static_cast<std::size_t>(p.m), static_cast<std::size_t>(p.d)) ||
            !check_V_property(spec.v, static_cast<std::size_t>(p.m), static_cast<std::size_t>(p.d), static_cast<std::size_t>(p.f))) {
            diagnostics.push_back("attempt " + std::to_string(attempt) + ": U/V submatrix check failed");
            continue;
        }
        for (std::int64_t l = 0; l < p.r; ++l) {
            std::vector<Matrix> maps;
            Matrix lambda(field, ef, t);
            if (options.parity == ParityKind::BlockScalar) {
                const auto pts = distinct_points(*field, ef + t, false, rng);
                lambda = cauchy(field, std::span(pts).subspan(0, ef), std::span(pts).subspan(ef));
            }
            for (std::size_t i = 0; i < ef; ++i) {
                Matrix pm(field, rows, t * a);
                if (options.parity == ParityKind::BlockScalar) {
                    for (std::size_t blk = 0; blk < t; ++blk)
                        for (std::size_t k = 0; k < a; ++k) pm(k, blk * a + k) = lambda(i, blk);
                } else if (options.parity == ParityKind::Dense) {
                    for (std::size_t row = 0; row < a; ++row)
                        for (std::size_t col = 0; col < t * a; ++col) pm(row, col) = static_cast<Symbol>(rng.below(field->order()));
                }
                maps.push_back(std::move(pm));
            }
            spec.parity.push_back(std::move(maps));
        }
        bool ok = true;
        for (std::int64_t l = 0; l < p.r && ok; ++l) {
            for (const auto& pm : spec.parity[static_cast<std::size_t>(l)])
                if (!pm.block(rows - 1, 0, 1, pm.cols()).is_zero()) ok = false;
            if (ok && options.parity != ParityKind::Zero && !verify_vector_mds(spec, l)) {
                diagnostics.push_back("attempt " + std::to_string(attempt) + ": rack " + std::to_string(l + 1) + " parities are not vector-MDS");
                ok = false;
            }
        }
        if (!ok) continue;

        // Encoding matrix column b is the encoding of the b-th unit message.
        const auto b_dim = static_cast<std::size_t>(layout.file_size);
        spec.encoding = Matrix(field, static_cast<std::size_t>(p.n) * a, b_dim);
        std::vector<Symbol> unit(b_dim, 0);
        for (std::size_t b = 0; b < b_dim; ++b) {
            unit[b] = 1;
            const ClusterState st = encode(spec, unit);
            unit[b] = 0;
            for (std::int64_t l = 0; l < p.r; ++l)
                for (std::int64_t i = 0; i < p.nodes_per_rack; ++i) {
                    const auto& content = st.node({l, i});
                    for (std::size_t k = 0; k < a; ++k) spec.encoding(spec.flat({l, i}) * a + k, b) = content[k];
                }
        }
        if (options.parity != ParityKind::Zero) {
            if (auto bad = find_rank_deficient_collector(spec, seed ^ 0xC011EC7ull)) {
                std::string line = "attempt " + std::to_string(attempt) + ": collector {";
                for (std::size_t x = 0; x < bad->size(); ++x) line += (x ? " " : "") + ClusterState::label((*bad)[x]);
                diagnostics.push_back(line + "} has rank " + std::to_string(collector_rank(spec, *bad)) + " < B = " +
                                      std::to_string(layout.file_size));
                continue;
            }
        }
        return spec;
    }
    throw IntegrityError("code construction over " + field->spec().name() + " exhausted " +
                         std::to_string(options.max_resamples) + " resamples:" + summarize(diagnostics));
}

}  // namespace detail

// Builds and verifies all generator material for the parameters. Deterministic
// in (params, field, seed, parity kind).
inline CodeSpec build_code(const CodeParams& p, std::uint64_t seed, const BuildOptions& options = {}) {
    if (p.global_nodes_per_rack() < 1)
        throw ValidationError("e/f = n/r leaves no global-symbol nodes in a rack; the construction needs n/r - e/f >= 1");
    const ConstructionLayout layout = construction_params(p);
    if (layout.file_size > layout.global_symbols)
        throw ValidationError("construction needs B <= N: B = " + std::to_string(layout.file_size) + " exceeds the " +
                              std::to_string(layout.global_symbols) + " global symbols for (" + p.to_string() + ")");
    if (options.field) {
        const FieldPtr field = make_field(*options.field);
        detail::check_field_size(*field, layout, p);
        return detail::try_build(p, field, seed, options);
    }
    const FieldSpec first = detail::default_field(layout, p);
    if (first == FieldSpec::gf256()) {
        try {
            const FieldPtr field = make_field(first);
            detail::check_field_size(*field, layout, p);
            return detail::try_build(p, field, seed, options);
        } catch (const IntegrityError&) {
            // fall through to the larger field
        }
    }
    const FieldPtr field = make_field(FieldSpec::gf65536());
    detail::check_field_size(*field, layout, p);
    return detail::try_build(p, field, seed, options);
}

}  // namespace rackcoop
