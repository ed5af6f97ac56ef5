#pragma once

#include <algorithm>
#include <cstdint>
#include <limits>
#include <optional>
#include <queue>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rackcoop/error.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/rational.hpp"
#include "rackcoop/tradeoff.hpp"
#include "rackcoop/util.hpp"

namespace rackcoop {

class UnboundedFlowError : public Error {
public:
    using Error::Error;
};

// One repair stage: f racks regenerate e/f nodes each, downloading from d
// helper racks. Rack and node indices are 0-based; node 0 is the relayer.
struct RepairStage {
    std::vector<std::int64_t> group;                // f racks
    std::vector<std::vector<std::int64_t>> failed;  // e/f node indices per group rack
    std::vector<std::int64_t> helpers;              // d racks, disjoint from group
};

using FailureHistory = std::vector<RepairStage>;

// A collected node. Without a stage it names the rack's latest incarnation;
// with one, the stage must be that latest incarnation.
struct CollectorNode {
    std::int64_t rack = 0;
    std::int64_t node = 0;
    std::optional<std::int64_t> stage;
};

inline void validate_stage(const CodeParams& p, const RepairStage& st) {
    auto in_range = [](std::int64_t v, std::int64_t hi) { return v >= 0 && v < hi; };
    auto distinct = [](std::vector<std::int64_t> v) {
        std::sort(v.begin(), v.end());
        return std::adjacent_find(v.begin(), v.end()) == v.end();
    };
    if (static_cast<std::int64_t>(st.group.size()) != p.f)
        throw ValidationError("repair group must contain f = " + std::to_string(p.f) + " racks");
    if (static_cast<std::int64_t>(st.helpers.size()) != p.d)
        throw ValidationError("repair needs exactly d = " + std::to_string(p.d) + " helper racks, got " +
                              std::to_string(st.helpers.size()));
    if (st.failed.size() != st.group.size()) throw ValidationError("one failed-node list per group rack is required");
    if (!distinct(st.group) || !distinct(st.helpers)) throw ValidationError("repeated rack in repair group or helpers");
    for (auto h : st.group) {
        if (!in_range(h, p.r)) throw ValidationError("rack " + std::to_string(h) + " out of range");
        if (std::find(st.helpers.begin(), st.helpers.end(), h) != st.helpers.end())
            throw ValidationError("helper rack " + std::to_string(h) + " is also in the repair group");
    }
    for (auto j : st.helpers)
        if (!in_range(j, p.r)) throw ValidationError("helper rack " + std::to_string(j) + " out of range");
    for (const auto& nodes : st.failed) {
        if (static_cast<std::int64_t>(nodes.size()) != p.failures_per_rack)
            throw ValidationError("each failed rack must lose exactly e/f = " + std::to_string(p.failures_per_rack) + " nodes");
        if (!distinct(nodes)) throw ValidationError("repeated failed node index");
        for (auto i : nodes)
            if (!in_range(i, p.nodes_per_rack)) throw ValidationError("node index " + std::to_string(i) + " out of range");
    }
}

enum class VertexKind { Source, Sink, Out, Virt, Mid };

struct Vertex {
    VertexKind kind;
    std::int64_t rack = -1;
    std::int64_t node = -1;
    std::int64_t stage = 0;

    // Out_h_i_s, Virt_h_s, Mid_h_s with 1-based rack and node numbers.
    std::string name() const {
        switch (kind) {
            case VertexKind::Source: return "S";
            case VertexKind::Sink: return "T";
            case VertexKind::Out:
                return "Out_" + std::to_string(rack + 1) + "_" + std::to_string(node + 1) + "_" + std::to_string(stage);
            case VertexKind::Virt: return "Virt_" + std::to_string(rack + 1) + "_" + std::to_string(stage);
            case VertexKind::Mid: return "Mid_" + std::to_string(rack + 1) + "_" + std::to_string(stage);
        }
        return "?";
    }
};

struct FlowEdge {
    std::size_t from;
    std::size_t to;
    std::optional<Rational> capacity;  // nullopt is infinite
};

class FlowGraph {
public:
    FlowGraph() {
        source_ = add_vertex({VertexKind::Source});
        sink_ = add_vertex({VertexKind::Sink});
    }

    std::size_t add_vertex(Vertex v) {
        vertices_.push_back(v);
        return vertices_.size() - 1;
    }

    void add_edge(std::size_t from, std::size_t to, std::optional<Rational> capacity) {
        edges_.push_back({from, to, std::move(capacity)});
    }

    std::size_t source() const noexcept { return source_; }
    std::size_t sink() const noexcept { return sink_; }
    const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
    const std::vector<FlowEdge>& edges() const noexcept { return edges_; }

    std::size_t in_degree(std::size_t v) const {
        return static_cast<std::size_t>(std::count_if(edges_.begin(), edges_.end(), [v](const auto& e) { return e.to == v; }));
    }

    std::vector<const FlowEdge*> in_edges(std::size_t v) const {
        std::vector<const FlowEdge*> out;
        for (const auto& e : edges_)
            if (e.to == v) out.push_back(&e);
        return out;
    }

    std::optional<std::size_t> find(const std::string& name) const {
        for (std::size_t i = 0; i < vertices_.size(); ++i)
            if (vertices_[i].name() == name) return i;
        return std::nullopt;
    }

    bool is_acyclic() const {
        std::vector<std::size_t> indeg(vertices_.size(), 0);
        std::vector<std::vector<std::size_t>> adj(vertices_.size());
        for (const auto& e : edges_) {
            adj[e.from].push_back(e.to);
            ++indeg[e.to];
        }
        std::vector<std::size_t> ready;
        for (std::size_t v = 0; v < indeg.size(); ++v)
            if (indeg[v] == 0) ready.push_back(v);
        std::size_t seen = 0;
        while (!ready.empty()) {
            const std::size_t v = ready.back();
            ready.pop_back();
            ++seen;
            for (auto w : adj[v])
                if (--indeg[w] == 0) ready.push_back(w);
        }
        return seen == vertices_.size();
    }

    std::string to_dot() const {
        std::ostringstream os;
        os << "digraph ifg {\n  rankdir=LR;\n";
        for (const auto& e : edges_)
            os << "  " << vertices_[e.from].name() << " -> " << vertices_[e.to].name() << " [label=\""
               << (e.capacity ? to_string(*e.capacity) : std::string("inf")) << "\"];\n";
        os << "}\n";
        return os.str();
    }

private:
    std::vector<Vertex> vertices_;
    std::vector<FlowEdge> edges_;
    std::size_t source_ = 0;
    std::size_t sink_ = 0;
};

// Information flow graph for a failure history and a collector of k nodes.
inline FlowGraph build_flow_graph(const CodeParams& p, const Rational& alpha, const Rational& beta1,
                                  const Rational& beta2, const FailureHistory& history,
                                  const std::vector<CollectorNode>& collector) {
    const std::int64_t per_rack = p.nodes_per_rack;
    FlowGraph g;
    std::vector<std::vector<std::size_t>> out(p.r, std::vector<std::size_t>(per_rack));
    std::vector<std::int64_t> incarnation(p.r, 0);

    auto add_rack = [&](std::int64_t h, std::int64_t stage) {
        for (std::int64_t i = 0; i < per_rack; ++i) out[h][i] = g.add_vertex({VertexKind::Out, h, i, stage});
        for (std::int64_t i = 1; i < per_rack; ++i) g.add_edge(out[h][i], out[h][0], std::nullopt);
    };

    for (std::int64_t h = 0; h < p.r; ++h) {
        add_rack(h, 0);
        for (std::int64_t i = 0; i < per_rack; ++i) g.add_edge(g.source(), out[h][i], alpha);
    }

    for (std::size_t s = 0; s < history.size(); ++s) {
        const RepairStage& st = history[s];
        validate_stage(p, st);
        const auto stage = static_cast<std::int64_t>(s + 1);
        std::vector<std::size_t> virt(st.group.size()), mid(st.group.size());
        for (std::size_t a = 0; a < st.group.size(); ++a) {
            virt[a] = g.add_vertex({VertexKind::Virt, st.group[a], -1, stage});
            mid[a] = g.add_vertex({VertexKind::Mid, st.group[a], -1, stage});
        }
        for (std::size_t a = 0; a < st.group.size(); ++a) {
            for (auto j : st.helpers) g.add_edge(out[j][0], virt[a], beta1);
            g.add_edge(virt[a], mid[a], std::nullopt);
            for (std::size_t b = 0; b < st.group.size(); ++b)
                if (b != a) g.add_edge(virt[b], mid[a], beta2);
        }
        for (std::size_t a = 0; a < st.group.size(); ++a) {
            const std::int64_t h = st.group[a];
            const auto& failed = st.failed[a];
            const std::vector<std::size_t> previous = out[h];
            add_rack(h, stage);
            for (std::int64_t i = 0; i < per_rack; ++i) {
                if (std::find(failed.begin(), failed.end(), i) != failed.end()) {
                    g.add_edge(mid[a], out[h][i], alpha);
                } else {
                    g.add_edge(previous[i], virt[a], alpha);
                    g.add_edge(previous[i], out[h][i], std::nullopt);
                }
            }
            incarnation[h] = stage;
        }
    }

    if (static_cast<std::int64_t>(collector.size()) != p.k)
        throw ValidationError("collector must select exactly k = " + std::to_string(p.k) + " nodes");
    std::set<std::pair<std::int64_t, std::int64_t>> seen;
    for (const auto& c : collector) {
        if (c.rack < 0 || c.rack >= p.r || c.node < 0 || c.node >= per_rack)
            throw ValidationError("collector node out of range");
        if (!seen.insert({c.rack, c.node}).second) throw ValidationError("collector selects a node twice");
        if (c.stage && *c.stage != incarnation[c.rack])
            throw ValidationError("collector references stale incarnation " + std::to_string(*c.stage) + " of rack " +
                                  std::to_string(c.rack + 1) + " (latest is " + std::to_string(incarnation[c.rack]) + ")");
        g.add_edge(out[c.rack][c.node], g.sink(), std::nullopt);
    }
    return g;
}

namespace detail {

// Dinic's algorithm on integer capacities.
class Dinic {
public:
    explicit Dinic(std::size_t n) : adj_(n), level_(n), next_(n) {}

    void add_edge(std::size_t from, std::size_t to, std::int64_t cap) {
        adj_[from].push_back(arcs_.size());
        arcs_.push_back({to, cap});
        adj_[to].push_back(arcs_.size());
        arcs_.push_back({from, 0});
    }

    std::int64_t run(std::size_t s, std::size_t t) {
        std::int64_t flow = 0;
        while (bfs(s, t)) {
            std::fill(next_.begin(), next_.end(), 0);
            while (std::int64_t pushed = dfs(s, t, std::numeric_limits<std::int64_t>::max())) flow += pushed;
        }
        return flow;
    }

private:
    struct Arc {
        std::size_t to;
        std::int64_t cap;
    };

    bool bfs(std::size_t s, std::size_t t) {
        std::fill(level_.begin(), level_.end(), -1);
        std::queue<std::size_t> q;
        level_[s] = 0;
        q.push(s);
        while (!q.empty()) {
            const std::size_t v = q.front();
            q.pop();
            for (auto id : adj_[v]) {
                const Arc& a = arcs_[id];
                if (a.cap > 0 && level_[a.to] < 0) {
                    level_[a.to] = level_[v] + 1;
                    q.push(a.to);
                }
            }
        }
        return level_[t] >= 0;
    }

    std::int64_t dfs(std::size_t v, std::size_t t, std::int64_t limit) {
        if (v == t) return limit;
        for (std::size_t& i = next_[v]; i < adj_[v].size(); ++i) {
            const std::size_t id = adj_[v][i];
            Arc& a = arcs_[id];
            if (a.cap <= 0 || level_[a.to] != level_[v] + 1) continue;
            if (std::int64_t pushed = dfs(a.to, t, std::min(limit, a.cap))) {
                a.cap -= pushed;
                arcs_[id ^ 1].cap += pushed;
                return pushed;
            }
        }
        return 0;
    }

    std::vector<std::vector<std::size_t>> adj_;
    std::vector<Arc> arcs_;
    std::vector<int> level_;
    std::vector<std::size_t> next_;
};

}  // namespace detail

// Exact S-T max-flow. Finite capacities are scaled to integers by the least
// common denominator; infinite edges get a sentinel above the sum of all
// finite capacities.
inline Rational max_flow(const FlowGraph& g) {
    BigInt lcd = 1;
    for (const auto& e : g.edges())
        if (e.capacity) {
            if (*e.capacity < 0) throw ValidationError("negative capacity");
            const BigInt den = denominator_of(*e.capacity);
            lcd = lcd / boost::multiprecision::gcd(lcd, den) * den;
        }
    BigInt total = 0;
    std::vector<BigInt> scaled;
    scaled.reserve(g.edges().size());
    for (const auto& e : g.edges()) {
        BigInt c = e.capacity ? BigInt(numerator_of(*e.capacity) * (lcd / denominator_of(*e.capacity))) : BigInt(0);
        total += c;
        scaled.push_back(std::move(c));
    }
    const BigInt sentinel = total + 1;
    if (sentinel > BigInt(std::numeric_limits<std::int64_t>::max() / 4))
        throw ValidationError("capacities too large for exact max-flow");
    const auto inf = sentinel.convert_to<std::int64_t>();

    detail::Dinic dinic(g.vertices().size());
    for (std::size_t i = 0; i < g.edges().size(); ++i) {
        const auto& e = g.edges()[i];
        dinic.add_edge(e.from, e.to, e.capacity ? scaled[i].convert_to<std::int64_t>() : inf);
    }
    const std::int64_t flow = dinic.run(g.source(), g.sink());
    if (flow >= inf) throw UnboundedFlowError("S is connected to T through infinite-capacity edges only");
    return Rational(BigInt(flow), lcd);
}

struct MinCutScenario {
    std::string label;
    FailureHistory history;
    std::vector<CollectorNode> collector;
};

struct WorstCaseMinCut {
    Rational value;
    MinCutScenario witness;
    std::vector<std::pair<Composition, Rational>> canonical;  // per-composition flow values
    std::size_t scenarios = 0;
};

struct MinCutOptions {
    std::size_t random_scenarios = 64;
    std::uint64_t seed = 1;
};

// The history achieving the bound for composition u: racks 0..m-1 are
// collected, u_i of them regenerating in stage i with the previously collected
// racks among the helpers; the collector also takes k - m n/r non-relayer
// nodes of rack m.
inline MinCutScenario canonical_scenario(const CodeParams& p, const Composition& u) {
    const std::int64_t partial = p.k - p.m * p.nodes_per_rack;
    const std::int64_t partial_rack = partial > 0 ? p.m : -1;
    MinCutScenario sc;
    sc.label = "composition " + to_string(u);
    std::int64_t collected = 0;
    for (std::int64_t part : u) {
        RepairStage st;
        std::vector<bool> used(p.r, false);
        for (std::int64_t h = collected; h < collected + part; ++h) {
            st.group.push_back(h);
            used[h] = true;
        }
        // Fillers and extra helpers: never-collected racks first, then the
        // partially collected rack, then racks collected in later stages.
        std::vector<std::int64_t> pool;
        for (std::int64_t h = p.m; h < p.r; ++h)
            if (h != partial_rack) pool.push_back(h);
        if (partial_rack >= 0) pool.push_back(partial_rack);
        for (std::int64_t h = collected + part; h < p.m; ++h) pool.push_back(h);
        auto take = [&](std::vector<std::int64_t>& into, std::int64_t count) {
            for (auto h : pool) {
                if (count == 0) break;
                if (used[h]) continue;
                used[h] = true;
                into.push_back(h);
                --count;
            }
            if (count != 0) throw IntegrityError("not enough racks for canonical scenario");
        };
        take(st.group, p.f - part);
        for (std::int64_t h = 0; h < collected; ++h) {
            st.helpers.push_back(h);
            used[h] = true;
        }
        take(st.helpers, p.d - collected);
        for (std::size_t a = 0; a < st.group.size(); ++a) {
            std::vector<std::int64_t> nodes(p.failures_per_rack);
            for (std::int64_t i = 0; i < p.failures_per_rack; ++i) nodes[i] = i;
            st.failed.push_back(std::move(nodes));
        }
        sc.history.push_back(std::move(st));
        collected += part;
    }
    for (std::int64_t h = 0; h < p.m; ++h)
        for (std::int64_t i = 0; i < p.nodes_per_rack; ++i) sc.collector.push_back({h, i, std::nullopt});
    for (std::int64_t i = 1; i <= partial; ++i) sc.collector.push_back({partial_rack, i, std::nullopt});
    return sc;
}

inline MinCutScenario random_scenario(const CodeParams& p, std::int64_t max_stages, Rng& rng, std::size_t index) {
    MinCutScenario sc;
    sc.label = "random #" + std::to_string(index);
    const auto stages = static_cast<std::int64_t>(1 + rng.below(static_cast<std::uint64_t>(std::max<std::int64_t>(max_stages, 1))));
    for (std::int64_t s = 0; s < stages; ++s) {
        RepairStage st;
        std::vector<std::size_t> order(static_cast<std::size_t>(p.r));
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::int64_t a = 0; a < p.f; ++a) st.group.push_back(static_cast<std::int64_t>(order[a]));
        std::vector<std::int64_t> rest;
        for (std::size_t a = static_cast<std::size_t>(p.f); a < order.size(); ++a) rest.push_back(static_cast<std::int64_t>(order[a]));
        for (auto idx : rng.subset(rest.size(), static_cast<std::size_t>(p.d))) st.helpers.push_back(rest[idx]);
        for (std::int64_t a = 0; a < p.f; ++a) {
            std::vector<std::int64_t> nodes;
            for (auto i : rng.subset(static_cast<std::size_t>(p.nodes_per_rack), static_cast<std::size_t>(p.failures_per_rack)))
                nodes.push_back(static_cast<std::int64_t>(i));
            st.failed.push_back(std::move(nodes));
        }
        sc.history.push_back(std::move(st));
    }
    if (rng.below(2) == 0) {
        // Whole racks first, remainder from non-relayer nodes of one more rack.
        const auto racks = rng.subset(static_cast<std::size_t>(p.r), static_cast<std::size_t>(p.m + 1));
        std::vector<std::size_t> order = racks;
        rng.shuffle(order);
        for (std::int64_t a = 0; a < p.m; ++a)
            for (std::int64_t i = 0; i < p.nodes_per_rack; ++i) sc.collector.push_back({static_cast<std::int64_t>(order[a]), i, std::nullopt});
        const std::int64_t partial = p.k - p.m * p.nodes_per_rack;
        if (partial > 0) {
            const auto last = static_cast<std::int64_t>(order[static_cast<std::size_t>(p.m)]);
            for (auto i : rng.subset(static_cast<std::size_t>(p.nodes_per_rack - 1), static_cast<std::size_t>(partial)))
                sc.collector.push_back({last, static_cast<std::int64_t>(i + 1), std::nullopt});
        }
    } else {
        for (auto id : rng.subset(static_cast<std::size_t>(p.n), static_cast<std::size_t>(p.k)))
            sc.collector.push_back({static_cast<std::int64_t>(id) / p.nodes_per_rack, static_cast<std::int64_t>(id) % p.nodes_per_rack, std::nullopt});
    }
    return sc;
}

// Minimum max-flow over the canonical scenario of every composition with at
// most max_stages parts, plus seeded random histories and collectors.
inline WorstCaseMinCut worst_case_mincut(const CodeParams& p, const Rational& alpha, const Rational& beta1,
                                         const Rational& beta2, std::int64_t max_stages, MinCutOptions options = {}) {
    if (max_stages < 1) throw ValidationError("--max-stages must be at least 1");
    WorstCaseMinCut result;
    bool have = false;
    auto consider = [&](MinCutScenario sc) {
        const Rational v = max_flow(build_flow_graph(p, alpha, beta1, beta2, sc.history, sc.collector));
        ++result.scenarios;
        if (!have || v < result.value) {
            result.value = v;
            result.witness = std::move(sc);
            have = true;
        }
        return v;
    };
    for (const auto& u : compositions(p.m, p.f)) {
        if (static_cast<std::int64_t>(u.size()) > max_stages) continue;
        result.canonical.emplace_back(u, consider(canonical_scenario(p, u)));
    }
    Rng rng(options.seed);
    for (std::size_t i = 0; i < options.random_scenarios; ++i) consider(random_scenario(p, max_stages, rng, i));
    return result;
}

inline std::string describe(const MinCutScenario& sc) {
    std::ostringstream os;
    os << sc.label << "\n";
    for (std::size_t s = 0; s < sc.history.size(); ++s) {
        const auto& st = sc.history[s];
        os << "  stage " << s + 1 << ": group {";
        for (std::size_t a = 0; a < st.group.size(); ++a) {
            os << (a ? ", " : "") << st.group[a] + 1 << ":[";
            for (std::size_t i = 0; i < st.failed[a].size(); ++i) os << (i ? "," : "") << st.failed[a][i] + 1;
            os << "]";
        }
        os << "} helpers {";
        for (std::size_t a = 0; a < st.helpers.size(); ++a) os << (a ? "," : "") << st.helpers[a] + 1;
        os << "}\n";
    }
    os << "  collector {";
    for (std::size_t a = 0; a < sc.collector.size(); ++a)
        os << (a ? " " : "") << sc.collector[a].rack + 1 << ":" << sc.collector[a].node + 1;
    os << "}\n";
    return os.str();
}

}  // namespace rackcoop
