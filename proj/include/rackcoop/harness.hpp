#pragma once

#include <openssl/evp.h>

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rackcoop/codec.hpp"
#include "rackcoop/error.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/util.hpp"

namespace rackcoop {

namespace fs = std::filesystem;

inline constexpr int kLayoutVersion = 1;

class Sha256 {
public:
    Sha256() : ctx_(EVP_MD_CTX_new(), &EVP_MD_CTX_free) {
        if (!ctx_ || EVP_DigestInit_ex(ctx_.get(), EVP_sha256(), nullptr) != 1) throw Error("SHA-256 initialisation failed");
    }

    Sha256& update(std::span<const std::uint8_t> bytes) {
        if (EVP_DigestUpdate(ctx_.get(), bytes.data(), bytes.size()) != 1) throw Error("SHA-256 update failed");
        return *this;
    }

    Sha256& update(std::string_view text) {
        return update(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

    Sha256& update_u64(std::uint64_t v) {
        std::uint8_t le[8];
        for (int i = 0; i < 8; ++i) le[i] = static_cast<std::uint8_t>(v >> (8 * i));
        return update(std::span<const std::uint8_t>(le, 8));
    }

    std::string hex() {
        unsigned char md[EVP_MAX_MD_SIZE];
        unsigned int len = 0;
        if (EVP_DigestFinal_ex(ctx_.get(), md, &len) != 1) throw Error("SHA-256 finalisation failed");
        std::ostringstream os;
        for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
        return os.str();
    }

private:
    std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx_;
};

// Fingerprint of all generator material; a rebuilt spec must reproduce it.
inline std::string code_digest(const CodeSpec& spec) {
    Sha256 h;
    h.update(spec.params.to_string()).update(spec.field->spec().name()).update(parity_name(spec.parity_kind));
    h.update_u64(spec.seed);
    auto matrix = [&](const Matrix& m) {
        h.update_u64(m.rows()).update_u64(m.cols());
        for (std::size_t i = 0; i < m.rows(); ++i)
            for (std::size_t j = 0; j < m.cols(); ++j) h.update_u64(m(i, j));
    };
    matrix(spec.generator);
    matrix(spec.u);
    matrix(spec.v);
    for (const auto& rack : spec.parity)
        for (const auto& pm : rack) matrix(pm);
    return h.hex();
}

struct Manifest {
    CodeParams params;
    FieldSpec field;
    ParityKind parity = ParityKind::BlockScalar;
    std::uint64_t seed = 0;
    std::int64_t file_size = 0;
    std::int64_t alpha = 0;
    int layout_version = kLayoutVersion;
    std::vector<NodeId> erased;
    std::string code_digest;
    std::string content_digest;
};

inline fs::path node_path(const fs::path& dir, NodeId id) {
    return dir / ("rack_" + std::to_string(id.rack + 1)) / ("node_" + std::to_string(id.node + 1) + ".bin");
}

namespace detail {

inline std::vector<std::uint8_t> read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IntegrityError("cannot read " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const fs::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("cannot write " + path.string());
}

inline void hash_node(Sha256& h, NodeId id, std::span<const std::uint8_t> bytes) {
    h.update(ClusterState::label(id)).update_u64(bytes.size()).update(bytes);
}

inline nlohmann::json to_json(const Manifest& m) {
    nlohmann::json erased = nlohmann::json::array();
    for (const auto& id : m.erased) erased.push_back(ClusterState::label(id));
    return {
        {"layout_version", m.layout_version},
        {"params",
         {{"n", m.params.n}, {"k", m.params.k}, {"d", m.params.d}, {"r", m.params.r}, {"e", m.params.e}, {"f", m.params.f}}},
        {"field", m.field.name()},
        {"parity", std::string(parity_name(m.parity))},
        {"seed", m.seed},
        {"B", m.file_size},
        {"alpha", m.alpha},
        {"erased", erased},
        {"code_digest", m.code_digest},
        {"content_digest", m.content_digest},
    };
}

inline NodeId parse_label(std::string_view text) {
    const auto colon = text.find(':');
    auto number = [&](std::string_view s) -> std::int64_t {
        if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string_view::npos)
            throw ValidationError("malformed node '" + std::string(text) + "' (expected rack:node)");
        return std::stoll(std::string(s));
    };
    if (colon == std::string_view::npos) throw ValidationError("malformed node '" + std::string(text) + "' (expected rack:node)");
    const std::int64_t rack = number(text.substr(0, colon));
    const std::int64_t node = number(text.substr(colon + 1));
    if (rack < 1 || node < 1) throw ValidationError("node ids are 1-based: '" + std::string(text) + "'");
    return {rack - 1, node - 1};
}

inline Manifest from_json(const nlohmann::json& j) {
    Manifest m;
    m.layout_version = j.at("layout_version").get<int>();
    if (m.layout_version != kLayoutVersion)
        throw IntegrityError("unsupported layout version " + std::to_string(m.layout_version) + " (expected " +
                             std::to_string(kLayoutVersion) + ")");
    const auto& p = j.at("params");
    m.params = validate(p.at("n").get<std::int64_t>(), p.at("k").get<std::int64_t>(), p.at("d").get<std::int64_t>(),
                        p.at("r").get<std::int64_t>(), p.at("e").get<std::int64_t>(), p.at("f").get<std::int64_t>());
    m.field = FieldSpec::parse(j.at("field").get<std::string>());
    m.parity = parse_parity(j.at("parity").get<std::string>());
    m.seed = j.at("seed").get<std::uint64_t>();
    m.file_size = j.at("B").get<std::int64_t>();
    m.alpha = j.at("alpha").get<std::int64_t>();
    for (const auto& e : j.at("erased")) m.erased.push_back(parse_label(e.get<std::string>()));
    m.code_digest = j.at("code_digest").get<std::string>();
    m.content_digest = j.at("content_digest").get<std::string>();
    return m;
}

}  // namespace detail

// Writes manifest.json and rack_<l>/node_<i>.bin (1-based). Erased nodes are
// zero-length files and listed in the manifest.
inline Manifest save(const ClusterState& state, const CodeSpec& spec, const fs::path& dir) {
    Manifest m{spec.params, spec.field->spec(), spec.parity_kind, spec.seed, spec.file_size(), spec.alpha(), kLayoutVersion, {}, {}, {}};
    m.code_digest = code_digest(spec);
    Sha256 content;
    for (std::int64_t l = 0; l < state.racks(); ++l) {
        fs::create_directories(dir / ("rack_" + std::to_string(l + 1)));
        for (std::int64_t i = 0; i < state.nodes_per_rack(); ++i) {
            std::vector<std::uint8_t> bytes;
            if (state.erased({l, i})) m.erased.push_back({l, i});
            else spec.field->serialize(state.node({l, i}), bytes);
            detail::write_file(node_path(dir, {l, i}), bytes);
            detail::hash_node(content, {l, i}, bytes);
        }
    }
    m.content_digest = content.hex();
    const std::string text = detail::to_json(m).dump(2) + "\n";
    detail::write_file(dir / "manifest.json", std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    return m;
}

struct LoadedCluster {
    Manifest manifest;
    CodeSpec spec;
    ClusterState state;
};

inline Manifest read_manifest(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    if (!fs::exists(path)) throw ValidationError("no manifest.json in " + dir.string());
    const auto bytes = detail::read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
        return detail::from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw IntegrityError("malformed manifest " + path.string() + ": " + e.what());
    }
}

// Rebuilds the code from the manifest and verifies both digests.
inline LoadedCluster load(const fs::path& dir) {
    const Manifest m = read_manifest(dir);
    CodeSpec spec = build_code(m.params, m.seed, {m.field, m.parity});
    if (code_digest(spec) != m.code_digest) throw IntegrityError("code digest mismatch: rebuilt generator differs from " + dir.string());
    if (spec.file_size() != m.file_size || spec.alpha() != m.alpha) throw IntegrityError("manifest B/alpha disagree with params");

    ClusterState state(m.params.r, m.params.nodes_per_rack, spec.alpha());
    Sha256 content;
    const auto symbol_bytes = spec.field->spec().symbol_bytes();
    for (std::int64_t l = 0; l < m.params.r; ++l)
        for (std::int64_t i = 0; i < m.params.nodes_per_rack; ++i) {
            const NodeId id{l, i};
            const auto bytes = detail::read_file(node_path(dir, id));
            detail::hash_node(content, id, bytes);
            const bool flagged = std::find(m.erased.begin(), m.erased.end(), id) != m.erased.end();
            if (flagged) {
                if (!bytes.empty()) throw IntegrityError("node " + ClusterState::label(id) + " is flagged erased but not empty");
                state.erase(id);
                continue;
            }
            if (bytes.size() != static_cast<std::size_t>(spec.alpha()) * symbol_bytes)
                throw IntegrityError("node " + ClusterState::label(id) + " has " + std::to_string(bytes.size()) + " bytes, expected " +
                                     std::to_string(static_cast<std::size_t>(spec.alpha()) * symbol_bytes));
            std::vector<Symbol> symbols;
            try {
                symbols = spec.field->deserialize(bytes);
            } catch (const FieldError& e) {
                throw IntegrityError("node " + ClusterState::label(id) + ": " + e.what());
            }
            state.set_node(id, std::move(symbols));
        }
    if (content.hex() != m.content_digest) throw IntegrityError("content digest mismatch in " + dir.string());
    return {m, std::move(spec), std::move(state)};
}

// Bytes carried per symbol when packing a file into the message.
inline std::size_t payload_bytes_per_symbol(const Field& f) {
    if (f.is_binary()) return f.spec().symbol_bytes();
    std::size_t b = 0;
    while (b < 3 && (std::uint64_t{1} << (8 * (b + 1))) <= f.order()) ++b;
    if (b == 0) throw ValidationError("field " + f.spec().name() + " is too small to carry bytes");
    return b;
}

inline std::size_t message_capacity(const CodeSpec& spec) {
    const std::size_t total = static_cast<std::size_t>(spec.file_size()) * payload_bytes_per_symbol(*spec.field);
    return total < 4 ? 0 : total - 4;
}

// 4-byte little-endian length header, the data, zero padding to B symbols.
inline std::vector<Symbol> frame_message(const CodeSpec& spec, std::span<const std::uint8_t> data) {
    const std::size_t per = payload_bytes_per_symbol(*spec.field);
    if (data.size() > message_capacity(spec))
        throw ValidationError("input has " + std::to_string(data.size()) + " bytes; B = " + std::to_string(spec.file_size()) +
                              " symbols hold at most " + std::to_string(message_capacity(spec)) + " bytes after the length header");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(spec.file_size()) * per, 0);
    for (int i = 0; i < 4; ++i) bytes[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(data.size() >> (8 * i));
    std::copy(data.begin(), data.end(), bytes.begin() + 4);
    std::vector<Symbol> message(static_cast<std::size_t>(spec.file_size()), 0);
    for (std::size_t s = 0; s < message.size(); ++s)
        for (std::size_t b = 0; b < per; ++b) message[s] |= static_cast<Symbol>(bytes[s * per + b]) << (8 * b);
    return message;
}

inline std::vector<std::uint8_t> unframe_message(const CodeSpec& spec, std::span<const Symbol> message) {
    const std::size_t per = payload_bytes_per_symbol(*spec.field);
    std::vector<std::uint8_t> bytes;
    for (Symbol s : message)
        for (std::size_t b = 0; b < per; ++b) bytes.push_back(static_cast<std::uint8_t>(s >> (8 * b)));
    std::size_t len = 0;
    for (int i = 0; i < 4 && static_cast<std::size_t>(i) < bytes.size(); ++i) len |= static_cast<std::size_t>(bytes[static_cast<std::size_t>(i)]) << (8 * i);
    if (bytes.size() < 4 || len > bytes.size() - 4) throw IntegrityError("recovered message has an invalid length header");
    return {bytes.begin() + 4, bytes.begin() + 4 + static_cast<std::ptrdiff_t>(len)};
}

// Exactly B serialized symbols.
inline std::vector<Symbol> raw_message(const CodeSpec& spec, std::span<const std::uint8_t> data) {
    const std::size_t width = spec.field->spec().symbol_bytes();
    if (data.size() != static_cast<std::size_t>(spec.file_size()) * width)
        throw ValidationError("raw message has " + std::to_string(data.size()) + " bytes; expected B = " +
                              std::to_string(spec.file_size()) + " symbols of " + std::to_string(width) + " bytes");
    try {
        return spec.field->deserialize(data);
    } catch (const FieldError& e) {
        throw ValidationError(std::string("raw message: ") + e.what());
    }
}

struct ScenarioRound {
    std::vector<std::int64_t> racks;               // 0-based
    std::vector<std::vector<std::int64_t>> nodes;  // per failed rack
    std::vector<std::int64_t> helpers;
};

struct Scenario {
    std::uint64_t seed = 0;
    std::vector<ScenarioRound> rounds;
    std::vector<std::vector<NodeId>> probes;
};

inline std::vector<NodeId> random_collector(const CodeParams& p, Rng& rng) {
    std::vector<NodeId> ids;
    for (auto x : rng.subset(static_cast<std::size_t>(p.n), static_cast<std::size_t>(p.k)))
        ids.push_back({static_cast<std::int64_t>(x) / p.nodes_per_rack, static_cast<std::int64_t>(x) % p.nodes_per_rack});
    return ids;
}

inline ScenarioRound random_round(const CodeParams& p, Rng& rng) {
    ScenarioRound round;
    for (auto l : rng.subset(static_cast<std::size_t>(p.r), static_cast<std::size_t>(p.f))) {
        round.racks.push_back(static_cast<std::int64_t>(l));
        std::vector<std::int64_t> nodes;
        for (auto i : rng.subset(static_cast<std::size_t>(p.nodes_per_rack), static_cast<std::size_t>(p.failures_per_rack)))
            nodes.push_back(static_cast<std::int64_t>(i));
        round.nodes.push_back(std::move(nodes));
    }
    std::vector<std::int64_t> others;
    for (std::int64_t l = 0; l < p.r; ++l)
        if (std::find(round.racks.begin(), round.racks.end(), l) == round.racks.end()) others.push_back(l);
    for (auto x : rng.subset(others.size(), static_cast<std::size_t>(p.d))) round.helpers.push_back(others[x]);
    return round;
}

inline Scenario random_scenario(const CodeParams& p, std::uint64_t seed, std::size_t rounds, std::size_t probes) {
    Rng rng(seed);
    Scenario sc{seed, {}, {}};
    for (std::size_t i = 0; i < rounds; ++i) sc.rounds.push_back(random_round(p, rng));
    for (std::size_t i = 0; i < probes; ++i) sc.probes.push_back(random_collector(p, rng));
    return sc;
}

struct RoundLedger {
    ScenarioRound round;
    std::vector<std::pair<std::int64_t, std::int64_t>> cross_rack;  // (failed rack, symbols downloaded)
    std::int64_t helper_to_failed = 0;
    std::int64_t failed_to_failed = 0;
    std::int64_t intra_rack = 0;
};

struct ScenarioReport {
    std::vector<RoundLedger> rounds;
    std::size_t probes = 0;
    std::size_t probes_recovered = 0;
    std::int64_t construction_gamma = 0;
    Rational mbrcr_gamma;

    std::string text() const {
        std::ostringstream os;
        auto list = [](const std::vector<std::int64_t>& xs) {
            std::string s;
            for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i] + 1);
            return s;
        };
        for (std::size_t r = 0; r < rounds.size(); ++r) {
            const auto& ledger = rounds[r];
            os << "round " << r + 1 << ": racks " << list(ledger.round.racks) << " nodes";
            for (const auto& nodes : ledger.round.nodes) os << " [" << list(nodes) << "]";
            os << " helpers " << list(ledger.round.helpers) << "\n";
            for (const auto& [rack, symbols] : ledger.cross_rack) os << "  rack " << rack + 1 << " cross-rack " << symbols << "\n";
            os << "  helper->failed " << ledger.helper_to_failed << ", failed->failed " << ledger.failed_to_failed
               << ", intra-rack " << ledger.intra_rack << "\n";
        }
        os << "probes " << probes_recovered << "/" << probes << " recovered\n";
        os << "gamma per failed rack: construction " << construction_gamma << ", MBRCR point " << to_string(mbrcr_gamma) << "\n";
        return os.str();
    }
};

namespace detail {

inline std::string first_difference(const ClusterState& want, const ClusterState& got) {
    for (std::int64_t l = 0; l < want.racks(); ++l)
        for (std::int64_t i = 0; i < want.nodes_per_rack(); ++i) {
            const NodeId id{l, i};
            if (want.erased(id) != got.erased(id)) return "node " + ClusterState::label(id) + " erased flag differs";
            if (want.erased(id)) continue;
            const auto& a = want.node(id);
            const auto& b = got.node(id);
            for (std::size_t k = 0; k < a.size(); ++k)
                if (a[k] != b[k])
                    return "node " + ClusterState::label(id) + " symbol " + std::to_string(k + 1) + ": expected " +
                           std::to_string(a[k]) + ", got " + std::to_string(b[k]);
        }
    return "states equal";
}

}  // namespace detail

// Applies every round (erase, then repair) to an intact cluster and checks
// exact restoration, per-rack cross-rack traffic and collector probes. The
// reference message is decoded from the initial state.
inline ScenarioReport run_scenario(const CodeSpec& spec, ClusterState& state, const Scenario& scenario) {
    const CodeParams& p = spec.params;
    if (!state.erased_nodes().empty()) throw ValidationError("scenario needs an intact cluster");
    std::vector<NodeId> first;
    for (std::int64_t x = 0; x < p.k; ++x) first.push_back({x / p.nodes_per_rack, x % p.nodes_per_rack});
    const std::vector<Symbol> reference = collect(spec, state, first);

    ScenarioReport report;
    report.construction_gamma = p.d * spec.layout.beta1 + (p.f - 1) * spec.layout.beta2;
    report.mbrcr_gamma = mbrcr_point(p, Rational(spec.file_size())).gamma;
    for (std::size_t r = 0; r < scenario.rounds.size(); ++r) {
        const auto& round = scenario.rounds[r];
        const std::string where = "round " + std::to_string(r + 1) + ": ";
        const ClusterState before = state;
        RepairResult result;
        try {
            result = repair(spec, erase(state, {round.racks, round.nodes}), round.helpers);
        } catch (const ValidationError& e) {
            throw ValidationError(where + e.what());
        }
        if (!(result.state == before)) throw IntegrityError(where + "repair is not exact: " + detail::first_difference(before, result.state));
        RoundLedger ledger{round, {}, 0, 0, 0};
        for (auto l : round.racks) {
            const std::int64_t got = result.transcript.cross_rack_download(l);
            if (got != report.construction_gamma)
                throw IntegrityError(where + "rack " + std::to_string(l + 1) + " downloaded " + std::to_string(got) +
                                     " cross-rack symbols, expected " + std::to_string(report.construction_gamma));
            ledger.cross_rack.emplace_back(l, got);
        }
        for (const auto& t : result.transcript.round1) ledger.helper_to_failed += t.symbols;
        for (const auto& t : result.transcript.round2) ledger.failed_to_failed += t.symbols;
        for (const auto& t : result.transcript.intra_rack) ledger.intra_rack += t.symbols;
        report.rounds.push_back(std::move(ledger));
        state = std::move(result.state);
    }
    for (std::size_t i = 0; i < scenario.probes.size(); ++i) {
        ++report.probes;
        if (collect(spec, state, scenario.probes[i]) != reference)
            throw IntegrityError("probe " + std::to_string(i + 1) + " did not recover the message");
        ++report.probes_recovered;
    }
    return report;
}

}  // namespace rackcoop
