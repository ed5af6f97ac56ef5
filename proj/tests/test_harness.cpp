#include <gtest/gtest.h>

#include <unistd.h>

#include "rackcoop/harness.hpp"

using namespace rackcoop;

namespace {

const CodeParams kReference = validate(8, 4, 2, 4, 2, 2);

class TempDir {
public:
    TempDir() {
        static int counter = 0;
        path_ = fs::temp_directory_path() / ("rackcoop_harness_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        fs::remove_all(path_);
        fs::create_directories(path_);
    }
    ~TempDir() { fs::remove_all(path_); }
    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

std::vector<Symbol> random_message(const CodeSpec& spec, Rng& rng) {
    std::vector<Symbol> m(static_cast<std::size_t>(spec.file_size()));
    for (auto& s : m) s = static_cast<Symbol>(rng.below(spec.field->order()));
    return m;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

const CodeSpec& reference_spec() {
    static const CodeSpec spec = build_code(kReference, 42);
    return spec;
}

}  // namespace

TEST(Persistence, RoundTripWithErasures) {
    const CodeSpec& spec = reference_spec();
    Rng rng(1);
    ClusterState state = encode(spec, random_message(spec, rng));
    state.erase({1, 0});
    state.erase({3, 1});
    TempDir dir;
    const Manifest m = save(state, spec, dir.path());
    EXPECT_EQ(m.erased.size(), 2u);
    EXPECT_EQ(fs::file_size(node_path(dir.path(), {1, 0})), 0u);
    EXPECT_EQ(fs::file_size(node_path(dir.path(), {0, 0})), 5u);
    const LoadedCluster loaded = load(dir.path());
    EXPECT_EQ(loaded.state, state);
    EXPECT_EQ(loaded.spec.encoding, spec.encoding);
    EXPECT_EQ(loaded.manifest.content_digest, m.content_digest);
}

TEST(Persistence, SavingIsByteDeterministic) {
    const CodeSpec& spec = reference_spec();
    Rng rng(2);
    const ClusterState state = encode(spec, random_message(spec, rng));
    TempDir a, b;
    save(state, spec, a.path());
    save(state, build_code(kReference, 42), b.path());
    for (const auto& entry : fs::recursive_directory_iterator(a.path())) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), a.path());
        EXPECT_EQ(slurp(entry.path()), slurp(b.path() / rel)) << rel;
    }
}

TEST(Persistence, TamperedNodeDetected) {
    const CodeSpec& spec = reference_spec();
    Rng rng(3);
    TempDir dir;
    save(encode(spec, random_message(spec, rng)), spec, dir.path());
    const fs::path victim = node_path(dir.path(), {2, 1});
    std::string bytes = slurp(victim);
    bytes[3] = static_cast<char>(bytes[3] ^ 0x40);
    std::ofstream(victim, std::ios::binary | std::ios::trunc) << bytes;
    EXPECT_THROW(load(dir.path()), IntegrityError);
}

TEST(Persistence, TruncatedNodeDetected) {
    const CodeSpec& spec = reference_spec();
    Rng rng(3);
    TempDir dir;
    save(encode(spec, random_message(spec, rng)), spec, dir.path());
    std::ofstream(node_path(dir.path(), {0, 1}), std::ios::binary | std::ios::trunc) << "ab";
    EXPECT_THROW(load(dir.path()), IntegrityError);
}

TEST(Persistence, ManifestProblems) {
    const CodeSpec& spec = reference_spec();
    Rng rng(4);
    TempDir dir;
    save(encode(spec, random_message(spec, rng)), spec, dir.path());
    const fs::path manifest = dir.path() / "manifest.json";
    const std::string original = slurp(manifest);
    auto rewrite = [&](const std::string& from, const std::string& to) {
        std::string text = original;
        text.replace(text.find(from), from.size(), to);
        std::ofstream(manifest, std::ios::trunc) << text;
    };
    rewrite("\"layout_version\": 1", "\"layout_version\": 2");
    EXPECT_THROW(load(dir.path()), IntegrityError);
    rewrite("\"e\": 2", "\"e\": 3");
    EXPECT_THROW(load(dir.path()), ParamsError);
    rewrite("\"seed\": 42", "\"seed\": 43");
    EXPECT_THROW(load(dir.path()), IntegrityError);
    std::ofstream(manifest, std::ios::trunc) << "{ not json";
    EXPECT_THROW(load(dir.path()), IntegrityError);
    fs::remove(manifest);
    EXPECT_THROW(load(dir.path()), ValidationError);
}

TEST(Framing, RoundTripAndLimits) {
    const CodeSpec& spec = reference_spec();
    EXPECT_EQ(message_capacity(spec), 14u);
    for (std::size_t len : {0u, 1u, 13u, 14u}) {
        std::vector<std::uint8_t> data(len);
        for (std::size_t i = 0; i < len; ++i) data[i] = static_cast<std::uint8_t>(i * 37 + 1);
        const auto message = frame_message(spec, data);
        EXPECT_EQ(message.size(), 18u);
        EXPECT_EQ(unframe_message(spec, message), data);
    }
    EXPECT_THROW(frame_message(spec, std::vector<std::uint8_t>(15)), ValidationError);
    EXPECT_THROW(raw_message(spec, std::vector<std::uint8_t>(17)), ValidationError);
    EXPECT_EQ(raw_message(spec, std::vector<std::uint8_t>(18, 7)), std::vector<Symbol>(18, 7));
}

TEST(Framing, PrimeFieldPacksWholeBytes) {
    const CodeSpec spec = build_code(kReference, 5, {FieldSpec::prime(65537)});
    EXPECT_EQ(payload_bytes_per_symbol(*spec.field), 2u);
    const std::vector<std::uint8_t> data{0xFF, 0xFF, 0x00, 0x12, 0x34};
    EXPECT_EQ(unframe_message(spec, frame_message(spec, data)), data);
}

TEST(Scenario, ReferenceRunPassesAllChecks) {
    const CodeSpec& spec = reference_spec();
    Rng rng(5);
    ClusterState state = encode(spec, random_message(spec, rng));
    const ClusterState initial = state;
    const ScenarioReport report = run_scenario(spec, state, random_scenario(kReference, 77, 5, 10));
    ASSERT_EQ(report.rounds.size(), 5u);
    for (const auto& ledger : report.rounds) {
        for (const auto& [rack, symbols] : ledger.cross_rack) EXPECT_EQ(symbols, 5);
        EXPECT_EQ(ledger.helper_to_failed, 2 * 2 * 2);  // d helpers x f racks x beta1
        EXPECT_EQ(ledger.failed_to_failed, 2 * 1 * 1);  // f (f-1) ordered pairs x beta2
    }
    EXPECT_EQ(report.probes_recovered, 10u);
    EXPECT_EQ(report.construction_gamma, 5);
    EXPECT_EQ(report.mbrcr_gamma, 5);
    EXPECT_EQ(state, initial);
    EXPECT_NE(report.text().find("construction 5, MBRCR point 5"), std::string::npos);
}

TEST(Scenario, EmptyScenario) {
    const CodeSpec& spec = reference_spec();
    Rng rng(6);
    ClusterState state = encode(spec, random_message(spec, rng));
    Scenario sc = random_scenario(kReference, 1, 0, 3);
    const ScenarioReport report = run_scenario(spec, state, sc);
    EXPECT_TRUE(report.rounds.empty());
    EXPECT_EQ(report.probes_recovered, 3u);
}

TEST(Scenario, WrongHelperCountRejected) {
    const CodeSpec& spec = reference_spec();
    Rng rng(7);
    ClusterState state = encode(spec, random_message(spec, rng));
    Scenario sc;
    sc.rounds.push_back({{0}, {{0}}, {1, 2, 3}});
    EXPECT_THROW(run_scenario(spec, state, sc), ValidationError);
    sc.rounds = {{{0, 1}, {{0}, {1}}, {1, 2, 3}}};
    EXPECT_THROW(run_scenario(spec, state, sc), ValidationError);
}

TEST(Scenario, DeterministicInSeed) {
    const auto a = random_scenario(kReference, 9, 4, 4);
    const auto b = random_scenario(kReference, 9, 4, 4);
    ASSERT_EQ(a.rounds.size(), b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        EXPECT_EQ(a.rounds[i].racks, b.rounds[i].racks);
        EXPECT_EQ(a.rounds[i].nodes, b.rounds[i].nodes);
        EXPECT_EQ(a.rounds[i].helpers, b.rounds[i].helpers);
    }
    EXPECT_EQ(a.probes, b.probes);
}
