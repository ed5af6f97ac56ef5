// Encode a random message, lose one node in each of two racks, repair, and
// read the message back from a different set of nodes.
#include <iostream>

#include "rackcoop/rackcoop.hpp"

int main() {
    using namespace rackcoop;
    const CodeParams p = validate(8, 4, 2, 4, 2, 2);
    const CodeSpec spec = build_code(p, 42);

    Rng rng(7);
    std::vector<Symbol> message(static_cast<std::size_t>(spec.file_size()));
    for (auto& s : message) s = static_cast<Symbol>(rng.below(spec.field->order()));
    ClusterState state = encode(spec, message);

    const ClusterState damaged = erase(state, {{0, 2}, {{0}, {1}}});
    const RepairResult fixed = repair(spec, damaged, {1, 3});
    std::cout << "exact repair: " << std::boolalpha << (fixed.state == state) << "\n";
    for (auto rack : {0, 2})
        std::cout << "rack " << rack + 1 << " downloaded " << fixed.transcript.cross_rack_download(rack)
                  << " cross-rack symbols\n";

    const auto recovered = collect(spec, fixed.state, {{0, 0}, {1, 1}, {2, 0}, {3, 1}});
    std::cout << "collected: " << (recovered == message) << "\n";

    const TradeoffPoint mbr = mbrcr_point(p, Rational(spec.file_size()));
    std::cout << mbr << "\n";
}
