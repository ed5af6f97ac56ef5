#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "rackcoop/error.hpp"
#include "rackcoop/rational.hpp"

namespace rackcoop {

// Validated (n, k, d, r, e, f) with the derived quantities every other module
// needs.
struct CodeParams {
    std::int64_t n = 0;  // nodes
    std::int64_t k = 0;  // nodes contacted by a data collector
    std::int64_t d = 0;  // helper racks per repair
    std::int64_t r = 0;  // racks
    std::int64_t e = 0;  // simultaneous node failures
    std::int64_t f = 0;  // racks hit by those failures

    std::int64_t m = 0;                  // floor(k r / n)
    std::int64_t nodes_per_rack = 0;     // n / r
    std::int64_t failures_per_rack = 0;  // e / f

    // Nodes per rack holding plain global symbols (n/r - e/f).
    std::int64_t global_nodes_per_rack() const noexcept { return nodes_per_rack - failures_per_rack; }

    std::string to_string() const {
        return std::to_string(n) + "," + std::to_string(k) + "," + std::to_string(d) + "," + std::to_string(r) + "," +
               std::to_string(e) + "," + std::to_string(f);
    }

    friend bool operator==(const CodeParams&, const CodeParams&) = default;
};

enum class Violation {
    NonPositive,               // some parameter < 1
    RackDoesNotDivideNodes,    // r does not divide n
    FDoesNotDivideE,           // f does not divide e
    FDoesNotDivideM,           // f does not divide m
    KExceedsN,                 // k > n
    FExceedsR,                 // f > r
    FailuresExceedRackSize,    // e/f > n/r
    MIsZero,                   // floor(k r / n) = 0
    MExceedsD,                 // m > d
    DExceedsRMinusF,           // d > r - f
};

inline std::string_view describe(Violation v) {
    switch (v) {
        case Violation::NonPositive: return "all of n, k, d, r, e, f must be positive";
        case Violation::RackDoesNotDivideNodes: return "r must divide n";
        case Violation::FDoesNotDivideE: return "f must divide e";
        case Violation::FDoesNotDivideM: return "f must divide m = floor(kr/n)";
        case Violation::KExceedsN: return "k must not exceed n";
        case Violation::FExceedsR: return "f must not exceed r";
        case Violation::FailuresExceedRackSize: return "e/f must not exceed n/r";
        case Violation::MIsZero: return "m = floor(kr/n) must be at least 1";
        case Violation::MExceedsD: return "m must not exceed d";
        case Violation::DExceedsRMinusF: return "d must not exceed r - f";
    }
    return "unknown violation";
}

class ParamsError : public ValidationError {
public:
    ParamsError(std::vector<Violation> violations, const std::string& message)
        : ValidationError(message), violations_(std::move(violations)) {}

    const std::vector<Violation>& violations() const noexcept { return violations_; }

    bool has(Violation v) const {
        for (Violation x : violations_)
            if (x == v) return true;
        return false;
    }

private:
    std::vector<Violation> violations_;
};

// Reports every violated constraint at once.
inline CodeParams validate(std::int64_t n, std::int64_t k, std::int64_t d, std::int64_t r, std::int64_t e,
                           std::int64_t f) {
    std::vector<Violation> bad;
    std::vector<std::string> details;
    auto fail = [&](Violation v, std::string detail) {
        bad.push_back(v);
        details.push_back(std::string(describe(v)) + (detail.empty() ? "" : " (" + detail + ")"));
    };

    if (n < 1 || k < 1 || d < 1 || r < 1 || e < 1 || f < 1) {
        fail(Violation::NonPositive, "");
    } else {
        if (n % r != 0) fail(Violation::RackDoesNotDivideNodes, std::to_string(r) + " does not divide " + std::to_string(n));
        if (e % f != 0) fail(Violation::FDoesNotDivideE, std::to_string(f) + " does not divide " + std::to_string(e));
        if (k > n) fail(Violation::KExceedsN, std::to_string(k) + " > " + std::to_string(n));
        if (f > r) fail(Violation::FExceedsR, std::to_string(f) + " > " + std::to_string(r));
        const std::int64_t m = k * r / n;
        if (m < 1) fail(Violation::MIsZero, "");
        else if (m % f != 0) fail(Violation::FDoesNotDivideM, std::to_string(f) + " does not divide " + std::to_string(m));
        if (n % r == 0 && e % f == 0 && e / f > n / r)
            fail(Violation::FailuresExceedRackSize, std::to_string(e / f) + " > " + std::to_string(n / r));
        if (m > d) fail(Violation::MExceedsD, std::to_string(m) + " > " + std::to_string(d));
        if (d > r - f) fail(Violation::DExceedsRMinusF, std::to_string(d) + " > " + std::to_string(r - f));
    }

    if (!bad.empty()) {
        std::string msg = "invalid parameters (n,k,d,r,e,f) = (" + std::to_string(n) + "," + std::to_string(k) + "," +
                          std::to_string(d) + "," + std::to_string(r) + "," + std::to_string(e) + "," +
                          std::to_string(f) + "):";
        for (const auto& line : details) msg += "\n  - " + line;
        throw ParamsError(std::move(bad), msg);
    }
    CodeParams p{n, k, d, r, e, f};
    p.m = k * r / n;
    p.nodes_per_rack = n / r;
    p.failures_per_rack = e / f;
    return p;
}

// Parses "n,k,d,r,e,f" and validates.
inline CodeParams parse_params(std::string_view text) {
    std::vector<std::int64_t> values;
    std::size_t start = 0;
    while (start <= text.size()) {
        const std::size_t comma = std::min(text.find(',', start), text.size());
        const std::string token(text.substr(start, comma - start));
        if (token.empty() || token.size() > 9 || token.find_first_not_of("0123456789") != std::string::npos)
            throw ValidationError("malformed --params '" + std::string(text) + "' (expected n,k,d,r,e,f)");
        values.push_back(std::stoll(token));
        start = comma + 1;
    }
    if (values.size() != 6) throw ValidationError("--params needs exactly six integers n,k,d,r,e,f");
    return validate(values[0], values[1], values[2], values[3], values[4], values[5]);
}

enum class PointRole { MSRCR, MBRCR, Custom };

inline std::string_view role_name(PointRole role) {
    switch (role) {
        case PointRole::MSRCR: return "MSRCR";
        case PointRole::MBRCR: return "MBRCR";
        case PointRole::Custom: return "custom";
    }
    return "custom";
}

struct TradeoffPoint {
    Rational alpha;
    Rational beta1;
    Rational beta2;
    Rational gamma;
    Rational file_size;
    PointRole role = PointRole::Custom;

    friend bool operator==(const TradeoffPoint&, const TradeoffPoint&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const TradeoffPoint& t) {
    return os << role_name(t.role) << "(B=" << to_string(t.file_size) << ", alpha=" << to_string(t.alpha)
              << ", beta1=" << to_string(t.beta1) << ", beta2=" << to_string(t.beta2)
              << ", gamma=" << to_string(t.gamma) << ")";
}

// Cross-rack repair bandwidth per failed rack: d beta1 + (f-1) beta2.
inline Rational repair_bandwidth(const CodeParams& p, const Rational& beta1, const Rational& beta2) {
    return Rational(p.d) * beta1 + Rational(p.f - 1) * beta2;
}

namespace detail {

inline void require_positive(const Rational& b) {
    if (b <= 0) throw ValidationError("file size B must be positive, got " + to_string(b));
}

}  // namespace detail

// Minimum-storage corner: alpha = B/k, beta1 = beta2 = (B/k)(e/f)/(d-m+f).
inline TradeoffPoint msrcr_point(const CodeParams& p, const Rational& file_size) {
    detail::require_positive(file_size);
    const Rational alpha = file_size / p.k;
    const Rational beta = alpha * Rational(p.e, p.f) / Rational(p.d - p.m + p.f);
    return {alpha, beta, beta, repair_bandwidth(p, beta, beta), file_size, PointRole::MSRCR};
}

// Minimum-bandwidth corner:
// beta1 = B / (k (f/e)(d + (f-1)/2) + (m - m^2)/2), beta2 = beta1/2, alpha = (f/e) gamma.
inline TradeoffPoint mbrcr_point(const CodeParams& p, const Rational& file_size) {
    detail::require_positive(file_size);
    const Rational denom = Rational(p.k) * Rational(p.f, p.e) * (Rational(p.d) + Rational(p.f - 1, 2)) +
                           Rational(p.m - p.m * p.m, 2);
    const Rational beta1 = file_size / denom;
    const Rational beta2 = beta1 / 2;
    const Rational gamma = repair_bandwidth(p, beta1, beta2);
    return {Rational(p.f, p.e) * gamma, beta1, beta2, gamma, file_size, PointRole::MBRCR};
}

// Integer layout of the explicit minimum-bandwidth code.
struct ConstructionLayout {
    TradeoffPoint point;                 // (alpha, beta1, beta2) = (2d+f-1, 2e/f, e/f)
    std::int64_t alpha = 0;
    std::int64_t beta1 = 0;
    std::int64_t beta2 = 0;
    std::int64_t file_size = 0;          // B = k(2d+f-1) + (e/f)(m - m^2)
    std::int64_t file_size_split = 0;    // (k - m e/f)(2d+f-1) + (e/f) m (2d+f-m)
    std::int64_t global_symbols = 0;     // N: length of the outer MDS code
    std::int64_t rack_global_symbols = 0;  // (n - r e/f)(2d+f-1), placed directly on nodes
    std::int64_t message_matrix_symbols = 0;  // m(2d+f-m) per message matrix
};

inline ConstructionLayout construction_params(const CodeParams& p) {
    ConstructionLayout l;
    const std::int64_t ef = p.failures_per_rack;
    l.alpha = 2 * p.d + p.f - 1;
    l.beta1 = 2 * ef;
    l.beta2 = ef;
    l.file_size = p.k * l.alpha + ef * (p.m - p.m * p.m);
    l.file_size_split = (p.k - p.m * ef) * l.alpha + ef * p.m * (2 * p.d + p.f - p.m);
    l.message_matrix_symbols = p.m * (2 * p.d + p.f - p.m);
    l.rack_global_symbols = (p.n - p.r * ef) * l.alpha;
    l.global_symbols = l.rack_global_symbols + ef * l.message_matrix_symbols;
    l.point = {Rational(l.alpha), Rational(l.beta1), Rational(l.beta2),
               repair_bandwidth(p, Rational(l.beta1), Rational(l.beta2)), Rational(l.file_size), PointRole::MBRCR};
    return l;
}

}  // namespace rackcoop
