#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rackcoop/error.hpp"

namespace rackcoop {

using Symbol = std::uint32_t;

enum class FieldKind { BinaryExtension, Prime };

// Canonical description of a field. Binary extensions are fixed to the two
// published moduli so that stored symbols are portable.
struct FieldSpec {
    FieldKind kind = FieldKind::BinaryExtension;
    std::uint32_t order = 256;
    std::uint32_t modulus = 0x11D;  // irreducible polynomial, or p itself

    static constexpr std::uint32_t kGf256Modulus = 0x11D;    // x^8+x^4+x^3+x^2+1
    static constexpr std::uint32_t kGf65536Modulus = 0x1100B;  // x^16+x^12+x^3+x+1

    static FieldSpec gf256() { return {FieldKind::BinaryExtension, 256, kGf256Modulus}; }
    static FieldSpec gf65536() { return {FieldKind::BinaryExtension, 65536, kGf65536Modulus}; }
    static FieldSpec prime(std::uint32_t p) { return {FieldKind::Prime, p, p}; }

    // "gf8", "gf16" or "prime:<p>".
    std::string name() const {
        if (kind == FieldKind::Prime) return "prime:" + std::to_string(order);
        return order == 256 ? "gf8" : "gf16";
    }

    static FieldSpec parse(std::string_view text) {
        if (text == "gf8" || text == "gf256") return gf256();
        if (text == "gf16" || text == "gf65536") return gf65536();
        if (text.starts_with("prime:")) {
            const std::string digits(text.substr(6));
            if (digits.empty() || digits.find_first_not_of("0123456789") != std::string::npos || digits.size() > 10)
                throw ValidationError("malformed field '" + std::string(text) + "'");
            return prime(static_cast<std::uint32_t>(std::stoul(digits)));
        }
        throw ValidationError("unknown field '" + std::string(text) + "' (expected gf8, gf16 or prime:<p>)");
    }

    // Bytes per serialized symbol, little-endian.
    std::size_t symbol_bytes() const {
        if (kind == FieldKind::Prime) return 4;
        return order == 256 ? 1 : 2;
    }

    friend bool operator==(const FieldSpec&, const FieldSpec&) = default;
};

namespace detail {

inline bool is_prime(std::uint32_t p) {
    if (p < 2) return false;
    for (std::uint64_t q = 2; q * q <= p; ++q)
        if (p % q == 0) return false;
    return true;
}

}  // namespace detail

class Field {
public:
    explicit Field(FieldSpec spec) : spec_(spec) {
        if (spec_.kind == FieldKind::Prime) {
            if (spec_.order >= (1u << 31) || !detail::is_prime(spec_.order) || spec_.modulus != spec_.order)
                throw FieldError("prime field order must be a prime below 2^31, got " + std::to_string(spec_.order));
            return;
        }
        if (!(spec_ == FieldSpec::gf256() || spec_ == FieldSpec::gf65536()))
            throw FieldError("binary fields are limited to GF(2^8)/0x11D and GF(2^16)/0x1100B");
        build_tables();
    }

    const FieldSpec& spec() const noexcept { return spec_; }
    std::uint32_t order() const noexcept { return spec_.order; }
    bool is_binary() const noexcept { return spec_.kind == FieldKind::BinaryExtension; }

    bool contains(Symbol a) const noexcept { return a < spec_.order; }

    Symbol add(Symbol a, Symbol b) const noexcept {
        if (is_binary()) return a ^ b;
        const std::uint64_t s = std::uint64_t{a} + b;
        return static_cast<Symbol>(s >= spec_.order ? s - spec_.order : s);
    }

    Symbol neg(Symbol a) const noexcept {
        if (is_binary() || a == 0) return a;
        return spec_.order - a;
    }

    Symbol sub(Symbol a, Symbol b) const noexcept { return add(a, neg(b)); }

    Symbol mul(Symbol a, Symbol b) const noexcept {
        if (a == 0 || b == 0) return 0;
        if (is_binary()) return exp_[log_[a] + log_[b]];
        return static_cast<Symbol>(std::uint64_t{a} * b % spec_.order);
    }

    Symbol inv(Symbol a) const {
        if (a == 0) throw FieldError("inverse of zero");
        if (is_binary()) return exp_[(spec_.order - 1) - log_[a]];
        return pow(a, spec_.order - 2);
    }

    Symbol div(Symbol a, Symbol b) const { return mul(a, inv(b)); }

    Symbol pow(Symbol a, std::uint64_t n) const noexcept {
        Symbol result = 1;
        Symbol base = a;
        while (n > 0) {
            if (n & 1) result = mul(result, base);
            base = mul(base, base);
            n >>= 1;
        }
        return result;
    }

    // a += b * c, the inner step of every elimination loop.
    Symbol fma(Symbol acc, Symbol b, Symbol c) const noexcept { return add(acc, mul(b, c)); }

    void serialize(std::span<const Symbol> symbols, std::vector<std::uint8_t>& out) const {
        const std::size_t width = spec_.symbol_bytes();
        for (Symbol s : symbols)
            for (std::size_t b = 0; b < width; ++b) out.push_back(static_cast<std::uint8_t>((s >> (8 * b)) & 0xFF));
    }

    std::vector<Symbol> deserialize(std::span<const std::uint8_t> bytes) const {
        const std::size_t width = spec_.symbol_bytes();
        if (bytes.size() % width != 0)
            throw IntegrityError("byte count " + std::to_string(bytes.size()) + " is not a multiple of the symbol width");
        std::vector<Symbol> out;
        out.reserve(bytes.size() / width);
        for (std::size_t i = 0; i < bytes.size(); i += width) {
            Symbol s = 0;
            for (std::size_t b = 0; b < width; ++b) s |= Symbol{bytes[i + b]} << (8 * b);
            if (!contains(s)) throw IntegrityError("symbol " + std::to_string(s) + " outside " + spec_.name());
            out.push_back(s);
        }
        return out;
    }

private:
    void build_tables() {
        const std::uint32_t q = spec_.order;
        exp_.assign(2 * q, 0);
        log_.assign(q, 0);
        Symbol x = 1;
        for (std::uint32_t i = 0; i + 1 < q; ++i) {
            if (i > 0 && x == 1) throw FieldError("modulus is not primitive");
            exp_[i] = x;
            log_[x] = i;
            x <<= 1;
            if (x & q) x ^= spec_.modulus;
        }
        if (x != 1) throw FieldError("modulus is not primitive");
        for (std::uint32_t i = q - 1; i < 2 * q; ++i) exp_[i] = exp_[i - (q - 1)];
    }

    FieldSpec spec_;
    std::vector<Symbol> exp_;
    std::vector<std::uint32_t> log_;
};

using FieldPtr = std::shared_ptr<const Field>;

// Binary fields are shared singletons; tables are immutable once built.
inline FieldPtr make_field(const FieldSpec& spec) {
    if (spec == FieldSpec::gf256()) {
        static const FieldPtr gf256 = std::make_shared<const Field>(FieldSpec::gf256());
        return gf256;
    }
    if (spec == FieldSpec::gf65536()) {
        static const FieldPtr gf65536 = std::make_shared<const Field>(FieldSpec::gf65536());
        return gf65536;
    }
    return std::make_shared<const Field>(spec);
}

inline bool same_field(const Field& a, const Field& b) noexcept { return &a == &b || a.spec() == b.spec(); }

// A value tagged with its field. Arithmetic between elements of different
// fields throws.
class Element {
public:
    Element(FieldPtr field, Symbol value) : field_(std::move(field)), value_(value) {
        if (!field_->contains(value_)) throw FieldError("value " + std::to_string(value_) + " outside " + field_->spec().name());
    }

    Symbol value() const noexcept { return value_; }
    const FieldPtr& field() const noexcept { return field_; }

    Element operator+(const Element& o) const { return {field_, field_->add(value_, check(o))}; }
    Element operator-(const Element& o) const { return {field_, field_->sub(value_, check(o))}; }
    Element operator*(const Element& o) const { return {field_, field_->mul(value_, check(o))}; }
    Element operator/(const Element& o) const { return {field_, field_->div(value_, check(o))}; }
    Element operator-() const { return {field_, field_->neg(value_)}; }
    Element inv() const { return {field_, field_->inv(value_)}; }
    Element pow(std::uint64_t n) const { return {field_, field_->pow(value_, n)}; }

    friend bool operator==(const Element& a, const Element& b) {
        return same_field(*a.field_, *b.field_) && a.value_ == b.value_;
    }

private:
    Symbol check(const Element& o) const {
        if (!same_field(*field_, *o.field_))
            throw FieldError("mixed-field operands: " + field_->spec().name() + " and " + o.field_->spec().name());
        return o.value_;
    }

    FieldPtr field_;
    Symbol value_;
};

}  // namespace rackcoop
