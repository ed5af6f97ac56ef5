#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <ostream>
#include <string>
#include <tuple>
#include <vector>

#include "rackcoop/error.hpp"
#include "rackcoop/params.hpp"
#include "rackcoop/rational.hpp"

namespace rackcoop {

// Stage-wise counts of collected racks: 1 <= u_i <= f, sum u_i = m.
using Composition = std::vector<std::int64_t>;

namespace detail {

inline void compose(std::int64_t remaining, std::int64_t max_part, Composition& prefix, std::vector<Composition>& out) {
    if (remaining == 0) {
        out.push_back(prefix);
        return;
    }
    for (std::int64_t part = std::min(max_part, remaining); part >= 1; --part) {
        prefix.push_back(part);
        compose(remaining - part, max_part, prefix, out);
        prefix.pop_back();
    }
}

}  // namespace detail

// All ordered compositions of m into parts <= f, fewest parts first.
inline std::vector<Composition> compositions(std::int64_t m, std::int64_t f) {
    std::vector<Composition> out;
    if (m < 1 || f < 1) return out;
    Composition prefix;
    detail::compose(m, f, prefix, out);
    std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.size() < b.size(); });
    return out;
}

inline std::string to_string(const Composition& u) {
    std::string s = "[";
    for (std::size_t i = 0; i < u.size(); ++i) s += (i ? "," : "") + std::to_string(u[i]);
    return s + "]";
}

// Right-hand side of the file-size bound for one composition:
// k alpha + sum_i u_i min(0, (d - sum_{j<i} u_j) beta1 - (e/f) alpha + (f - u_i) beta2).
inline Rational bound_rhs(const CodeParams& p, const Rational& alpha, const Rational& beta1, const Rational& beta2,
                          const Composition& u) {
    const Rational local = Rational(p.e, p.f) * alpha;
    Rational value = Rational(p.k) * alpha;
    std::int64_t collected = 0;
    for (std::int64_t part : u) {
        const Rational term = Rational(p.d - collected) * beta1 - local + Rational(p.f - part) * beta2;
        if (term < 0) value += Rational(part) * term;
        collected += part;
    }
    return value;
}

struct FileSizeBound {
    Rational value;
    std::vector<Composition> argmin;
};

// Largest file size the bound permits: the minimum of bound_rhs over all compositions.
inline FileSizeBound max_file_size(const CodeParams& p, const Rational& alpha, const Rational& beta1,
                                   const Rational& beta2) {
    FileSizeBound best;
    bool first = true;
    for (const auto& u : compositions(p.m, p.f)) {
        Rational v = bound_rhs(p, alpha, beta1, beta2, u);
        if (first || v < best.value) {
            best.value = std::move(v);
            best.argmin = {u};
            first = false;
        } else if (v == best.value) {
            best.argmin.push_back(u);
        }
    }
    return best;
}

inline bool feasible(const CodeParams& p, const Rational& file_size, const Rational& alpha, const Rational& beta1,
                     const Rational& beta2) {
    return file_size <= max_file_size(p, alpha, beta1, beta2).value;
}

struct MinGamma {
    Rational gamma;
    Rational beta1;
    Rational beta2;
};

namespace detail {

// a*beta1 + b*beta2 >= c
struct HalfPlane {
    Rational a;
    Rational b;
    Rational c;
};

struct Point2 {
    Rational x;
    Rational y;
    friend bool operator==(const Point2&, const Point2&) = default;
};

// The bound for composition u is concave piecewise-linear in (beta1, beta2):
// each term min(0, L_i) selects either 0 or L_i. Requiring it >= B for every
// selection gives one half-plane per (u, subset of terms) and the feasible set
// is their intersection. Half-planes with equal (a, b) keep only the largest c.
inline std::vector<HalfPlane> bound_half_planes(const CodeParams& p, const Rational& file_size, const Rational& alpha) {
    const Rational local = Rational(p.e, p.f) * alpha;
    const Rational slack = file_size - Rational(p.k) * alpha;
    std::map<std::tuple<std::int64_t, std::int64_t>, Rational> tightest;
    for (const auto& u : compositions(p.m, p.f)) {
        const std::size_t g = u.size();
        std::vector<std::int64_t> coef1(g), coef2(g);
        std::int64_t collected = 0;
        for (std::size_t i = 0; i < g; ++i) {
            coef1[i] = u[i] * (p.d - collected);
            coef2[i] = u[i] * (p.f - u[i]);
            collected += u[i];
        }
        for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << g); ++mask) {
            std::int64_t a = 0, b = 0, parts = 0;
            for (std::size_t i = 0; i < g; ++i)
                if (mask >> i & 1) {
                    a += coef1[i];
                    b += coef2[i];
                    parts += u[i];
                }
            Rational c = slack + Rational(parts) * local;
            auto [it, inserted] = tightest.try_emplace({a, b}, c);
            if (!inserted && c > it->second) it->second = std::move(c);
        }
    }
    std::vector<HalfPlane> planes;
    planes.reserve(tightest.size());
    for (auto& [key, c] : tightest) planes.push_back({Rational(std::get<0>(key)), Rational(std::get<1>(key)), c});
    return planes;
}

inline Rational side(const HalfPlane& h, const Point2& q) { return h.a * q.x + h.b * q.y - h.c; }

// Sutherland-Hodgman step on a convex polygon.
inline std::vector<Point2> clip(const std::vector<Point2>& poly, const HalfPlane& h) {
    std::vector<Point2> out;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) {
        const Point2& cur = poly[i];
        const Point2& next = poly[(i + 1) % n];
        const Rational sc = side(h, cur);
        const Rational sn = side(h, next);
        if (sc >= 0) out.push_back(cur);
        if ((sc > 0 && sn < 0) || (sc < 0 && sn > 0)) {
            const Rational t = sc / (sc - sn);
            out.push_back({cur.x + t * (next.x - cur.x), cur.y + t * (next.y - cur.y)});
        }
    }
    std::vector<Point2> dedup;
    for (auto& q : out)
        if (dedup.empty() || !(dedup.back() == q)) dedup.push_back(std::move(q));
    while (dedup.size() > 1 && dedup.front() == dedup.back()) dedup.pop_back();
    return dedup;
}

}  // namespace detail

// Minimum of gamma = d beta1 + (f-1) beta2 over (beta1, beta2) >= 0 satisfying
// the bound for every composition, at fixed alpha. The feasible region is a
// convex polygon; it is built exactly by clipping a bounding box with every
// half-plane and the optimum is read off its vertices. Ties prefer the
// smallest beta2, then the smallest beta1.
inline MinGamma min_gamma_given_alpha(const CodeParams& p, const Rational& file_size, const Rational& alpha) {
    detail::require_positive(file_size);
    if (Rational(p.k) * alpha < file_size)
        throw ValidationError("infeasible alpha " + to_string(alpha) + " < B/k = " + to_string(file_size / p.k));

    // beta1 = (e/f) alpha, beta2 = 0 makes every term non-negative, so it is
    // feasible; any optimum therefore satisfies d beta1 <= d (e/f) alpha and
    // (f-1) beta2 <= d (e/f) alpha.
    const Rational x_max = Rational(p.e, p.f) * alpha;
    const Rational y_max = p.f > 1 ? Rational(p.d) * x_max / Rational(p.f - 1) : x_max;
    std::vector<detail::Point2> poly = {{0, 0}, {x_max, 0}, {x_max, y_max}, {0, y_max}};
    for (const auto& h : detail::bound_half_planes(p, file_size, alpha)) {
        poly = detail::clip(poly, h);
        if (poly.empty()) throw IntegrityError("empty feasible region at alpha " + to_string(alpha));
    }

    const detail::Point2* best = nullptr;
    Rational best_gamma;
    for (const auto& q : poly) {
        Rational g = repair_bandwidth(p, q.x, q.y);
        if (!best || g < best_gamma || (g == best_gamma && (q.y < best->y || (q.y == best->y && q.x < best->x)))) {
            best = &q;
            best_gamma = std::move(g);
        }
    }
    MinGamma out{best_gamma, best->x, best->y};
    if (!feasible(p, file_size, alpha, out.beta1, out.beta2))
        throw IntegrityError("linear program returned an infeasible vertex");
    return out;
}

// Corner points plus `steps` evenly spaced alphas between them (inclusive),
// each with its minimum gamma.
inline std::vector<TradeoffPoint> tradeoff_curve(const CodeParams& p, const Rational& file_size, std::int64_t steps) {
    if (steps < 1) throw ValidationError("--sweep needs at least 1 step");
    const TradeoffPoint msr = msrcr_point(p, file_size);
    const TradeoffPoint mbr = mbrcr_point(p, file_size);
    std::vector<TradeoffPoint> curve;
    for (std::int64_t i = 0; i <= steps; ++i) {
        const Rational alpha = msr.alpha + (mbr.alpha - msr.alpha) * Rational(i, steps);
        const MinGamma best = min_gamma_given_alpha(p, file_size, alpha);
        PointRole role = PointRole::Custom;
        if (i == 0) role = PointRole::MSRCR;
        if (i == steps) role = PointRole::MBRCR;
        curve.push_back({alpha, best.beta1, best.beta2, best.gamma, file_size, role});
    }
    return curve;
}

// CSV interface for plotting: alpha_num,alpha_den,gamma_num,gamma_den,role.
inline void write_curve_csv(std::ostream& os, const std::vector<TradeoffPoint>& curve) {
    os << "alpha_num,alpha_den,gamma_num,gamma_den,role\n";
    for (const auto& t : curve)
        os << numerator_of(t.alpha) << ',' << denominator_of(t.alpha) << ',' << numerator_of(t.gamma) << ','
           << denominator_of(t.gamma) << ',' << role_name(t.role) << '\n';
}

}  // namespace rackcoop
