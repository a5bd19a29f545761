#pragma once

#include <algorithm>
#include <set>
#include <vector>

#include "clab/error.hpp"
#include "clab/interval.hpp"
#include "clab/subgroup.hpp"

// The Chabauty metric on each supported subgroup space. Ultrametric ambients
// use the two-sided local-Hausdorff condition
//
//   d(A,B) = min(1, inf{ eps : A cap ball(1/eps) within N_eps(B), and
//                              B cap ball(1/eps) within N_eps(A) })
//
// with closed balls and non-strict comparisons, evaluated over the exact
// grid {p^k : -K <= k <= 0} together with the open intervals between
// consecutive grid points. Both cutoffs (ball radius and neighborhood
// radius) quantize to p-powers, so the check is constant on each open
// interval and the scan pins the infimum exactly: it is either attained at
// a grid point, or it equals the largest failing grid point without being
// attained (the spec's bracket case, reported upper endpoint first).
// Z, R and the circle use compactification-coordinate formulas instead.

namespace clab {

struct MetricResult {
    enum class Kind {
        Exact,      // the metric value is lower == upper, attained
        Bracket,    // the infimum equals `lower`, not attained; spec reports `upper`
        Enclosure,  // true value only known to lie in [lower, upper]
    };
    Kind kind = Kind::Exact;
    Rat lower, upper;

    static MetricResult exact(Rat v) { return {Kind::Exact, v, v}; }
    static MetricResult bracket(Rat lo, Rat hi) { return {Kind::Bracket, std::move(lo), std::move(hi)}; }
    static MetricResult enclosure(Rat lo, Rat hi) { return {Kind::Enclosure, std::move(lo), std::move(hi)}; }

    /// True metric value when it is exactly pinned (Exact and Bracket kinds).
    bool value_known() const { return kind != Kind::Enclosure; }
    const Rat& value() const {
        if (!value_known()) throw PrecisionExhausted("metric value not exactly known");
        return lower;
    }
    /// The canonical value for reports and ordering: the upper endpoint.
    const Rat& reported() const { return upper; }

    bool certainly_less(const Rat& t) const { return value_known() ? lower < t : upper < t; }
    bool certainly_at_most(const Rat& t) const { return value_known() ? lower <= t : upper <= t; }
    bool certainly_greater(const Rat& t) const { return value_known() ? lower > t : lower > t; }
};

// ---------------------------------------------------------------------------
// Exact point-to-subgroup distance (ultrametric ambients)

namespace detail {

/// H + ball(p^t): the lattice part thickened by p^t R^n. Membership in this
/// module decides dist(x, H) <= p^-t exactly.
inline QpModule thickened_module(const QpModule& m, std::size_t n, const PrimeContext& ctx,
                                 long t) {
    QCols lat = m.lattice_basis;
    Rat pt = p_power(ctx, t);
    for (std::size_t i = 0; i < n; ++i) {
        QVec e = linalg::zero_vec(n);
        e[i] = pt;
        lat.push_back(std::move(e));
    }
    return canonicalize_module(m.vector_basis, std::move(lat), n, ctx);
}

inline Rat dist_point_qp(const Rat& x, const QpSubgroup& s, const PrimeContext& ctx) {
    switch (s.kind) {
        case QpSubgroup::Kind::Full: return Rat(0);
        case QpSubgroup::Kind::Zero: return norm_p(x, ctx);
        case QpSubgroup::Kind::Lattice: {
            Valuation v = valuation(x, ctx);
            if (v.infinite || v.v >= s.k) return Rat(0);
            return norm_p(x, ctx);
        }
    }
    throw Error("unreachable");
}

inline Rat dist_point_module(const QVec& x, const QpModule& m, std::size_t n,
                             const PrimeContext& ctx) {
    // Greedy reduction: kill the vector-pivot coordinates, then reduce each
    // lattice-pivot coordinate to its residue mod the pivot power.
    QVec y = x;
    for (std::size_t i = 0; i < m.vector_basis.size(); ++i) {
        const std::size_t r = m.vector_pivots[i];
        if (!y[r].is_zero()) linalg::axpy(y, -y[r], m.vector_basis[i]);
    }
    for (std::size_t i = 0; i < m.lattice_basis.size(); ++i) {
        const std::size_t r = m.lattice_pivots[i];
        if (y[r].is_zero()) continue;
        Rat res = linalg::general_residue(y[r], ctx, m.lattice_pivot_vals[i]);
        Rat piv = p_power(ctx, m.lattice_pivot_vals[i]);
        if (y[r] != res) linalg::axpy(y, -((y[r] - res) / piv), m.lattice_basis[i]);
    }
    Rat bound(0);
    for (const auto& c : y) bound = max(bound, norm_p(c, ctx));
    if (bound.is_zero()) return Rat(0);
    // The greedy value is an upper bound; refine by testing membership in
    // H + ball one grid step finer until that fails. Exact because
    // dist(x,H) <= p^-e  iff  x in H + ball(p^-e), and the chain terminates
    // since H is closed and x is outside it.
    long e = ball_exponent(bound, ctx.p);  // bound = p^-e
    for (;;) {
        QpModule thick = thickened_module(m, n, ctx, e + 1);
        if (!module_member(x, thick, ctx)) return p_power(ctx, -e);
        ++e;
    }
}

}  // namespace detail

/// Min over h in H of the max-norm |x - h|, exact.
inline Rat dist_point(const Element& x, const Subgroup& h) {
    require_same_ambient(x.ambient, h.ambient, "dist_point");
    switch (h.ambient.kind) {
        case Ambient::Kind::PAdic:
            return detail::dist_point_qp(x.scalar(), std::get<QpSubgroup>(h.rep),
                                         padic_ctx(h.ambient));
        case Ambient::Kind::PAdicSpace:
            return detail::dist_point_module(x.vec(), std::get<QpModule>(h.rep), h.ambient.dim,
                                             padic_ctx(h.ambient));
        case Ambient::Kind::PrimeProduct: {
            const auto& s = std::get<ProductSubgroup>(h.rep);
            Rat d(0);
            for (std::size_t i = 0; i < s.components.size(); ++i)
                d = max(d, detail::dist_point_qp(x.vec()[i], s.components[i],
                                                 h.ambient.primes[i]));
            return d;
        }
        case Ambient::Kind::Shift: {
            const auto& s = std::get<ShiftSubgroup>(h.rep);
            Rat d(0);
            for (const auto& [n, sym] : x.word())
                if (sym != 0 && !s.contains_coord(n)) d = max(d, Rat::pow(Rat(2), -n));
            return d;
        }
        default:
            throw NotImplementedForAmbient("dist_point: ultrametric ambients only");
    }
}

// ---------------------------------------------------------------------------
// The two-sided neighborhood condition and the grid scan

namespace detail {

/// One-sided: every coset representative of X cap ball(p^ball_exp) over
/// X cap ball(p^-dist_exp) lies within p^-dist_exp of Y.
inline bool covered_within(const Subgroup& x, const Subgroup& y, long ball_exp, long dist_exp,
                           long budget) {
    const Rat R = Rat::pow(Rat(padic_ctx(x.ambient).p), ball_exp);
    const Rat eps = Rat::pow(Rat(padic_ctx(x.ambient).p), -dist_exp);
    // Precompute the thickened target once; membership there is exactly
    // "dist <= eps".
    const auto& ctx = padic_ctx(x.ambient);
    if (x.ambient.kind == Ambient::Kind::PAdic) {
        auto reps = coset_reps(x, R, eps, budget);
        for (const auto& r : reps)
            if (dist_point_qp(r.scalar(), std::get<QpSubgroup>(y.rep), ctx) > eps) return false;
        return true;
    }
    QpModule thick =
        thickened_module(std::get<QpModule>(y.rep), x.ambient.dim, ctx, dist_exp);
    auto reps = coset_reps(x, R, eps, budget);
    for (const auto& r : reps)
        if (!module_member(r.vec(), thick, ctx)) return false;
    return true;
}

inline bool check_cutoffs(const Subgroup& a, const Subgroup& b, long ball_exp, long dist_exp,
                          long budget) {
    return covered_within(a, b, ball_exp, dist_exp, budget) &&
           covered_within(b, a, ball_exp, dist_exp, budget);
}

inline MetricResult clamp_to_grid(MetricResult r, std::int64_t p, int K) {
    const Rat floor = Rat::pow(Rat(p), -K);
    if (r.kind == MetricResult::Kind::Exact)
        return r.lower < floor ? MetricResult::enclosure(Rat(0), floor) : r;
    if (r.kind == MetricResult::Kind::Bracket && r.lower < floor)
        return MetricResult::enclosure(Rat(0), floor);
    return r;
}

/// Closed form for Sub_{Q_p}: the grid scan outcome, computed analytically.
/// Inputs unequal.
inline MetricResult qp_pair_dist(const QpSubgroup& a, const QpSubgroup& b,
                                 const PrimeContext& ctx) {
    using K = QpSubgroup::Kind;
    auto lattice_vs_lattice = [&](long k, long k2) {  // k < k2
        if (k >= 1) return MetricResult::exact(p_power(ctx, -k));
        if (k2 >= 1) return MetricResult::exact(Rat(1));
        return MetricResult::bracket(p_power(ctx, k2 - 1), p_power(ctx, k2));
    };
    auto zero_vs_lattice = [&](long k) {
        return k >= 1 ? MetricResult::exact(p_power(ctx, -k)) : MetricResult::exact(Rat(1));
    };
    auto full_vs_lattice = [&](long k) {
        if (k >= 1) return MetricResult::exact(Rat(1));
        return MetricResult::bracket(p_power(ctx, k - 1), p_power(ctx, k));
    };
    if (a.kind == K::Zero && b.kind == K::Lattice) return zero_vs_lattice(b.k);
    if (b.kind == K::Zero && a.kind == K::Lattice) return zero_vs_lattice(a.k);
    if (a.kind == K::Full && b.kind == K::Lattice) return full_vs_lattice(b.k);
    if (b.kind == K::Full && a.kind == K::Lattice) return full_vs_lattice(a.k);
    if (a.kind == K::Lattice && b.kind == K::Lattice)
        return lattice_vs_lattice(std::min(a.k, b.k), std::max(a.k, b.k));
    return MetricResult::exact(Rat(1));  // Zero vs Full
}

/// Closed form for a pair of p-adic lines in Q_p^2 (canonical forms (1,c)
/// or (0,1)). Both directions of the containment bound reduce to
/// p^{ball} |c - c'| / (max(1,|c|) max(1,|c'|)) <= p^{-dist}, so the scan
/// outcome depends only on w below. Inputs unequal.
inline MetricResult line_pair_dist(const QpModule& a, const QpModule& b,
                                   const PrimeContext& ctx) {
    auto param = [&](const QpModule& m) -> std::optional<Rat> {
        // (1, c): pivot row 0. (0, 1): pivot row 1 -> no parameter.
        if (m.vector_pivots[0] == 1) return std::nullopt;
        return m.vector_basis[0][1];
    };
    std::optional<Rat> ca = param(a), cb = param(b);
    long w;
    if (ca && cb) {
        long vdiff = valuation(*ca - *cb, ctx).v;
        long va = ca->is_zero() ? 0 : std::min(0L, valuation(*ca, ctx).v);
        long vb = cb->is_zero() ? 0 : std::min(0L, valuation(*cb, ctx).v);
        w = vdiff - va - vb;
    } else {
        // one line is the vertical axis (0,1)
        const Rat& c = ca ? *ca : *cb;
        long vc = c.is_zero() ? 0 : valuation(c, ctx).v;
        w = std::max(0L, -vc);
    }
    if (w <= 0) return MetricResult::exact(Rat(1));
    if (w % 2 == 0) return MetricResult::exact(p_power(ctx, -w / 2));
    return MetricResult::bracket(p_power(ctx, -(w + 1) / 2), p_power(ctx, -(w - 1) / 2));
}

inline bool is_line(const QpModule& m, std::size_t n) {
    return n == 2 && m.vector_basis.size() == 1 && m.lattice_basis.empty();
}

/// Generic grid scan, from eps = 1 downward to the grid floor, stopping at
/// the first failing check. eps = 1 always passes (everything in the unit
/// ball is within 1 of a subgroup), so a failure first appears either on an
/// open interval (the infimum is the grid point above, attained) or at a
/// grid point (the infimum equals that point, not attained).
inline MetricResult grid_scan_dist(const Subgroup& a, const Subgroup& b, long budget) {
    const auto& ctx = padic_ctx(a.ambient);
    const int K = ctx.precision_exponent;
    for (int j = 0; j <= K; ++j) {
        if (j > 0 && !check_cutoffs(a, b, j, j, budget))
            return MetricResult::bracket(p_power(ctx, -j), p_power(ctx, -j + 1));
        if (j < K && !check_cutoffs(a, b, j, j + 1, budget))
            return MetricResult::exact(p_power(ctx, -j));
    }
    return MetricResult::enclosure(Rat(0), p_power(ctx, -K));
}

}  // namespace detail

/// The two-sided condition at one eps: A cap ball(1/eps) inside N_eps(B)
/// and symmetrically, with both cutoffs quantized to p-powers.
inline bool neighborhood_check(const Subgroup& a, const Subgroup& b, const Rat& eps,
                               long budget = 1 << 22) {
    require_same_ambient(a.ambient, b.ambient, "neighborhood_check");
    if (eps <= 0 || eps > 1) throw InvalidInput("neighborhood_check needs 0 < eps <= 1");
    const auto& ctx = padic_ctx(a.ambient);
    long ball_exp = -ball_exponent(eps.inverse(), ctx.p);
    long dist_exp = ball_exponent(eps, ctx.p);
    Subgroup am = a, bm = b;
    if (a.ambient.kind == Ambient::Kind::PAdic) {
        // route through the module machinery in dimension 1 only when needed
        return detail::check_cutoffs(a, b, ball_exp, dist_exp, budget);
    }
    return detail::check_cutoffs(am, bm, ball_exp, dist_exp, budget);
}

/// Distance between shift subgroups: the supports determine everything.
/// d <= 2^-k iff the window supports agree on [-k, k-1].
inline MetricResult shift_dist(const Subgroup& a, const Subgroup& b) {
    require_same_ambient(a.ambient, b.ambient, "shift_dist");
    const auto &sa = std::get<ShiftSubgroup>(a.rep), &sb = std::get<ShiftSubgroup>(b.rep);
    const int W = a.ambient.shift_window;
    std::set<int> wa = window_support(sa, W), wb = window_support(sb, W);
    if (wa == wb) {
        bool raw_equal = sa.support == sb.support && sa.tail_start == sb.tail_start;
        if (raw_equal) return MetricResult::exact(Rat(0));
        throw WindowTruncation("shift_dist: supports differ only outside the window");
    }
    std::set<int> diff;
    for (int n : wa)
        if (!wb.count(n)) diff.insert(n);
    for (int n : wb)
        if (!wa.count(n)) diff.insert(n);
    long kstar = std::numeric_limits<long>::max();
    bool attained = false;
    for (int d : diff) {
        long cap = d >= 0 ? d : -static_cast<long>(d) - 1;
        if (cap < kstar) { kstar = cap; attained = false; }
        if (d >= 0 && d == kstar) attained = true;
    }
    MetricResult r = attained
        ? MetricResult::exact(Rat::pow(Rat(2), -kstar))
        : MetricResult::bracket(Rat::pow(Rat(2), -kstar - 1), Rat::pow(Rat(2), -kstar));
    return detail::clamp_to_grid(r, 2, W);
}

/// Coordinate metrics for Z, R and the circle. `err` bounds the enclosure
/// width in the R case (arctan coordinates); Z and the circle are exact.
inline MetricResult dist_coordinate(const Subgroup& a, const Subgroup& b,
                                    const Rat& err = Rat(1, BigInt("1000000000000"))) {
    require_same_ambient(a.ambient, b.ambient, "dist_coordinate");
    switch (a.ambient.kind) {
        case Ambient::Kind::Integers: {
            auto h = [](const IntSubgroup& s) {
                return s.n == 0 ? Rat(0) : Rat(BigInt(1), s.n);
            };
            return MetricResult::exact(
                (h(std::get<IntSubgroup>(a.rep)) - h(std::get<IntSubgroup>(b.rep))).abs());
        }
        case Ambient::Kind::Circle: {
            auto h = [](const CircleSubgroup& s) {
                return s.kind == CircleSubgroup::Kind::Full ? Rat(0) : Rat(BigInt(1), s.n);
            };
            return MetricResult::exact(
                (h(std::get<CircleSubgroup>(a.rep)) - h(std::get<CircleSubgroup>(b.rep))).abs());
        }
        case Ambient::Kind::Reals: {
            if (equal(a, b)) return MetricResult::exact(Rat(0));
            auto h = [&](const RealSubgroup& s) -> RatInterval {
                switch (s.kind) {
                    case RealSubgroup::Kind::Full: return RatInterval::point(Rat(0));
                    case RealSubgroup::Kind::Trivial:
                        return pi_interval(err).scaled(Rat(1, 2));
                    case RealSubgroup::Kind::Spacing: return arctan_interval(s.alpha, err / Rat(2));
                }
                throw Error("unreachable");
            };
            RatInterval d = (h(std::get<RealSubgroup>(a.rep)) - h(std::get<RealSubgroup>(b.rep))).abs();
            return MetricResult::enclosure(d.lo, d.hi);
        }
        default:
            throw NotImplementedForAmbient("dist_coordinate: Z, R or circle only");
    }
}

inline MetricResult chabauty_dist(const Subgroup& a, const Subgroup& b, long budget = 1 << 22);

/// Max-rule product metric over the prime factors.
inline MetricResult product_dist(const Subgroup& a, const Subgroup& b, long budget = 1 << 22) {
    require_same_ambient(a.ambient, b.ambient, "product_dist");
    const auto &sa = std::get<ProductSubgroup>(a.rep), &sb = std::get<ProductSubgroup>(b.rep);
    Rat lo(0), hi(0);
    bool all_exact = true;
    for (std::size_t i = 0; i < sa.components.size(); ++i) {
        Ambient fa = Ambient::padic(a.ambient.primes[i]);
        MetricResult d = chabauty_dist(Subgroup{fa, sa.components[i]},
                                       Subgroup{fa, sb.components[i]}, budget);
        lo = max(lo, d.lower);
        hi = max(hi, d.upper);
        all_exact = all_exact && d.kind == MetricResult::Kind::Exact;
    }
    if (all_exact || lo == hi) return MetricResult::exact(lo);
    return MetricResult::bracket(lo, hi);
}

/// The Chabauty distance on any supported ambient. Ultrametric ambients get
/// the grid evaluation (with closed forms where the scan outcome is known
/// analytically); coordinate ambients get their compactification formulas.
inline MetricResult chabauty_dist(const Subgroup& a, const Subgroup& b, long budget) {
    require_same_ambient(a.ambient, b.ambient, "chabauty_dist");
    switch (a.ambient.kind) {
        case Ambient::Kind::PAdic: {
            if (equal(a, b)) return MetricResult::exact(Rat(0));
            const auto& ctx = padic_ctx(a.ambient);
            MetricResult r = detail::qp_pair_dist(std::get<QpSubgroup>(a.rep),
                                                  std::get<QpSubgroup>(b.rep), ctx);
            return detail::clamp_to_grid(r, ctx.p, ctx.precision_exponent);
        }
        case Ambient::Kind::PAdicSpace: {
            if (equal(a, b)) return MetricResult::exact(Rat(0));
            const auto& ctx = padic_ctx(a.ambient);
            const auto &ma = std::get<QpModule>(a.rep), &mb = std::get<QpModule>(b.rep);
            if (detail::is_line(ma, a.ambient.dim) && detail::is_line(mb, a.ambient.dim)) {
                MetricResult r = detail::line_pair_dist(ma, mb, ctx);
                return detail::clamp_to_grid(r, ctx.p, ctx.precision_exponent);
            }
            return detail::grid_scan_dist(a, b, budget);
        }
        case Ambient::Kind::PrimeProduct:
            return product_dist(a, b, budget);
        case Ambient::Kind::Shift:
            return shift_dist(a, b);
        default:
            return dist_coordinate(a, b);
    }
}

namespace detail {
/// The grid scan without closed-form shortcuts; the cross-check route for
/// the closed forms above (desk-scale inputs only).
inline MetricResult grid_scan_dist_reference(const Subgroup& a, const Subgroup& b, long budget) {
    if (equal(a, b)) return MetricResult::exact(Rat(0));
    if (a.ambient.kind == Ambient::Kind::PAdic) {
        Ambient amb2 = Ambient::padic_space(padic_ctx(a.ambient), 1);
        amb2.ctx = padic_ctx(a.ambient);
        Subgroup a2{amb2, as_module(std::get<QpSubgroup>(a.rep), padic_ctx(a.ambient))};
        Subgroup b2{amb2, as_module(std::get<QpSubgroup>(b.rep), padic_ctx(b.ambient))};
        return grid_scan_dist(a2, b2, budget);
    }
    return grid_scan_dist(a, b, budget);
}
}  // namespace detail

}  // namespace clab
