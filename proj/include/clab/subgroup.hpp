#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "clab/error.hpp"
#include "clab/linalg.hpp"
#include "clab/padic.hpp"
#include "clab/rational.hpp"

namespace clab {

// ---------------------------------------------------------------------------
// Ambient groups

struct Ambient {
    enum class Kind { Integers, Reals, Circle, PAdic, PAdicSpace, PrimeProduct, Shift };

    Kind kind = Kind::Integers;
    std::optional<PrimeContext> ctx;        // PAdic, PAdicSpace
    std::size_t dim = 1;                    // PAdicSpace
    std::vector<PrimeContext> primes;       // PrimeProduct (one Q_p line per prime)
    int shift_order = 2;                    // |F|
    int shift_window = 16;                  // W: metric window is -W..W

    static Ambient integers() { return Ambient{Kind::Integers, {}, 1, {}, 2, 16}; }
    static Ambient reals() { return Ambient{Kind::Reals, {}, 1, {}, 2, 16}; }
    static Ambient circle() { return Ambient{Kind::Circle, {}, 1, {}, 2, 16}; }
    static Ambient padic(PrimeContext c) { return Ambient{Kind::PAdic, c, 1, {}, 2, 16}; }
    static Ambient padic_space(PrimeContext c, std::size_t n) {
        if (n < 1) throw InvalidInput("p-adic space dimension must be >= 1");
        return Ambient{Kind::PAdicSpace, c, n, {}, 2, 16};
    }
    static Ambient prime_product(std::vector<PrimeContext> cs) {
        if (cs.empty()) throw InvalidInput("prime product needs at least one prime");
        for (std::size_t i = 0; i < cs.size(); ++i)
            for (std::size_t j = i + 1; j < cs.size(); ++j)
                if (cs[i].p == cs[j].p)
                    throw InvalidInput("prime product requires pairwise distinct primes");
        return Ambient{Kind::PrimeProduct, {}, cs.size(), std::move(cs), 2, 16};
    }
    static Ambient shift(int f, int window) {
        if (f < 2) throw InvalidInput("shift group needs |F| >= 2");
        if (window < 1) throw InvalidInput("shift window must be >= 1");
        return Ambient{Kind::Shift, {}, 1, {}, f, window};
    }

    bool ultrametric() const {
        return kind == Kind::PAdic || kind == Kind::PAdicSpace ||
               kind == Kind::PrimeProduct || kind == Kind::Shift;
    }

    friend bool operator==(const Ambient& a, const Ambient& b) {
        if (a.kind != b.kind) return false;
        switch (a.kind) {
            case Kind::PAdic: return a.ctx->p == b.ctx->p;
            case Kind::PAdicSpace: return a.ctx->p == b.ctx->p && a.dim == b.dim;
            case Kind::PrimeProduct: {
                if (a.primes.size() != b.primes.size()) return false;
                for (std::size_t i = 0; i < a.primes.size(); ++i)
                    if (a.primes[i].p != b.primes[i].p) return false;
                return true;
            }
            case Kind::Shift:
                return a.shift_order == b.shift_order && a.shift_window == b.shift_window;
            default: return true;
        }
    }
    friend bool operator!=(const Ambient& a, const Ambient& b) { return !(a == b); }
};

inline void require_same_ambient(const Ambient& a, const Ambient& b, const char* what) {
    if (a != b) throw AmbientMismatch(std::string(what) + ": operands in different ambient groups");
}

// ---------------------------------------------------------------------------
// Elements of ambient groups (exact; reals restricted to rational points,
// which is all the witness constructions ever need)

struct Element {
    Ambient ambient;
    // Integers/Reals/Circle/PAdic: scalar; PAdicSpace/PrimeProduct: vector;
    // Shift: finitely supported map coordinate -> symbol in [0, |F|).
    std::variant<Rat, QVec, std::map<int, int>> value;

    const Rat& scalar() const { return std::get<Rat>(value); }
    const QVec& vec() const { return std::get<QVec>(value); }
    const std::map<int, int>& word() const { return std::get<std::map<int, int>>(value); }
};

inline Element elem_scalar(const Ambient& a, Rat x) { return Element{a, std::move(x)}; }
inline Element elem_vec(const Ambient& a, QVec x) {
    std::size_t want = a.kind == Ambient::Kind::PrimeProduct ? a.primes.size() : a.dim;
    if (x.size() != want) throw InvalidInput("element dimension does not match ambient");
    return Element{a, std::move(x)};
}
inline Element elem_word(const Ambient& a, std::map<int, int> w) {
    for (auto& [n, s] : w)
        if (s < 0 || s >= a.shift_order) throw InvalidInput("shift symbol out of range");
    std::erase_if(w, [](const auto& kv) { return kv.second == 0; });
    return Element{a, std::move(w)};
}

/// Max-norm of an element of an ultrametric ambient, as an exact rational.
inline Rat element_norm(const Element& x) {
    switch (x.ambient.kind) {
        case Ambient::Kind::PAdic:
            return norm_p(x.scalar(), *x.ambient.ctx);
        case Ambient::Kind::PAdicSpace: {
            Rat m(0);
            for (const auto& c : x.vec()) m = max(m, norm_p(c, *x.ambient.ctx));
            return m;
        }
        case Ambient::Kind::PrimeProduct: {
            Rat m(0);
            for (std::size_t i = 0; i < x.vec().size(); ++i)
                m = max(m, norm_p(x.vec()[i], x.ambient.primes[i]));
            return m;
        }
        case Ambient::Kind::Shift: {
            if (x.word().empty()) return Rat(0);
            int n = x.word().begin()->first;  // smallest coordinate has largest weight
            return Rat::pow(Rat(2), -n);
        }
        default:
            throw NotImplementedForAmbient("element_norm: not an ultrametric ambient");
    }
}

// ---------------------------------------------------------------------------
// Closed-subgroup representations

struct IntSubgroup {
    BigInt n;  // the subgroup nZ; n = 0 is the trivial group
};

struct RealSubgroup {
    enum class Kind { Trivial, Spacing, Full } kind = Kind::Trivial;
    Rat alpha;  // spacing > 0 when kind == Spacing
};

struct CircleSubgroup {
    enum class Kind { Cyclic, Full } kind = Kind::Full;
    BigInt n;  // order of the cyclic subgroup, n >= 1
};

struct QpSubgroup {
    enum class Kind { Zero, Lattice, Full } kind = Kind::Zero;
    long k = 0;  // Lattice means p^k Z_p
};

/// Closed Z_p-submodule of Q_p^n: a Q_p-subspace (vector part) plus a
/// finitely generated lattice meeting it only at 0. Stored canonically:
/// vector part in reduced column echelon form, lattice generators zeroed in
/// the vector pivot rows and brought to valuation-pivoted echelon form.
struct QpModule {
    QCols vector_basis;
    QCols lattice_basis;
    std::vector<std::size_t> vector_pivots;
    std::vector<std::size_t> lattice_pivots;
    std::vector<long> lattice_pivot_vals;
};

struct ProductSubgroup {
    std::vector<QpSubgroup> components;  // one per prime factor
};

/// H_S: the compact subgroup of the restricted product supported on S,
/// where S is a finite set plus an optional cofinite tail [tail_start, oo).
struct ShiftSubgroup {
    std::set<int> support;
    std::optional<int> tail_start;

    bool contains_coord(int n) const {
        if (tail_start && n >= *tail_start) return true;
        return support.count(n) > 0;
    }
};

struct Subgroup {
    Ambient ambient;
    std::variant<IntSubgroup, RealSubgroup, CircleSubgroup, QpSubgroup, QpModule,
                 ProductSubgroup, ShiftSubgroup>
        rep;
};

// --- constructors -----------------------------------------------------------

inline Subgroup sub_int(BigInt n) {
    if (n < 0) n = -n;
    return Subgroup{Ambient::integers(), IntSubgroup{std::move(n)}};
}
inline Subgroup sub_real_trivial() {
    return Subgroup{Ambient::reals(), RealSubgroup{RealSubgroup::Kind::Trivial, Rat(0)}};
}
inline Subgroup sub_real_spacing(const Rat& alpha) {
    if (alpha <= 0) throw InvalidInput("spacing must be positive");
    return Subgroup{Ambient::reals(), RealSubgroup{RealSubgroup::Kind::Spacing, alpha}};
}
inline Subgroup sub_real_full() {
    return Subgroup{Ambient::reals(), RealSubgroup{RealSubgroup::Kind::Full, Rat(0)}};
}
inline Subgroup sub_circle_cyclic(BigInt n) {
    if (n < 1) throw InvalidInput("cyclic subgroup order must be >= 1");
    return Subgroup{Ambient::circle(), CircleSubgroup{CircleSubgroup::Kind::Cyclic, std::move(n)}};
}
inline Subgroup sub_circle_full() {
    return Subgroup{Ambient::circle(), CircleSubgroup{CircleSubgroup::Kind::Full, 1}};
}
inline Subgroup qp_zero(const Ambient& a) { return Subgroup{a, QpSubgroup{QpSubgroup::Kind::Zero, 0}}; }
inline Subgroup qp_lattice(const Ambient& a, long k) {
    return Subgroup{a, QpSubgroup{QpSubgroup::Kind::Lattice, k}};
}
inline Subgroup qp_full(const Ambient& a) { return Subgroup{a, QpSubgroup{QpSubgroup::Kind::Full, 0}}; }

/// Canonicalize generator matrices into the unique stored form.
/// Dependent vector-part columns are rejected; lattice generators lying in
/// the vector part are absorbed.
inline QpModule canonicalize_module(QCols vector_gens, QCols lattice_gens, std::size_t n,
                                    const PrimeContext& ctx) {
    for (const auto& c : vector_gens)
        if (c.size() != n) throw InvalidInput("vector generator has wrong dimension");
    for (const auto& c : lattice_gens)
        if (c.size() != n) throw InvalidInput("lattice generator has wrong dimension");

    const std::size_t given = vector_gens.size();
    linalg::Echelon vech = linalg::rcef(std::move(vector_gens), n);
    if (vech.cols.size() != given)
        throw InvalidInput("vector basis columns are dependent");

    // Reduce lattice generators modulo the vector part: clear pivot rows.
    for (auto& g : lattice_gens)
        for (std::size_t i = 0; i < vech.cols.size(); ++i) {
            const std::size_t r = vech.pivot_rows[i];
            if (!g[r].is_zero()) linalg::axpy(g, -g[r], vech.cols[i]);
        }
    linalg::DvrEchelon lech = linalg::dvr_echelon(std::move(lattice_gens), n, ctx);

    QpModule m;
    m.vector_basis = std::move(vech.cols);
    m.vector_pivots = std::move(vech.pivot_rows);
    m.lattice_basis = std::move(lech.cols);
    m.lattice_pivots = std::move(lech.pivot_rows);
    m.lattice_pivot_vals = std::move(lech.pivot_vals);
    return m;
}

inline Subgroup qpn_module(const Ambient& a, QCols vector_gens, QCols lattice_gens) {
    if (a.kind != Ambient::Kind::PAdicSpace)
        throw InvalidInput("qpn_module needs a p-adic space ambient");
    return Subgroup{a, canonicalize_module(std::move(vector_gens), std::move(lattice_gens),
                                           a.dim, *a.ctx)};
}
inline Subgroup qpn_zero(const Ambient& a) { return qpn_module(a, {}, {}); }
inline Subgroup qpn_full(const Ambient& a) {
    return qpn_module(a, linalg::identity(a.dim), {});
}
/// The p-adic line (a,b)Q_p in Q_p^2.
inline Subgroup qp2_line(const Ambient& a, const Rat& x, const Rat& y) {
    if (a.kind != Ambient::Kind::PAdicSpace || a.dim != 2)
        throw InvalidInput("qp2_line needs a 2-dimensional p-adic ambient");
    if (x.is_zero() && y.is_zero()) throw InvalidInput("line direction must be nonzero");
    return qpn_module(a, {QVec{x, y}}, {});
}

inline Subgroup product_subgroup(const Ambient& a, std::vector<QpSubgroup> comps) {
    if (a.kind != Ambient::Kind::PrimeProduct || comps.size() != a.primes.size())
        throw InvalidInput("product subgroup needs one component per prime");
    return Subgroup{a, ProductSubgroup{std::move(comps)}};
}

inline Subgroup shift_subgroup(const Ambient& a, std::set<int> support,
                               std::optional<int> tail_start = std::nullopt) {
    if (a.kind != Ambient::Kind::Shift) throw InvalidInput("shift subgroup needs a shift ambient");
    if (tail_start)
        std::erase_if(support, [&](int n) { return n >= *tail_start; });
    return Subgroup{a, ShiftSubgroup{std::move(support), tail_start}};
}

inline Subgroup shift_identity(const Ambient& a) { return shift_subgroup(a, {}); }

// --- helpers ----------------------------------------------------------------

inline const PrimeContext& padic_ctx(const Ambient& a) {
    if (!a.ctx) throw InvalidInput("ambient has no prime context");
    return *a.ctx;
}

/// QpSubgroup viewed as a 1-dimensional module, used to funnel the n = 1
/// case through the generic machinery.
inline QpModule as_module(const QpSubgroup& s, const PrimeContext& ctx) {
    switch (s.kind) {
        case QpSubgroup::Kind::Zero: return canonicalize_module({}, {}, 1, ctx);
        case QpSubgroup::Kind::Full: return canonicalize_module({QVec{Rat(1)}}, {}, 1, ctx);
        case QpSubgroup::Kind::Lattice:
            return canonicalize_module({}, {QVec{p_power(ctx, s.k)}}, 1, ctx);
    }
    throw Error("unreachable");
}

/// Truncation of a shift support to the metric window [-W, W].
inline std::set<int> window_support(const ShiftSubgroup& s, int W) {
    std::set<int> out;
    for (int n : s.support)
        if (n >= -W && n <= W) out.insert(n);
    if (s.tail_start)
        for (int n = std::max(-W, *s.tail_start); n <= W; ++n) out.insert(n);
    return out;
}

/// True if the support reaches outside the window (so window comparisons
/// may not determine the subgroup).
inline bool support_escapes_window(const ShiftSubgroup& s, int W) {
    for (int n : s.support)
        if (n < -W || n > W) return true;
    return s.tail_start && *s.tail_start > W;
}

// ---------------------------------------------------------------------------
// Membership

inline bool member(const Element& x, const Subgroup& h);

namespace detail {

inline bool module_member(const QVec& x, const QpModule& m, const PrimeContext& ctx) {
    QVec y = x;
    for (std::size_t i = 0; i < m.vector_basis.size(); ++i) {
        const std::size_t r = m.vector_pivots[i];
        if (!y[r].is_zero()) linalg::axpy(y, -y[r], m.vector_basis[i]);
    }
    if (linalg::is_zero_vec(y)) return true;
    if (m.lattice_basis.empty()) return false;
    auto coeff = linalg::solve_in_colspace(m.lattice_basis, y);
    if (!coeff) return false;
    for (const auto& c : *coeff)
        if (!linalg::in_local_ring(c, ctx)) return false;
    return true;
}

/// Membership in the vector (divisible) part alone.
inline bool subspace_member(const QVec& x, const QpModule& m) {
    QVec y = x;
    for (std::size_t i = 0; i < m.vector_basis.size(); ++i) {
        const std::size_t r = m.vector_pivots[i];
        if (!y[r].is_zero()) linalg::axpy(y, -y[r], m.vector_basis[i]);
    }
    return linalg::is_zero_vec(y);
}

}  // namespace detail

inline bool member(const Element& x, const Subgroup& h) {
    require_same_ambient(x.ambient, h.ambient, "member");
    switch (h.ambient.kind) {
        case Ambient::Kind::Integers: {
            const auto& s = std::get<IntSubgroup>(h.rep);
            const Rat& v = x.scalar();
            if (!v.is_integer()) throw InvalidInput("element of Z must be an integer");
            if (s.n == 0) return v.is_zero();
            return v.num() % s.n == 0;
        }
        case Ambient::Kind::Reals: {
            const auto& s = std::get<RealSubgroup>(h.rep);
            switch (s.kind) {
                case RealSubgroup::Kind::Trivial: return x.scalar().is_zero();
                case RealSubgroup::Kind::Full: return true;
                case RealSubgroup::Kind::Spacing: return (x.scalar() / s.alpha).is_integer();
            }
            return false;
        }
        case Ambient::Kind::Circle: {
            const auto& s = std::get<CircleSubgroup>(h.rep);
            if (s.kind == CircleSubgroup::Kind::Full) return true;
            return (x.scalar() * Rat(s.n)).is_integer();
        }
        case Ambient::Kind::PAdic: {
            const auto& s = std::get<QpSubgroup>(h.rep);
            switch (s.kind) {
                case QpSubgroup::Kind::Zero: return x.scalar().is_zero();
                case QpSubgroup::Kind::Full: return true;
                case QpSubgroup::Kind::Lattice: {
                    Valuation v = valuation(x.scalar(), padic_ctx(h.ambient));
                    return v.infinite || v.v >= s.k;
                }
            }
            return false;
        }
        case Ambient::Kind::PAdicSpace:
            return detail::module_member(x.vec(), std::get<QpModule>(h.rep), padic_ctx(h.ambient));
        case Ambient::Kind::PrimeProduct: {
            const auto& s = std::get<ProductSubgroup>(h.rep);
            for (std::size_t i = 0; i < s.components.size(); ++i) {
                Ambient fa = Ambient::padic(h.ambient.primes[i]);
                if (!member(elem_scalar(fa, x.vec()[i]), Subgroup{fa, s.components[i]}))
                    return false;
            }
            return true;
        }
        case Ambient::Kind::Shift: {
            const auto& s = std::get<ShiftSubgroup>(h.rep);
            for (const auto& [n, sym] : x.word())
                if (sym != 0 && !s.contains_coord(n)) return false;
            return true;
        }
    }
    return false;
}

// ---------------------------------------------------------------------------
// Equality (mutual membership is the ground truth; canonical forms make it
// a cheap generator check)

inline bool equal(const Subgroup& a, const Subgroup& b) {
    require_same_ambient(a.ambient, b.ambient, "equal");
    switch (a.ambient.kind) {
        case Ambient::Kind::Integers:
            return std::get<IntSubgroup>(a.rep).n == std::get<IntSubgroup>(b.rep).n;
        case Ambient::Kind::Reals: {
            const auto &x = std::get<RealSubgroup>(a.rep), &y = std::get<RealSubgroup>(b.rep);
            if (x.kind != y.kind) return false;
            return x.kind != RealSubgroup::Kind::Spacing || x.alpha == y.alpha;
        }
        case Ambient::Kind::Circle: {
            const auto &x = std::get<CircleSubgroup>(a.rep), &y = std::get<CircleSubgroup>(b.rep);
            if (x.kind != y.kind) return false;
            return x.kind != CircleSubgroup::Kind::Cyclic || x.n == y.n;
        }
        case Ambient::Kind::PAdic: {
            const auto &x = std::get<QpSubgroup>(a.rep), &y = std::get<QpSubgroup>(b.rep);
            if (x.kind != y.kind) return false;
            return x.kind != QpSubgroup::Kind::Lattice || x.k == y.k;
        }
        case Ambient::Kind::PAdicSpace: {
            const auto &x = std::get<QpModule>(a.rep), &y = std::get<QpModule>(b.rep);
            // Mutual inclusion. The divisible part of x must land in the
            // divisible part of y (a lattice direction cannot absorb it),
            // so vector generators are checked against the subspace alone.
            for (const auto& g : x.vector_basis)
                if (!detail::subspace_member(g, y)) return false;
            for (const auto& g : x.lattice_basis)
                if (!detail::module_member(g, y, padic_ctx(a.ambient))) return false;
            for (const auto& g : y.vector_basis)
                if (!detail::subspace_member(g, x)) return false;
            for (const auto& g : y.lattice_basis)
                if (!detail::module_member(g, x, padic_ctx(a.ambient))) return false;
            return true;
        }
        case Ambient::Kind::PrimeProduct: {
            const auto &x = std::get<ProductSubgroup>(a.rep), &y = std::get<ProductSubgroup>(b.rep);
            for (std::size_t i = 0; i < x.components.size(); ++i) {
                Ambient fa = Ambient::padic(a.ambient.primes[i]);
                if (!equal(Subgroup{fa, x.components[i]}, Subgroup{fa, y.components[i]}))
                    return false;
            }
            return true;
        }
        case Ambient::Kind::Shift: {
            const auto &x = std::get<ShiftSubgroup>(a.rep), &y = std::get<ShiftSubgroup>(b.rep);
            const int W = a.ambient.shift_window;
            return window_support(x, W) == window_support(y, W);
        }
    }
    return false;
}

/// Bitwise identity of canonical module forms; used to cross-check equal().
inline bool canonical_identical(const QpModule& a, const QpModule& b) {
    return a.vector_basis == b.vector_basis && a.lattice_basis == b.lattice_basis &&
           a.vector_pivots == b.vector_pivots && a.lattice_pivots == b.lattice_pivots;
}

// ---------------------------------------------------------------------------
// Closure of a cyclic subgroup

inline Subgroup closure_of_cyclic(const Element& x) {
    switch (x.ambient.kind) {
        case Ambient::Kind::Integers: {
            if (!x.scalar().is_integer()) throw InvalidInput("element of Z must be an integer");
            BigInt n = x.scalar().num();
            return sub_int(n < 0 ? BigInt(-n) : n);
        }
        case Ambient::Kind::Reals:
            return x.scalar().is_zero() ? sub_real_trivial() : sub_real_spacing(x.scalar().abs());
        case Ambient::Kind::PAdic: {
            if (x.scalar().is_zero()) return qp_zero(x.ambient);
            return qp_lattice(x.ambient, valuation(x.scalar(), padic_ctx(x.ambient)).v);
        }
        case Ambient::Kind::PAdicSpace: {
            if (linalg::is_zero_vec(x.vec())) return qpn_zero(x.ambient);
            return qpn_module(x.ambient, {}, {x.vec()});
        }
        case Ambient::Kind::PrimeProduct: {
            std::vector<QpSubgroup> comps;
            for (std::size_t i = 0; i < x.ambient.primes.size(); ++i) {
                const Rat& c = x.vec()[i];
                if (c.is_zero())
                    comps.push_back(QpSubgroup{QpSubgroup::Kind::Zero, 0});
                else
                    comps.push_back(QpSubgroup{QpSubgroup::Kind::Lattice,
                                               valuation(c, x.ambient.primes[i]).v});
            }
            return product_subgroup(x.ambient, std::move(comps));
        }
        default:
            throw NotImplementedForAmbient("closure_of_cyclic: unsupported ambient");
    }
}

/// Closure of the subgroup generated by finitely many elements of a product
/// of distinct Q_p, as the product of the per-factor closures. The factor
/// closures are the closures of the coordinate projections; the multiplier
/// sequence l^k with l = (p_1...p_n)/p_i recovers each factor inside the
/// closure, which the tests verify at precision p^-K.
inline Subgroup decompose_product(const Ambient& a, const std::vector<QVec>& generators) {
    if (a.kind != Ambient::Kind::PrimeProduct)
        throw InvalidInput("decompose_product needs a prime-product ambient");
    std::vector<QpSubgroup> comps;
    for (std::size_t i = 0; i < a.primes.size(); ++i) {
        std::optional<long> best;
        for (const auto& g : generators) {
            if (g.size() != a.primes.size())
                throw InvalidInput("generator dimension does not match prime count");
            if (g[i].is_zero()) continue;
            long v = valuation(g[i], a.primes[i]).v;
            if (!best || v < *best) best = v;
        }
        if (!best)
            comps.push_back(QpSubgroup{QpSubgroup::Kind::Zero, 0});
        else
            comps.push_back(QpSubgroup{QpSubgroup::Kind::Lattice, *best});
    }
    return product_subgroup(a, std::move(comps));
}

// ---------------------------------------------------------------------------
// Balls and coset representatives (ultrametric ambients)

/// Smallest m with p^-m <= r, i.e. the closed ball of radius r equals p^m R^n.
inline long ball_exponent(const Rat& r, std::int64_t p) {
    if (r <= 0) throw InvalidInput("ball radius must be positive");
    Rat inv = r.inverse();
    long m = 0;
    Rat pw(1);  // p^m
    while (pw < inv) { pw *= Rat(p); ++m; }
    while (pw / Rat(p) >= inv) { pw /= Rat(p); --m; }
    return m;
}

namespace detail {

/// Lattice basis of (V + L) intersect R^n, inputs canonical.
inline QCols module_unit_ball(const QpModule& m, std::size_t n, const PrimeContext& ctx) {
    const std::size_t d = m.vector_basis.size(), dl = m.lattice_basis.size();
    if (d + dl == 0) return {};
    // Coefficients (a, c) in R^{d+dl} with the non-pivot rows of V a + L c
    // landing in R. Pivot rows contribute the constraint a in R^d, which the
    // preimage lattice encodes by restricting to the listed rows only.
    std::vector<std::size_t> free_rows;
    for (std::size_t r = 0; r < n; ++r)
        if (std::find(m.vector_pivots.begin(), m.vector_pivots.end(), r) == m.vector_pivots.end())
            free_rows.push_back(r);
    QCols constraint;
    constraint.reserve(d + dl);
    auto restricted = [&](const QVec& col) {
        QVec out(free_rows.size());
        for (std::size_t i = 0; i < free_rows.size(); ++i) out[i] = col[free_rows[i]];
        return out;
    };
    for (const auto& col : m.vector_basis) constraint.push_back(restricted(col));
    for (const auto& col : m.lattice_basis) constraint.push_back(restricted(col));
    QCols coeff_basis = linalg::preimage_lattice(constraint, free_rows.size(), ctx);
    QCols all;
    all.reserve(d + dl);
    for (const auto& col : m.vector_basis) all.push_back(col);
    for (const auto& col : m.lattice_basis) all.push_back(col);
    QCols gens;
    gens.reserve(coeff_basis.size());
    for (const auto& c : coeff_basis) gens.push_back(linalg::mat_vec(all, c));
    return gens;
}

/// H intersect closed-ball(0, p^-m), as a canonical lattice-only module.
inline QpModule module_ball_lattice(const QpModule& m, std::size_t n, const PrimeContext& ctx,
                                    long ball_exp) {
    // H cap p^m R^n  =  p^m ((p^-m H) cap R^n); scaling the lattice part by
    // p^-m realizes p^-m H since the vector part is scale invariant.
    Rat s = p_power(ctx, -ball_exp);
    QpModule scaled_mod = m;
    for (auto& col : scaled_mod.lattice_basis) col = linalg::scaled(col, s);
    QCols gens = module_unit_ball(scaled_mod, n, ctx);
    Rat back = p_power(ctx, ball_exp);
    for (auto& col : gens) col = linalg::scaled(col, back);
    return canonicalize_module({}, std::move(gens), n, ctx);
}

}  // namespace detail

/// H intersect closed-ball(identity, r), canonical. Ultrametric ambients
/// only; the intersection is again a (compact) subgroup there.
inline Subgroup module_ball(const Subgroup& h, const Rat& r) {
    if (r <= 0) throw InvalidInput("module_ball: radius must be positive");
    switch (h.ambient.kind) {
        case Ambient::Kind::PAdic: {
            const auto& ctx = padic_ctx(h.ambient);
            long m = ball_exponent(r, ctx.p);
            const auto& s = std::get<QpSubgroup>(h.rep);
            switch (s.kind) {
                case QpSubgroup::Kind::Zero: return qp_zero(h.ambient);
                case QpSubgroup::Kind::Full: return qp_lattice(h.ambient, m);
                case QpSubgroup::Kind::Lattice:
                    return qp_lattice(h.ambient, std::max(s.k, m));
            }
            throw Error("unreachable");
        }
        case Ambient::Kind::PAdicSpace: {
            const auto& ctx = padic_ctx(h.ambient);
            long m = ball_exponent(r, ctx.p);
            QpModule ball =
                detail::module_ball_lattice(std::get<QpModule>(h.rep), h.ambient.dim, ctx, m);
            return Subgroup{h.ambient, std::move(ball)};
        }
        case Ambient::Kind::PrimeProduct: {
            const auto& s = std::get<ProductSubgroup>(h.rep);
            std::vector<QpSubgroup> comps;
            for (std::size_t i = 0; i < s.components.size(); ++i) {
                Ambient fa = Ambient::padic(h.ambient.primes[i]);
                Subgroup b = module_ball(Subgroup{fa, s.components[i]}, r);
                comps.push_back(std::get<QpSubgroup>(b.rep));
            }
            return product_subgroup(h.ambient, std::move(comps));
        }
        case Ambient::Kind::Shift: {
            const auto& s = std::get<ShiftSubgroup>(h.rep);
            // ball(r) keeps the coordinates n with 2^-n <= r.
            long cut = ball_exponent(r, 2);  // smallest m with 2^-m <= r
            std::set<int> kept;
            for (int n : s.support)
                if (n >= cut) kept.insert(n);
            std::optional<int> tail = s.tail_start;
            if (tail && *tail < cut) tail = static_cast<int>(cut);
            return shift_subgroup(h.ambient, std::move(kept), tail);
        }
        default:
            throw NotImplementedForAmbient(
                "module_ball: coordinate ambients use closed-form metrics instead");
    }
}

/// Exact representatives of (H cap ball(R)) / (H cap ball(eps)).
/// Throws BudgetExceeded before enumerating more than `budget` classes.
inline std::vector<Element> coset_reps(const Subgroup& h, const Rat& R, const Rat& eps,
                                       long budget = 1 << 22) {
    if (eps <= 0 || eps > R) throw InvalidInput("coset_reps needs 0 < eps <= R");
    switch (h.ambient.kind) {
        case Ambient::Kind::PAdic: {
            const auto& ctx = padic_ctx(h.ambient);
            auto big = std::get<QpSubgroup>(module_ball(h, R).rep);
            auto small = std::get<QpSubgroup>(module_ball(h, eps).rep);
            if (big.kind == QpSubgroup::Kind::Zero)
                return {elem_scalar(h.ambient, Rat(0))};
            long a = big.k, b = small.k;  // both lattices; a <= b
            BigInt count = Rat::pow(Rat(ctx.p), b - a).num();
            if (count > budget) throw BudgetExceeded("coset_reps: class count exceeds budget");
            std::vector<Element> out;
            Rat base = p_power(ctx, a);
            for (BigInt t = 0; t < count; ++t)
                out.push_back(elem_scalar(h.ambient, Rat(t) * base));
            return out;
        }
        case Ambient::Kind::PAdicSpace: {
            const auto& ctx = padic_ctx(h.ambient);
            const std::size_t n = h.ambient.dim;
            QpModule big = std::get<QpModule>(module_ball(h, R).rep);
            QpModule small = std::get<QpModule>(module_ball(h, eps).rep);
            if (big.lattice_basis.empty())
                return {elem_vec(h.ambient, linalg::zero_vec(n))};
            // Express the small lattice in the big basis and diagonalize.
            QCols coeff;
            for (const auto& col : small.lattice_basis) {
                auto c = linalg::solve_in_colspace(big.lattice_basis, col);
                if (!c) throw Error("coset_reps: ball inclusion violated");
                coeff.push_back(*c);
            }
            const std::size_t d = big.lattice_basis.size();
            linalg::DvrSmith sm = linalg::dvr_smith(coeff, d, ctx);
            if (sm.rank != d) throw Error("coset_reps: quotient is not finite");
            QCols adapted = linalg::mat_mat(big.lattice_basis, sm.U);
            BigInt count = 1;
            for (long s : sm.svals) {
                if (s < 0) throw Error("coset_reps: small ball not inside big ball");
                count *= Rat::pow(Rat(ctx.p), s).num();
                if (count > budget) throw BudgetExceeded("coset_reps: class count exceeds budget");
            }
            std::vector<Element> out;
            out.reserve(count.convert_to<std::size_t>());
            std::vector<BigInt> digits(d, 0);
            std::vector<BigInt> caps(d);
            for (std::size_t i = 0; i < d; ++i) caps[i] = Rat::pow(Rat(ctx.p), sm.svals[i]).num();
            for (;;) {
                QVec pt = linalg::zero_vec(n);
                for (std::size_t i = 0; i < d; ++i)
                    if (digits[i] != 0) linalg::axpy(pt, Rat(digits[i]), adapted[i]);
                out.push_back(elem_vec(h.ambient, std::move(pt)));
                std::size_t i = 0;
                while (i < d && ++digits[i] == caps[i]) digits[i++] = 0;
                if (i == d) break;
            }
            return out;
        }
        case Ambient::Kind::PrimeProduct: {
            std::vector<std::vector<Element>> factor_reps;
            BigInt count = 1;
            for (std::size_t i = 0; i < h.ambient.primes.size(); ++i) {
                Ambient fa = Ambient::padic(h.ambient.primes[i]);
                Subgroup fh{fa, std::get<ProductSubgroup>(h.rep).components[i]};
                factor_reps.push_back(coset_reps(fh, R, eps, budget));
                count *= BigInt(factor_reps.back().size());
                if (count > budget) throw BudgetExceeded("coset_reps: class count exceeds budget");
            }
            std::vector<Element> out;
            std::vector<std::size_t> idx(factor_reps.size(), 0);
            for (;;) {
                QVec pt(factor_reps.size());
                for (std::size_t i = 0; i < factor_reps.size(); ++i)
                    pt[i] = factor_reps[i][idx[i]].scalar();
                out.push_back(elem_vec(h.ambient, std::move(pt)));
                std::size_t i = 0;
                while (i < idx.size() && ++idx[i] == factor_reps[i].size()) idx[i++] = 0;
                if (i == idx.size()) break;
            }
            return out;
        }
        case Ambient::Kind::Shift: {
            auto big = std::get<ShiftSubgroup>(module_ball(h, R).rep);
            auto small = std::get<ShiftSubgroup>(module_ball(h, eps).rep);
            const int W = h.ambient.shift_window;
            std::set<int> bigw = window_support(big, W), smallw = window_support(small, W);
            std::vector<int> coords;
            for (int n : bigw)
                if (!smallw.count(n)) coords.push_back(n);
            BigInt count = 1;
            for (std::size_t i = 0; i < coords.size(); ++i) {
                count *= h.ambient.shift_order;
                if (count > budget) throw BudgetExceeded("coset_reps: class count exceeds budget");
            }
            std::vector<Element> out;
            std::vector<int> digits(coords.size(), 0);
            for (;;) {
                std::map<int, int> w;
                for (std::size_t i = 0; i < coords.size(); ++i)
                    if (digits[i] != 0) w[coords[i]] = digits[i];
                out.push_back(elem_word(h.ambient, std::move(w)));
                std::size_t i = 0;
                while (i < coords.size() && ++digits[i] == h.ambient.shift_order) digits[i++] = 0;
                if (i == coords.size()) break;
            }
            return out;
        }
        default:
            throw NotImplementedForAmbient("coset_reps: ultrametric ambients only");
    }
}

}  // namespace clab
