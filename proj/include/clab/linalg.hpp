#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <utility>
#include <vector>

#include "clab/error.hpp"
#include "clab/padic.hpp"
#include "clab/rational.hpp"

// Small dense exact-rational linear algebra, column-major, over two rings:
// the field Q (echelon forms of subspaces) and the local ring
// R = Z_(p) = { a/b : p does not divide b } (lattice echelon, Smith form).
// Everything here is deterministic: fixed pivot rules, no randomization.

namespace clab {

using QVec = std::vector<Rat>;
using QCols = std::vector<QVec>;  // list of columns, all the same length

namespace linalg {

inline long val_or_huge(const Rat& x, const PrimeContext& ctx) {
    Valuation v = valuation(x, ctx);
    return v.infinite ? std::numeric_limits<long>::max() / 4 : v.v;
}

inline bool in_local_ring(const Rat& x, const PrimeContext& ctx) {
    return x.is_zero() || valuation(x, ctx).v >= 0;
}

inline QVec zero_vec(std::size_t n) { return QVec(n, Rat(0)); }

inline QVec scaled(const QVec& v, const Rat& c) {
    QVec r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) r[i] = v[i] * c;
    return r;
}

inline void axpy(QVec& y, const Rat& c, const QVec& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += c * x[i];
}

inline bool is_zero_vec(const QVec& v) {
    return std::all_of(v.begin(), v.end(), [](const Rat& x) { return x.is_zero(); });
}

inline QVec mat_vec(const QCols& cols, const QVec& c) {
    if (cols.size() != c.size()) throw InvalidInput("mat_vec dimension mismatch");
    QVec out = cols.empty() ? QVec{} : zero_vec(cols.front().size());
    for (std::size_t j = 0; j < cols.size(); ++j) axpy(out, c[j], cols[j]);
    return out;
}

inline QCols mat_mat(const QCols& a, const QCols& b) {
    QCols out;
    out.reserve(b.size());
    for (const auto& col : b) out.push_back(mat_vec(a, col));
    return out;
}

inline QCols identity(std::size_t n) {
    QCols id(n, zero_vec(n));
    for (std::size_t i = 0; i < n; ++i) id[i][i] = Rat(1);
    return id;
}

/// Reduced column echelon form over Q. Pivot scan: rows top to bottom,
/// first nonzero among the not-yet-pivoted columns (lowest index). Pivots
/// normalized to 1 and their rows cleared in every other column, so the
/// output is the unique RCEF of the column space, columns ordered by pivot
/// row. Zero columns are dropped.
struct Echelon {
    QCols cols;
    std::vector<std::size_t> pivot_rows;
};

inline Echelon rcef(QCols cols, std::size_t n) {
    Echelon out;
    std::size_t done = 0;  // cols[0..done) are pivoted
    for (std::size_t r = 0; r < n && done < cols.size(); ++r) {
        std::size_t j = done;
        while (j < cols.size() && cols[j][r].is_zero()) ++j;
        if (j == cols.size()) continue;
        std::swap(cols[done], cols[j]);
        Rat piv = cols[done][r];
        cols[done] = scaled(cols[done], piv.inverse());
        for (std::size_t k = 0; k < cols.size(); ++k) {
            if (k == done || cols[k][r].is_zero()) continue;
            axpy(cols[k], -cols[k][r], cols[done]);
        }
        out.pivot_rows.push_back(r);
        ++done;
    }
    cols.resize(done);
    out.cols = std::move(cols);
    return out;
}

/// x in R reduced mod p^k R: the unique integer in [0, p^k) congruent to x.
inline Rat canonical_residue(const Rat& x, const PrimeContext& ctx, long k) {
    if (k <= 0) return Rat(0);
    if (!in_local_ring(x, ctx)) throw DomainError("residue of element outside Z_(p)");
    BigInt mod = Rat::pow(Rat(ctx.p), k).num();
    BigInt a = x.num() % mod, b = x.den() % mod;
    if (a < 0) a += mod;
    // b^{-1} mod p^k by extended gcd; b is coprime to p.
    BigInt r0 = mod, r1 = b, t0 = 0, t1 = 1;
    while (r1 != 0) {
        BigInt q = r0 / r1;
        BigInt tmp = r0 - q * r1; r0 = r1; r1 = tmp;
        tmp = t0 - q * t1; t0 = t1; t1 = tmp;
    }
    if (r0 != 1) throw DomainError("denominator not invertible mod p^k");
    BigInt inv = t0 % mod;
    if (inv < 0) inv += mod;
    return Rat(BigInt(a * inv % mod));
}

/// x reduced mod p^k R for arbitrary rational x: the unique representative
/// with p-adic digits only in positions v(x) .. k-1 (an element of Z[1/p]
/// in [0, p^k) when v(x) >= 0). Used to normalize entries whose valuation
/// may lie below the pivot's.
inline Rat general_residue(const Rat& x, const PrimeContext& ctx, long k) {
    if (x.is_zero()) return Rat(0);
    long w = valuation(x, ctx).v;
    if (w >= k) return Rat(0);
    Rat shifted = x * Rat::pow(Rat(ctx.p), -w);  // valuation 0
    return Rat::pow(Rat(ctx.p), w) * canonical_residue(shifted, ctx, k - w);
}

/// Column echelon form of a finitely generated Z_(p)-submodule of Q^n.
/// Rows are processed top to bottom; the pivot in a row is the entry of
/// minimal valuation among the untouched columns (ties to the lowest column
/// index), normalized so the pivot is exactly p^v. Entries of the already
/// pivoted columns in later pivot rows are reduced to their canonical
/// residue mod p^v. The output is the unique such basis of the module.
struct DvrEchelon {
    QCols cols;
    std::vector<std::size_t> pivot_rows;
    std::vector<long> pivot_vals;
};

inline DvrEchelon dvr_echelon(QCols cols, std::size_t n, const PrimeContext& ctx) {
    DvrEchelon out;
    std::size_t done = 0;
    for (std::size_t r = 0; r < n && done < cols.size(); ++r) {
        std::size_t best = cols.size();
        long best_val = 0;
        for (std::size_t j = done; j < cols.size(); ++j) {
            if (cols[j][r].is_zero()) continue;
            long v = valuation(cols[j][r], ctx).v;
            if (best == cols.size() || v < best_val) { best = j; best_val = v; }
        }
        if (best == cols.size()) continue;
        std::swap(cols[done], cols[best]);
        // Scale by the inverse unit part: pivot becomes p^best_val exactly.
        cols[done] = scaled(cols[done], unit_part(cols[done][r], ctx).inverse());
        Rat piv = cols[done][r];
        for (std::size_t k = done + 1; k < cols.size(); ++k) {
            if (cols[k][r].is_zero()) continue;
            axpy(cols[k], -(cols[k][r] / piv), cols[done]);  // quotient is in R
        }
        for (std::size_t k = 0; k < done; ++k) {
            Rat res = general_residue(cols[k][r], ctx, best_val);
            if (cols[k][r] == res) continue;
            axpy(cols[k], -((cols[k][r] - res) / piv), cols[done]);
        }
        out.pivot_rows.push_back(r);
        out.pivot_vals.push_back(best_val);
        ++done;
    }
    for (std::size_t j = done; j < cols.size(); ++j)
        if (!is_zero_vec(cols[j])) throw DomainError("dvr_echelon: generators not in a lattice");
    cols.resize(done);
    out.cols = std::move(cols);
    return out;
}

/// Smith-style diagonalization over R = Z_(p) of a rational matrix A:
/// A = U * S * W with U, W invertible over R and S diagonal with entries
/// p^{s_i} (rank many, possibly negative exponents). Returns U, W^{-1} and
/// the exponents; that is exactly what preimage-lattice and
/// subspace-unit-ball computations need.
struct DvrSmith {
    QCols U;       // n x n, in GL_n(R)
    QCols Winv;    // m x m, in GL_m(R)
    std::vector<long> svals;  // valuations of the rank-many diagonal entries
    std::size_t rank = 0;
};

inline DvrSmith dvr_smith(QCols a, std::size_t n, const PrimeContext& ctx) {
    const std::size_t m = a.size();
    DvrSmith out;
    out.U = identity(n);
    out.Winv = identity(m);
    // Row op A <- L A updates U <- U L^{-1}; col op A <- A C updates Winv <- Winv C.
    auto row_axpy = [&](std::size_t dst, const Rat& c, std::size_t src) {
        for (std::size_t j = 0; j < m; ++j) a[j][dst] += c * a[j][src];
        for (std::size_t i = 0; i < n; ++i) out.U[src][i] -= c * out.U[dst][i];
    };
    auto row_swap = [&](std::size_t i, std::size_t j) {
        for (std::size_t k = 0; k < m; ++k) std::swap(a[k][i], a[k][j]);
        std::swap(out.U[i], out.U[j]);
    };
    auto row_scale = [&](std::size_t i, const Rat& u) {  // u a unit of R
        for (std::size_t j = 0; j < m; ++j) a[j][i] *= u;
        out.U[i] = scaled(out.U[i], u.inverse());
    };
    auto col_axpy = [&](std::size_t dst, const Rat& c, std::size_t src) {
        axpy(a[dst], c, a[src]);
        axpy(out.Winv[dst], c, out.Winv[src]);
    };
    auto col_swap = [&](std::size_t i, std::size_t j) {
        std::swap(a[i], a[j]);
        std::swap(out.Winv[i], out.Winv[j]);
    };

    std::size_t t = 0;
    while (t < n && t < m) {
        // Global minimal-valuation pivot in the trailing block (lowest row,
        // then lowest column on ties).
        std::size_t pi = n, pj = m;
        long pval = 0;
        for (std::size_t i = t; i < n; ++i)
            for (std::size_t j = t; j < m; ++j) {
                if (a[j][i].is_zero()) continue;
                long v = valuation(a[j][i], ctx).v;
                if (pi == n || v < pval) { pi = i; pj = j; pval = v; }
            }
        if (pi == n) break;
        row_swap(t, pi);
        col_swap(t, pj);
        row_scale(t, unit_part(a[t][t], ctx).inverse());  // pivot := p^pval
        Rat piv = a[t][t];
        for (std::size_t i = t + 1; i < n; ++i)
            if (!a[t][i].is_zero()) row_axpy(i, -(a[t][i] / piv), t);
        for (std::size_t j = t + 1; j < m; ++j)
            if (!a[j][t].is_zero()) col_axpy(j, -(a[j][t] / piv), t);
        out.svals.push_back(pval);
        ++t;
    }
    out.rank = t;
    return out;
}

/// Basis of { z in R^m : A z in R^n } as columns (an R-lattice in Q^m,
/// always of full rank m).
inline QCols preimage_lattice(const QCols& a, std::size_t n, const PrimeContext& ctx) {
    const std::size_t m = a.size();
    DvrSmith s = dvr_smith(a, n, ctx);
    QCols basis;
    basis.reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
        QVec col(m, Rat(0));
        for (std::size_t i = 0; i < m; ++i) col[i] = s.Winv[j][i];
        if (j < s.rank && s.svals[j] < 0)
            col = scaled(col, Rat::pow(Rat(ctx.p), -s.svals[j]));
        basis.push_back(std::move(col));
    }
    return basis;
}

/// Basis of colspace(M) intersected with R^n, for M of full column rank:
/// the first d columns of U in the Smith form M = U S W.
inline QCols subspace_unit_ball(const QCols& m_cols, std::size_t n, const PrimeContext& ctx) {
    DvrSmith s = dvr_smith(m_cols, n, ctx);
    if (s.rank != m_cols.size())
        throw InvalidInput("subspace_unit_ball: columns are dependent");
    QCols basis(s.U.begin(), s.U.begin() + static_cast<long>(s.rank));
    return basis;
}

/// Coefficients c with (cols) * c = b over Q, if b lies in the column space.
inline std::optional<QVec> solve_in_colspace(const QCols& cols, const QVec& b) {
    const std::size_t n = b.size();
    QCols work = cols;
    work.push_back(b);
    // Column-style elimination tracking coefficients: augment each column
    // with its expression in the original generators.
    const std::size_t m = cols.size();
    std::vector<QVec> coef(m + 1, zero_vec(m + 1));
    for (std::size_t j = 0; j <= m; ++j) coef[j][j] = Rat(1);

    std::size_t done = 0;
    for (std::size_t r = 0; r < n && done < m; ++r) {
        std::size_t j = done;
        while (j < m && work[j][r].is_zero()) ++j;
        if (j == m) continue;
        std::swap(work[done], work[j]);
        std::swap(coef[done], coef[j]);
        Rat piv = work[done][r];
        for (std::size_t k = 0; k <= m; ++k) {
            if (k == done || work[k][r].is_zero()) continue;
            Rat c = -(work[k][r] / piv);
            axpy(work[k], c, work[done]);
            axpy(coef[k], c, coef[done]);
        }
        ++done;
    }
    if (!is_zero_vec(work[m])) return std::nullopt;
    // work[m] == 0 means b - sum(c_j * col_j) = 0 after unwinding: the
    // augmented coefficient row expresses 0 = sum coef[m][j]*col_j + coef[m][m]*b.
    Rat lead = coef[m][m];
    if (lead.is_zero()) return std::nullopt;  // b was dependent on b only trivially
    QVec c(m, Rat(0));
    for (std::size_t j = 0; j < m; ++j) c[j] = -(coef[m][j] / lead);
    return c;
}

/// Inverse of a square rational matrix (columns), throws on singularity.
inline QCols inverse(const QCols& a) {
    const std::size_t n = a.size();
    for (const auto& c : a)
        if (c.size() != n) throw InvalidInput("inverse: matrix not square");
    QCols work = a, inv = identity(n);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t j = r;
        while (j < n && work[j][r].is_zero()) ++j;
        if (j == n) throw InvalidInput("inverse: singular matrix");
        std::swap(work[r], work[j]);
        std::swap(inv[r], inv[j]);
        Rat piv = work[r][r];
        work[r] = scaled(work[r], piv.inverse());
        inv[r] = scaled(inv[r], piv.inverse());
        for (std::size_t k = 0; k < n; ++k) {
            if (k == r || work[k][r].is_zero()) continue;
            Rat c = -work[k][r];
            axpy(work[k], c, work[r]);
            axpy(inv[k], c, inv[r]);
        }
    }
    // work is now the identity acting from columns; inv holds A^{-1} columns.
    return inv;
}

inline Rat determinant(QCols a) {
    const std::size_t n = a.size();
    Rat det(1);
    for (std::size_t r = 0; r < n; ++r) {
        std::size_t j = r;
        while (j < n && a[j][r].is_zero()) ++j;
        if (j == n) return Rat(0);
        if (j != r) { std::swap(a[j], a[r]); det = -det; }
        Rat piv = a[r][r];
        det *= piv;
        for (std::size_t k = r + 1; k < n; ++k) {
            if (a[k][r].is_zero()) continue;
            axpy(a[k], -(a[k][r] / piv), a[r]);
        }
    }
    return det;
}

}  // namespace linalg
}  // namespace clab
