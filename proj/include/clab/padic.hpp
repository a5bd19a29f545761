#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "clab/error.hpp"
#include "clab/rational.hpp"

namespace clab {

/// A fixed prime together with the metric-grid depth K. K bounds only how
/// deep metric grids and enumeration oracles scan (down to p^-K); it never
/// truncates arithmetic, which stays exact at every precision.
struct PrimeContext {
    std::int64_t p;
    int precision_exponent;  // K >= 1

    explicit PrimeContext(std::int64_t prime, int K = 24) : p(prime), precision_exponent(K) {
        if (K < 1) throw InvalidInput("precision exponent K must be >= 1");
        if (!is_prime(prime)) throw InvalidInput("not a prime: " + std::to_string(prime));
    }

    // Deterministic trial division; inputs are desk-scale primes.
    static bool is_prime(std::int64_t n) {
        if (n < 2) return false;
        if (n % 2 == 0) return n == 2;
        for (std::int64_t d = 3; d * d <= n; d += 2)
            if (n % d == 0) return false;
        return true;
    }

    friend bool operator==(const PrimeContext& a, const PrimeContext& b) { return a.p == b.p; }
};

/// v(x) for x != 0, +infinity for x = 0.
struct Valuation {
    bool infinite = false;
    long v = 0;

    static Valuation inf() { return Valuation{true, 0}; }
    static Valuation of(long k) { return Valuation{false, k}; }

    friend bool operator==(const Valuation& a, const Valuation& b) {
        return a.infinite == b.infinite && (a.infinite || a.v == b.v);
    }

    friend Valuation operator+(const Valuation& a, const Valuation& b) {
        if (a.infinite || b.infinite) return inf();
        return of(a.v + b.v);
    }

    std::string str() const { return infinite ? "+inf" : std::to_string(v); }
};

namespace detail {
// Largest e with p^e | n, for n != 0.
inline long strip_p(BigInt n, std::int64_t p) {
    long e = 0;
    n = boost::multiprecision::abs(n);
    BigInt q, r;
    for (;;) {
        divide_qr(n, BigInt(p), q, r);
        if (r != 0) return e;
        n = q;
        ++e;
    }
}
}  // namespace detail

/// The exact exponent n with x = p^n * c/d, gcd(c,p) = gcd(d,p) = 1.
inline Valuation valuation(const Rat& x, const PrimeContext& ctx) {
    if (x.is_zero()) return Valuation::inf();
    return Valuation::of(detail::strip_p(x.num(), ctx.p) - detail::strip_p(x.den(), ctx.p));
}

/// p^{-v(x)} as an exact rational; 0 for x = 0.
inline Rat norm_p(const Rat& x, const PrimeContext& ctx) {
    Valuation v = valuation(x, ctx);
    if (v.infinite) return Rat(0);
    return Rat::pow(Rat(ctx.p), -v.v);
}

/// x = p^v * u with v = v(x); returns u (a p-adic unit). x must be nonzero.
inline Rat unit_part(const Rat& x, const PrimeContext& ctx) {
    if (x.is_zero()) throw DomainError("unit part of zero");
    return x * Rat::pow(Rat(ctx.p), -valuation(x, ctx).v);
}

/// p^k as an exact rational, k of either sign.
inline Rat p_power(const PrimeContext& ctx, long k) { return Rat::pow(Rat(ctx.p), k); }

}  // namespace clab
