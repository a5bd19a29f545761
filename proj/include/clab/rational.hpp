#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

#include "clab/error.hpp"

namespace clab {

using BigInt = boost::multiprecision::cpp_int;

/// Exact arbitrary-precision rational, always in lowest terms with a
/// positive denominator. The universal scalar of the library: no routine
/// anywhere rounds.
class Rat {
  public:
    Rat() : v_(0) {}
    Rat(long n) : v_(n) {}  // NOLINT: implicit by design, mirrors int literals
    Rat(const BigInt& n) : v_(n) {}
    Rat(const BigInt& num, const BigInt& den) : v_(num, den) {
        if (den == 0) throw DomainError("rational with zero denominator");
    }
    explicit Rat(const boost::multiprecision::cpp_rational& v) : v_(v) {}

    static Rat from_string(const std::string& s);

    BigInt num() const { return numerator(v_); }
    BigInt den() const { return denominator(v_); }
    bool is_zero() const { return v_ == 0; }
    bool is_integer() const { return denominator(v_) == 1; }
    int sign() const { return v_ < 0 ? -1 : (v_ > 0 ? 1 : 0); }

    Rat operator-() const { return Rat(boost::multiprecision::cpp_rational(-v_)); }
    Rat& operator+=(const Rat& o) { v_ += o.v_; return *this; }
    Rat& operator-=(const Rat& o) { v_ -= o.v_; return *this; }
    Rat& operator*=(const Rat& o) { v_ *= o.v_; return *this; }
    Rat& operator/=(const Rat& o) {
        if (o.is_zero()) throw DomainError("division by zero rational");
        v_ /= o.v_;
        return *this;
    }

    friend Rat operator+(Rat a, const Rat& b) { return a += b; }
    friend Rat operator-(Rat a, const Rat& b) { return a -= b; }
    friend Rat operator*(Rat a, const Rat& b) { return a *= b; }
    friend Rat operator/(Rat a, const Rat& b) { return a /= b; }

    friend bool operator==(const Rat& a, const Rat& b) { return a.v_ == b.v_; }
    friend bool operator!=(const Rat& a, const Rat& b) { return a.v_ != b.v_; }
    friend bool operator<(const Rat& a, const Rat& b) { return a.v_ < b.v_; }
    friend bool operator<=(const Rat& a, const Rat& b) { return a.v_ <= b.v_; }
    friend bool operator>(const Rat& a, const Rat& b) { return a.v_ > b.v_; }
    friend bool operator>=(const Rat& a, const Rat& b) { return a.v_ >= b.v_; }

    Rat abs() const { return v_ < 0 ? Rat(boost::multiprecision::cpp_rational(-v_)) : *this; }

    Rat inverse() const {
        if (is_zero()) throw DomainError("inverse of zero");
        return Rat(boost::multiprecision::cpp_rational(1) / v_);
    }

    /// Exact b^e for integer e of either sign (b != 0 when e < 0).
    static Rat pow(const Rat& b, long e) {
        if (e == 0) return Rat(1);
        if (e < 0) return pow(b.inverse(), -e);
        Rat acc(1), sq = b;
        unsigned long k = static_cast<unsigned long>(e);
        while (k) {
            if (k & 1) acc *= sq;
            if (k >>= 1) sq *= sq;
        }
        return acc;
    }

    /// "n" for integers, "n/d" otherwise. Exact; parseable by from_string.
    std::string str() const {
        std::string s = num().str();
        if (!is_integer()) s += "/" + den().str();
        return s;
    }

    friend std::ostream& operator<<(std::ostream& os, const Rat& r) { return os << r.str(); }

  private:
    boost::multiprecision::cpp_rational v_;
};

inline Rat Rat::from_string(const std::string& s) {
    if (s.empty()) throw InvalidInput("empty rational literal");
    auto slash = s.find('/');
    try {
        if (slash == std::string::npos) return Rat(BigInt(s));
        BigInt num(s.substr(0, slash));
        BigInt den(s.substr(slash + 1));
        if (den <= 0) throw InvalidInput("rational literal needs positive denominator: " + s);
        return Rat(num, den);
    } catch (const std::exception&) {
        throw InvalidInput("bad rational literal: " + s);
    }
}

inline Rat abs(const Rat& r) { return r.abs(); }

inline Rat min(const Rat& a, const Rat& b) { return a < b ? a : b; }
inline Rat max(const Rat& a, const Rat& b) { return a < b ? b : a; }

}  // namespace clab
