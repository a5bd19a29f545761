#include <catch2/catch_amalgamated.hpp>

#include "clab/chabauty.hpp"
#include "test_support.hpp"

using namespace clab;

namespace {

const Ambient Q3 = Ambient::padic(PrimeContext(3, 8));
const Ambient Q3_2 = Ambient::padic_space(PrimeContext(3, 6), 2);
const Ambient Q2_2 = Ambient::padic_space(PrimeContext(2, 6), 2);
const Ambient Q2xQ3 = Ambient::prime_product({PrimeContext(2, 8), PrimeContext(3, 8)});

bool same_result(const MetricResult& a, const MetricResult& b) {
    return a.kind == b.kind && a.lower == b.lower && a.upper == b.upper;
}

QpModule random_small_module(testsup::Rng& rng, const Ambient& amb) {
    const auto& ctx = padic_ctx(amb);
    QCols vg, lg;
    if (rng.pick(0, 2) == 0) {
        QVec c{rng.rat_with_valuation(ctx.p, -1, 1, true), rng.rat_with_valuation(ctx.p, -1, 1, true)};
        if (!(c[0].is_zero() && c[1].is_zero())) vg.push_back(std::move(c));
    }
    long nl = rng.pick(0, 2);
    for (long i = 0; i < nl; ++i)
        lg.push_back(QVec{rng.rat_with_valuation(ctx.p, -1, 1, true),
                          rng.rat_with_valuation(ctx.p, -1, 1, true)});
    return canonicalize_module(std::move(vg), std::move(lg), 2, ctx);
}

}  // namespace

TEST_CASE("dist_point: worked examples") {
    CHECK(dist_point(elem_scalar(Q3, Rat(1)), qp_lattice(Q3, 1)) == Rat(1));
    CHECK(dist_point(elem_scalar(Q3, Rat(9, 2)), qp_lattice(Q3, 1)) == Rat(0));

    Subgroup line = qp2_line(Q3_2, Rat(1), Rat(1));
    CHECK(dist_point(elem_vec(Q3_2, QVec{Rat(1), Rat(0)}), line) == Rat(1));
    CHECK(dist_point(elem_vec(Q3_2, QVec{Rat(1, 3), Rat(1, 3)}), line) == Rat(0));

    Subgroup latt = qpn_module(Q3_2, {}, {QVec{Rat(1), Rat(1)}});
    CHECK(dist_point(elem_vec(Q3_2, QVec{Rat(0), Rat(1, 3)}), latt) == Rat(3));
}

TEST_CASE("dist_point agrees with the enumeration oracle") {
    testsup::Rng rng(501);
    const auto& ctx = padic_ctx(Q2_2);
    const long prec = 4;
    const Rat floor_big = Rat::pow(Rat(2), -prec + 1);
    for (int trial = 0; trial < 60; ++trial) {
        QpModule m = random_small_module(rng, Q2_2);
        QVec x{rng.rat_with_valuation(2, -1, 2, true), rng.rat_with_valuation(2, -1, 2, true)};
        Rat got = dist_point(elem_vec(Q2_2, x), Subgroup{Q2_2, m});
        auto pts = testsup::enumerate_module_points(m, 2, ctx, 2, prec);
        Rat best(-1);
        for (const auto& pt : pts) {
            QVec d = x;
            linalg::axpy(d, Rat(-1), pt);
            Rat nd(0);
            for (const auto& c : d) nd = max(nd, norm_p(c, ctx));
            if (best < 0 || nd < best) best = nd;
        }
        if (best >= floor_big)
            CHECK(got == best);
        else
            CHECK(got <= floor_big);
    }
}

TEST_CASE("neighborhood_check: worked examples") {
    CHECK_FALSE(neighborhood_check(qp_lattice(Q3, 0), qp_lattice(Q3, 1), Rat(1, 3)));
    CHECK(neighborhood_check(qp_lattice(Q3, 1), qp_lattice(Q3, 1), Rat(1, 3)));
    CHECK(neighborhood_check(qp_full(Q3), qp_lattice(Q3, 0), Rat(1, 2)));
    CHECK_FALSE(neighborhood_check(qp_full(Q3), qp_lattice(Q3, 0), Rat(1, 3)));
}

TEST_CASE("neighborhood_check is monotone across the grid") {
    testsup::Rng rng(502);
    for (int trial = 0; trial < 30; ++trial) {
        Subgroup a{Q3, QpSubgroup{QpSubgroup::Kind::Lattice, rng.pick(-3, 3)}};
        Subgroup b = rng.pick(0, 1) ? qp_zero(Q3)
                                    : Subgroup{Q3, QpSubgroup{QpSubgroup::Kind::Lattice,
                                                              rng.pick(-3, 3)}};
        bool seen_pass = false;
        for (long j = 6; j >= 0; --j) {  // eps from small to large
            bool pass = neighborhood_check(a, b, Rat::pow(Rat(3), -j));
            if (seen_pass) CHECK(pass);
            seen_pass = seen_pass || pass;
        }
        CHECK(seen_pass);  // eps = 1 always passes
    }
}

TEST_CASE("chabauty_dist: closed forms on Sub_Qp match the worked values") {
    MetricResult d1 = chabauty_dist(qp_lattice(Q3, 0), qp_lattice(Q3, 1));
    CHECK(d1.kind == MetricResult::Kind::Exact);
    CHECK(d1.value() == Rat(1));

    for (long k = 1; k <= 5; ++k) {
        MetricResult d = chabauty_dist(qp_lattice(Q3, k), qp_zero(Q3));
        CHECK(d.kind == MetricResult::Kind::Exact);
        CHECK(d.value() == Rat::pow(Rat(3), -k));
    }

    // d(Full, p^-k Z_p) is the spec's bracket family, shrinking to 0.
    for (long k = 0; k <= 4; ++k) {
        MetricResult d = chabauty_dist(qp_full(Q3), qp_lattice(Q3, -k));
        CHECK(d.kind == MetricResult::Kind::Bracket);
        CHECK(d.lower == Rat::pow(Rat(3), -k - 1));
        CHECK(d.upper == Rat::pow(Rat(3), -k));
    }

    CHECK(chabauty_dist(qp_zero(Q3), qp_full(Q3)).value() == Rat(1));
    CHECK(chabauty_dist(qp_lattice(Q3, 2), qp_lattice(Q3, 2)).value() == Rat(0));
}

TEST_CASE("Sub_Qp closed forms agree with the generic grid scan") {
    std::vector<Subgroup> sample{qp_zero(Q3), qp_full(Q3)};
    for (long k = -3; k <= 3; ++k) sample.push_back(qp_lattice(Q3, k));
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = 0; j < sample.size(); ++j) {
            MetricResult fast = chabauty_dist(sample[i], sample[j]);
            MetricResult slow = detail::grid_scan_dist_reference(sample[i], sample[j], 1 << 20);
            INFO("pair " << i << "," << j);
            CHECK(same_result(fast, slow));
        }
}

TEST_CASE("line pairs: closed form agrees with the generic grid scan") {
    auto line = [&](const Rat& a, const Rat& b) { return qp2_line(Q3_2, a, b); };
    std::vector<Subgroup> sample{line(Rat(0), Rat(1)), line(Rat(1), Rat(0)), line(Rat(1), Rat(1)),
                                 line(Rat(1), Rat(3)), line(Rat(3), Rat(1)), line(Rat(1), Rat(4)),
                                 line(Rat(9), Rat(1)), line(Rat(1, 3), Rat(1)),
                                 line(Rat(2), Rat(3))};
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = 0; j < sample.size(); ++j) {
            MetricResult fast = chabauty_dist(sample[i], sample[j]);
            MetricResult slow = detail::grid_scan_dist_reference(sample[i], sample[j], 1 << 20);
            INFO("pair " << i << "," << j);
            CHECK(same_result(fast, slow));
        }
}

TEST_CASE("general modules: symmetry, identity, triangle on reported values") {
    testsup::Rng rng(504);
    std::vector<Subgroup> sample;
    for (int i = 0; i < 12; ++i) sample.push_back(Subgroup{Q2_2, random_small_module(rng, Q2_2)});
    std::vector<std::vector<MetricResult>> d(sample.size(),
                                             std::vector<MetricResult>(sample.size()));
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = 0; j < sample.size(); ++j)
            d[i][j] = chabauty_dist(sample[i], sample[j]);
    for (std::size_t i = 0; i < sample.size(); ++i)
        for (std::size_t j = 0; j < sample.size(); ++j) {
            CHECK(same_result(d[i][j], d[j][i]));
            CHECK((d[i][j].value_known() && d[i][j].value() == Rat(0)) ==
                  equal(sample[i], sample[j]));
            for (std::size_t k = 0; k < sample.size(); ++k)
                CHECK(d[i][j].reported() <= d[i][k].reported() + d[k][j].reported());
        }
}

TEST_CASE("topology compatibility tables") {
    const Ambient q3 = Ambient::padic(PrimeContext(3));  // default K = 24
    Rat prev(2);
    for (long k = 1; k <= 20; ++k) {
        MetricResult d = chabauty_dist(qp_lattice(q3, k), qp_zero(q3));
        CHECK(d.value() == Rat::pow(Rat(3), -k));
        CHECK(d.value() < prev);
        prev = d.value();
    }
    prev = Rat(2);
    for (long k = 1; k <= 20; ++k) {
        MetricResult d = chabauty_dist(qp_lattice(q3, -k), qp_full(q3));
        CHECK(d.upper == Rat::pow(Rat(3), -k));
        CHECK(d.upper < prev);
        prev = d.upper;
    }
    for (long l = 1; l <= 20; ++l)
        CHECK(chabauty_dist(qp_lattice(q3, l), qp_lattice(q3, 0)).value() == Rat(1));
}

TEST_CASE("product metric: worked examples") {
    auto lat = [](long k) { return QpSubgroup{QpSubgroup::Kind::Lattice, k}; };
    auto zero = [] { return QpSubgroup{QpSubgroup::Kind::Zero, 0}; };
    Subgroup zz = product_subgroup(Q2xQ3, {lat(0), lat(0)});
    CHECK(chabauty_dist(zz, zz).value() == Rat(0));

    Subgroup a = product_subgroup(Q2xQ3, {lat(0), lat(0)});
    Subgroup b = product_subgroup(Q2xQ3, {lat(1), lat(0)});
    CHECK(chabauty_dist(a, b).value() == Rat(1));

    Subgroup c = product_subgroup(Q2xQ3, {zero(), lat(1)});
    Subgroup e = product_subgroup(Q2xQ3, {zero(), zero()});
    CHECK(chabauty_dist(c, e).value() == Rat(1, 3));
}

TEST_CASE("shift metric: worked examples and the support formula") {
    Ambient sh = Ambient::shift(2, 8);
    Subgroup h0 = shift_subgroup(sh, {0});
    CHECK(shift_dist(h0, h0).value() == Rat(0));
    CHECK(shift_dist(h0, shift_identity(sh)).value() == Rat(1));
    for (int k = 1; k <= 6; ++k) {
        MetricResult d = shift_dist(shift_subgroup(sh, {k}), shift_identity(sh));
        CHECK(d.kind == MetricResult::Kind::Exact);
        CHECK(d.value() == Rat::pow(Rat(2), -k));
    }
    // negative coordinates weigh more than 1, so the obstruction only enters
    // once the scan ball reaches it: an unattained bracket.
    MetricResult dn = shift_dist(shift_subgroup(sh, {-3}), shift_identity(sh));
    CHECK(dn.kind == MetricResult::Kind::Bracket);
    CHECK(dn.lower == Rat(1, 8));
    CHECK(dn.upper == Rat(1, 4));

    CHECK_THROWS_AS(shift_dist(shift_subgroup(sh, {11}), shift_identity(sh)), WindowTruncation);
}

TEST_CASE("shift metric agrees with a direct grid evaluation") {
    Ambient sh = Ambient::shift(2, 8);
    testsup::Rng rng(505);
    auto check_at = [&](const Subgroup& a, const Subgroup& b, long ball_exp, long dist_exp) {
        Rat R = Rat::pow(Rat(2), ball_exp), eps = Rat::pow(Rat(2), -dist_exp);
        for (const auto& rep : coset_reps(a, R, eps))
            if (dist_point(rep, b) > eps) return false;
        for (const auto& rep : coset_reps(b, R, eps))
            if (dist_point(rep, a) > eps) return false;
        return true;
    };
    for (int trial = 0; trial < 40; ++trial) {
        std::set<int> sa, sb;
        for (int n = -4; n <= 6; ++n) {
            if (rng.pick(0, 2) == 0) sa.insert(n);
            if (rng.pick(0, 2) == 0) sb.insert(n);
        }
        Subgroup a = shift_subgroup(sh, sa), b = shift_subgroup(sh, sb);
        if (equal(a, b)) continue;
        MetricResult expect = shift_dist(a, b);
        MetricResult got = MetricResult::enclosure(Rat(0), Rat::pow(Rat(2), -8));
        for (int j = 0; j <= 8; ++j) {
            if (j > 0 && !check_at(a, b, j, j)) {
                got = MetricResult::bracket(Rat::pow(Rat(2), -j), Rat::pow(Rat(2), -j + 1));
                break;
            }
            if (j < 8 && !check_at(a, b, j, j + 1)) {
                got = MetricResult::exact(Rat::pow(Rat(2), -j));
                break;
            }
        }
        CHECK(same_result(expect, got));
    }
}

TEST_CASE("coordinate metrics: worked examples") {
    CHECK(dist_coordinate(sub_int(2), sub_int(3)).value() == Rat(1, 6));
    CHECK(dist_coordinate(sub_int(0), sub_int(5)).value() == Rat(1, 5));
    CHECK(dist_coordinate(sub_circle_cyclic(2), sub_circle_full()).value() == Rat(1, 2));
    CHECK(dist_coordinate(sub_real_spacing(Rat(3, 2)), sub_real_spacing(Rat(3, 2))).value() ==
          Rat(0));

    // |arctan 2 - arctan 1| = 0.32175...: certified between 0.32 and 1/3.
    MetricResult d = dist_coordinate(sub_real_spacing(Rat(1)), sub_real_spacing(Rat(2)));
    CHECK(d.kind == MetricResult::Kind::Enclosure);
    CHECK(d.certainly_less(Rat(1, 3)));
    CHECK(d.lower > Rat(32, 100));

    // d(Trivial, Full) = pi/2
    MetricResult t = dist_coordinate(sub_real_trivial(), sub_real_full());
    CHECK(t.lower > Rat(157, 100));
    CHECK(t.upper < Rat(158, 100));

    // spacings converge to Full from below and to Trivial upward
    MetricResult small = dist_coordinate(sub_real_spacing(Rat(1, 1000)), sub_real_full());
    CHECK(small.certainly_less(Rat(1, 500)));
    MetricResult large = dist_coordinate(sub_real_spacing(Rat(1000)), sub_real_trivial());
    CHECK(large.certainly_less(Rat(1, 500)));
}

TEST_CASE("interval arctan enclosures are tight and ordered") {
    Rat err(1, 1000000);
    RatInterval pi = pi_interval(err);
    CHECK(pi.width() <= err);
    CHECK(pi.lo > Rat(314159, 100000));
    CHECK(pi.hi < Rat(314160, 100000));
    RatInterval a1 = arctan_interval(Rat(1), err);
    CHECK(a1.width() <= err);
    // arctan(1) = pi/4
    RatInterval gap = a1.scaled(Rat(4)) - pi_interval(err);
    CHECK(gap.lo <= Rat(0));
    CHECK(gap.hi >= Rat(0));
    RatInterval am = arctan_interval(Rat(-7, 3), err);
    CHECK(am.hi < 0);
}
