#include "dpmcpm/inference.hpp"
#include "dpmcpm/synth.hpp"

#include <doctest.h>

#include <cmath>

using namespace dpmcpm;

TEST_SUITE("synth")
{

TEST_CASE("mixture defaults have the simulation shape")
{
    const auto s = sample_mixture_dataset({}, 1);
    CHECK(s.data.rows() == 50);
    CHECK(s.data.cols() == 20);
    CHECK(s.data.complete());
    CHECK(s.data.schema().all_binary());
    CHECK(s.truth.components() == 3);
    CHECK_NOTHROW(s.truth.validate());
}

TEST_CASE("mixture generator is seed deterministic")
{
    const auto a = sample_mixture_dataset({}, 5);
    const auto b = sample_mixture_dataset({}, 5);
    const auto c = sample_mixture_dataset({}, 6);
    CHECK(a.data == b.data);
    CHECK(a.truth.tilde_psi == b.truth.tilde_psi);
    CHECK_FALSE(a.data == c.data);
}

TEST_CASE("empirical frequencies approach the truth marginals")
{
    MixtureSpec spec;
    spec.n = 50000;
    spec.p = 6;
    spec.cardinality = 3;
    const auto s = sample_mixture_dataset(spec, 12);
    double worst = 0.0;
    for (std::size_t j = 0; j < spec.p; ++j) {
        const auto truth = single_marginal(s.truth, j);
        std::vector<double> freq(3, 0.0);
        for (std::size_t i = 0; i < spec.n; ++i) {
            freq[s.data.at(i, j) - 1] += 1.0 / static_cast<double>(spec.n);
        }
        for (std::size_t c = 0; c < 3; ++c) {
            worst = std::max(worst, std::abs(freq[c] - truth[c]));
        }
    }
    CHECK(worst < 0.01);
}

TEST_CASE("a single component gives independent columns")
{
    MixtureSpec spec;
    spec.n = 20000;
    spec.p = 2;
    spec.k = 1;
    const auto s = sample_mixture_dataset(spec, 3);
    CHECK(s.truth.theta == std::vector<double>{1.0});
    double both = 0.0;
    double first = 0.0;
    double second = 0.0;
    for (std::size_t i = 0; i < spec.n; ++i) {
        first += s.data.at(i, 0) == 1;
        second += s.data.at(i, 1) == 1;
        both += s.data.at(i, 0) == 1 && s.data.at(i, 1) == 1;
    }
    const double n = static_cast<double>(spec.n);
    CHECK(std::abs(both / n - (first / n) * (second / n)) < 0.01);
}

TEST_CASE("xor truth")
{
    const auto t = xor_truth();
    double total = 0.0;
    double v1 = 0.0;
    for (std::size_t idx = 0; idx < 8; ++idx) {
        total += t.table[idx];
        if (t.combination(idx)[0] == 2) {
            v1 += t.table[idx];
        }
    }
    CHECK(std::abs(total - 1.0) <= 1e-15);
    CHECK(v1 == doctest::Approx(0.3).epsilon(1e-15));
    for (Code b1 = 1; b1 <= 2; ++b1) {
        for (Code b2 = 1; b2 <= 2; ++b2) {
            const Code xor_code = static_cast<Code>(((b1 - 1) ^ (b2 - 1)) + 1);
            const Code hit[3] = {b1, b2, xor_code};
            const Code miss[3] = {b1, b2, static_cast<Code>(3 - xor_code)};
            const double consistent = t.table[t.index(hit)];
            const double cond = consistent / (consistent + t.table[t.index(miss)]);
            CHECK(cond == doctest::Approx(0.975).epsilon(1e-14));
        }
    }
    const Code c[3] = {2, 2, 1};
    CHECK(t.table[t.index(c)] == doctest::Approx(0.14625).epsilon(1e-15));
}

TEST_CASE("xor sample frequencies")
{
    const auto s = sample_xor_dataset(100000, 4);
    double v1 = 0.0;
    double consistent = 0.0;
    for (std::size_t i = 0; i < s.data.rows(); ++i) {
        v1 += s.data.at(i, 0) == 2;
        consistent += ((s.data.at(i, 0) - 1) ^ (s.data.at(i, 1) - 1)) == s.data.at(i, 2) - 1;
    }
    CHECK(v1 / 100000.0 == doctest::Approx(0.3).epsilon(0.03));
    CHECK(consistent / 100000.0 == doctest::Approx(0.975).epsilon(0.005));
    CHECK(sample_xor_dataset(50, 9).data == sample_xor_dataset(50, 9).data);
}

TEST_CASE("mcar extremes")
{
    const auto s = sample_mixture_dataset({}, 2);
    MechanismSpec none;
    none.mcar_rate = 0.0;
    const auto a = mask(s.data, none, 1);
    CHECK(a.masked == s.data);
    CHECK(a.cells.empty());

    MechanismSpec all;
    all.mcar_rate = 1.0;
    const auto b = mask(s.data, all, 1);
    CHECK(b.masked.missing_count() == s.data.cells().size());
    CHECK(b.cells.size() == s.data.cells().size());
}

TEST_CASE("mask record matches the zeroed cells")
{
    const auto s = sample_mixture_dataset({}, 8);
    for (auto kind : {MechanismKind::mcar, MechanismKind::mar, MechanismKind::mnar}) {
        MechanismSpec spec;
        spec.kind = kind;
        const auto r = mask(s.data, spec, 3);
        std::size_t listed = 0;
        for (std::size_t i = 0; i < s.data.rows(); ++i) {
            for (std::size_t j = 0; j < s.data.cols(); ++j) {
                if (r.masked.at(i, j) == kMissing) {
                    REQUIRE(listed < r.cells.size());
                    CHECK(r.cells[listed].row == i);
                    CHECK(r.cells[listed].col == j);
                    CHECK(r.cells[listed].value == s.data.at(i, j));
                    ++listed;
                } else {
                    CHECK(r.masked.at(i, j) == s.data.at(i, j));
                }
            }
        }
        CHECK(listed == r.cells.size());
        CHECK(mask(s.data, spec, 3).masked == r.masked);
    }
}

TEST_CASE("mar rates follow the first column")
{
    MixtureSpec spec;
    spec.n = 100000;
    spec.p = 3;
    const auto s = sample_mixture_dataset(spec, 10);
    MechanismSpec mar;
    mar.kind = MechanismKind::mar;
    const auto r = mask(s.data, mar, 11);
    double rows[2] = {0, 0};
    double hits[2] = {0, 0};
    for (std::size_t i = 0; i < spec.n; ++i) {
        CHECK(r.masked.observed(i, 0));
        const int g = s.data.at(i, 0) - 1;
        rows[g] += 2;
        hits[g] += (r.masked.at(i, 1) == kMissing) + (r.masked.at(i, 2) == kMissing);
    }
    CHECK(std::abs(hits[0] / rows[0] - 0.1) <= 0.01);
    CHECK(std::abs(hits[1] / rows[1] - 0.3) <= 0.01);
}

TEST_CASE("mnar rates follow the hidden value")
{
    MixtureSpec spec;
    spec.n = 50000;
    spec.p = 2;
    const auto s = sample_mixture_dataset(spec, 13);
    MechanismSpec mnar;
    mnar.kind = MechanismKind::mnar;
    const auto r = mask(s.data, mnar, 14);
    double cells[2] = {0, 0};
    double hits[2] = {0, 0};
    for (std::size_t i = 0; i < spec.n; ++i) {
        for (std::size_t j = 0; j < 2; ++j) {
            const int v = s.data.at(i, j) - 1;
            cells[v] += 1;
            hits[v] += r.masked.at(i, j) == kMissing;
        }
    }
    CHECK(std::abs(hits[0] / cells[0] - 0.1) <= 0.01);
    CHECK(std::abs(hits[1] / cells[1] - 0.3) <= 0.01);
}

TEST_CASE("mechanisms reject incompatible data")
{
    MixtureSpec spec;
    spec.cardinality = 3;
    const auto s = sample_mixture_dataset(spec, 1);
    MechanismSpec m;
    m.kind = MechanismKind::mar;
    CHECK_THROWS_AS(mask(s.data, m, 1), ContractError);
    m.kind = MechanismKind::mnar;
    CHECK_THROWS_AS(mask(s.data, m, 1), ContractError);
    m.kind = MechanismKind::mcar;
    m.mcar_rate = 1.5;
    CHECK_THROWS_AS(mask(s.data, m, 1), ValidationError);
    MechanismSpec mcar;
    const auto holes = mask(s.data, mcar, 2).masked;
    CHECK_THROWS_AS(mask(holes, mcar, 3), ContractError);
    CHECK(parse_mechanism("MNAR") == MechanismKind::mnar);
    CHECK_THROWS_AS(parse_mechanism("mbar"), ValidationError);
}

TEST_CASE("mask fraction counts")
{
    MixtureSpec spec;
    spec.n = 10;
    spec.p = 10;
    const auto s = sample_mixture_dataset(spec, 1);
    CHECK(mask_fraction(s.data, 0.0, 1).masked == s.data);
    const auto r = mask_fraction(s.data, 0.4, 1);
    CHECK(r.cells.size() == 40);
    CHECK(r.masked.missing_count() == 40);
    CHECK(mask_fraction(s.data, 0.4, 1).masked == r.masked);
}

TEST_CASE("mask fraction on partly missing data")
{
    // 1.35% already missing, then 40% of the observed cells
    std::vector<Code> cells(10000, 1);
    for (std::size_t idx = 0; idx < 135; ++idx) {
        cells[idx * 73] = kMissing;
    }
    const Dataset d(CategoricalSchema(std::vector<std::size_t>(40, 2)), 250, cells);
    const auto r = mask_fraction(d, 0.4, 5);
    CHECK(r.masked.missing_count() == 4081);
    for (const auto& c : r.cells) {
        CHECK(d.observed(c.row, c.col));
    }
}

TEST_CASE("rating coding")
{
    RatingCoding binary;
    binary.cutoff = 3.0;
    CHECK(binary.encode(3.5) == 2);
    CHECK(binary.encode(3.0) == 2);
    CHECK(binary.encode(2.5) == 1);
    RatingCoding five;
    five.kind = RatingCoding::Kind::five_category;
    CHECK(five.encode(3.5) == 4);
    CHECK(five.encode(0.5) == 1);
    CHECK(five.encode(5.0) == 5);
    CHECK(five.encode(4.0) == 4);
}

TEST_CASE("preprocess keeps the expected users and items")
{
    // 8 users. Items 10, 20 and 30 have 8, 6 and 3 raters; item 40 has exactly 2 = 25%.
    std::string csv = "userId,movieId,rating,timestamp\n";
    for (int u = 1; u <= 8; ++u) {
        csv += std::to_string(u) + ",10," + (u % 2 ? "4.5" : "2.0") + ",0\n";
    }
    for (int u = 1; u <= 6; ++u) {
        csv += std::to_string(u) + ",20,3.5,0\n";
    }
    csv += "1,30,5.0,0\n2,30,1.0,0\n3,30,4.0,0\n";
    csv += "7,40,5.0,0\n8,40,5.0,0\n";
    const auto triples = parse_ratings(csv);
    CHECK(triples.size() == 19);

    // items 10, 20, 30 pass (> 2 raters); users must rate more than 0.5 of 3 items
    const auto m = preprocess_ratings(triples, 0.25, 0.5, RatingCoding{});
    CHECK(m.items == std::vector<std::int64_t>{10, 20, 30});
    CHECK(m.users == std::vector<std::int64_t>{1, 2, 3, 4, 5, 6});
    CHECK(m.data.names() == std::vector<std::string>{"item10", "item20", "item30"});
    CHECK(m.data.at(0, 0) == 2);
    CHECK(m.data.at(1, 0) == 1);
    CHECK(m.data.at(0, 1) == 1);
    CHECK(m.data.at(3, 2) == kMissing);
    CHECK(m.data.missing_count() == 3);

    // users 7 and 8 rated 1 of 3 kept items; at 0.95 only users 1-3 remain
    const auto strict = preprocess_ratings(triples, 0.25, 0.95, RatingCoding{});
    CHECK(strict.users == std::vector<std::int64_t>{1, 2, 3});
    CHECK(strict.data.complete());

    RatingCoding five;
    five.kind = RatingCoding::Kind::five_category;
    const auto f = preprocess_ratings(triples, 0.25, 0.95, five);
    CHECK(f.data.schema().cardinality(0) == 5);
    CHECK(f.data.at(0, 1) == 4);

    CHECK_THROWS_AS(preprocess_ratings(triples, 1.0, 0.5, RatingCoding{}), ValidationError);
}

TEST_CASE("ratings parse errors")
{
    CHECK_THROWS_AS(parse_ratings("u,m,r\n1,2\n"), ParseError);
    CHECK_THROWS_AS(parse_ratings("u,m,r\n1,x,3\n"), ParseError);
    CHECK_THROWS_AS(parse_ratings("u,m,r\n1,2,7\n"), ParseError);
    CHECK(parse_ratings("u,m,r\r\n1,2,3.5\r\n").size() == 1);
}

}
