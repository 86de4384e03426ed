#include "dpmcpm/core.hpp"
#include "dpmcpm/model_io.hpp"
#include "dpmcpm/sampler.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>

using namespace dpmcpm;

TEST_SUITE("core")
{

TEST_CASE("parse with a schema maps NA to 0")
{
    const CategoricalSchema schema({2, 2});
    const Dataset d = parse_dataset("a,b\n1,NA\n2,1", &schema);
    CHECK(d.rows() == 2);
    CHECK(d.cells() == std::vector<Code>{1, 0, 2, 1});
    CHECK(d.missing_count() == 1);
    CHECK(d.names() == std::vector<std::string>{"a", "b"});
}

TEST_CASE("complete data has no missing cells")
{
    const CategoricalSchema schema({2, 2});
    const Dataset d = parse_dataset("a,b\n2,2\n1,1\n", &schema);
    CHECK(d.cells() == std::vector<Code>{2, 2, 1, 1});
    CHECK(d.complete());
}

TEST_CASE("inferred cardinality below 2 is rejected")
{
    try {
        parse_dataset("a\n1\n1");
        FAIL("expected a parse error");
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("column a") != std::string::npos);
    }
}

TEST_CASE("parse errors name the offending cell")
{
    const CategoricalSchema schema({2, 2});
    CHECK_THROWS_AS(parse_dataset("a,b\n1,x\n", &schema), ParseError);
    CHECK_THROWS_AS(parse_dataset("a,b\n1,3\n", &schema), ParseError);
    CHECK_THROWS_AS(parse_dataset("a,b\n1\n", &schema), ParseError);
    CHECK_THROWS_AS(parse_dataset("a,b\n1,-1\n", &schema), ParseError);
    try {
        parse_dataset("a,b\n1,2\n2,7\n", &schema);
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("row 2") != std::string::npos);
        CHECK(msg.find("(b)") != std::string::npos);
    }
}

TEST_CASE("na is case-insensitive and declared categories survive")
{
    const CategoricalSchema schema({3, 2});
    const Dataset d = parse_dataset("x,y\nna,1\n1,Na\n", &schema);
    CHECK(d.missing_count() == 2);
    CHECK(d.schema().cardinality(0) == 3);
}

TEST_CASE("inference of cardinalities uses the column maximum")
{
    const Dataset d = parse_dataset("x,y\n1,4\nNA,2\n3,1\n");
    CHECK(d.schema().cardinalities() == std::vector<std::size_t>{3, 4});
}

TEST_CASE("canonical csv round trip")
{
    const std::string text = "a,b,c\n1,NA,3\n2,2,NA\n";
    const Dataset d = parse_dataset(text);
    CHECK(format_dataset(d) == text);
    CHECK(parse_dataset(format_dataset(d)) == d);
}

TEST_CASE("schema layout")
{
    const CategoricalSchema s({2, 3, 4});
    CHECK(s.augmented_cells() == 12);
    CHECK(s.augmented_offset(2) == 7);
    CHECK(s.collapsed_cells() == 9);
    CHECK(s.collapsed_offset(2) == 5);
    CHECK_FALSE(s.all_binary());
    CHECK(CategoricalSchema({2, 2}).all_binary());
    CHECK_THROWS_AS(CategoricalSchema({2, 1}), ValidationError);
    CHECK_THROWS_AS(CategoricalSchema(std::vector<std::size_t>{}), ValidationError);
    CHECK(table_size(CategoricalSchema(std::vector<std::size_t>(80, 4))) == SIZE_MAX);
}

TEST_CASE("dataset rejects codes above the cardinality")
{
    CHECK_THROWS_AS(Dataset(CategoricalSchema({2}), 1, {3}), ValidationError);
    CHECK_THROWS_AS(Dataset(CategoricalSchema({2}), 2, {1}), ValidationError);
}

TEST_CASE("joint table indexing")
{
    JointDistribution j;
    j.schema = CategoricalSchema({2, 3});
    const Code combo[2] = {2, 1};
    CHECK(j.index(combo) == 3);
    for (std::size_t idx = 0; idx < 6; ++idx) {
        CHECK(j.index(j.combination(idx)) == idx);
    }
}

TEST_CASE("model round trip is bit exact")
{
    CollapsedModel m;
    m.schema = CategoricalSchema({2});
    m.theta = {1.0};
    m.tilde_psi = {0.5, 0.5};
    const CollapsedModel back = deserialize_model(serialize_model(m));
    CHECK(back.schema == m.schema);
    CHECK(back.theta == m.theta);
    CHECK(back.tilde_psi == m.tilde_psi);
}

TEST_CASE("theta off the simplex fails to load")
{
    const std::string doc =
        R"({"k":2,"cardinalities":[2],"theta":[0.6,0.6],"tildePsi":[[[0.5,0.5]],[[0.5,0.5]]]})";
    CHECK_THROWS_AS(deserialize_model(doc), ValidationError);
    CHECK_THROWS_AS(deserialize_model("{not json"), ParseError);
    CHECK_THROWS_AS(deserialize_model(R"({"k":1})"), ParseError);
}

TEST_CASE("sampler output round trips field by field")
{
    std::vector<Code> cells;
    for (std::size_t i = 0; i < 30; ++i) {
        cells.push_back(static_cast<Code>(i % 7 == 0 ? 0 : 1 + i % 2));
    }
    const Dataset data(CategoricalSchema({2, 2, 2}), 10, cells);
    GibbsConfig config;
    config.burnin = 10;
    config.samples = 5;
    config.seed = 3;
    const auto posterior = run_gibbs(data, config.priors_for(data.schema()), config);
    for (const auto& draw : posterior.draws) {
        const auto back = deserialize_model(serialize_model(draw));
        CHECK(back.theta == draw.theta);
        CHECK(back.tilde_psi == draw.tilde_psi);
    }
    const auto all = deserialize_posterior(serialize_posterior(posterior));
    REQUIRE(all.draws.size() == posterior.draws.size());
    CHECK(all.k_histogram == posterior.k_histogram);
    CHECK(all.draw_k == posterior.draw_k);
    CHECK(all.draws.back().tilde_psi == posterior.draws.back().tilde_psi);
}

TEST_CASE("atomic write replaces the target")
{
    const auto dir = std::filesystem::temp_directory_path() / "dpmcpm_core_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "out.txt").string();
    write_file_atomic(path, "first");
    write_file_atomic(path, "second");
    CHECK(read_file(path) == "second");
    CHECK(std::distance(std::filesystem::directory_iterator(dir),
                        std::filesystem::directory_iterator{}) == 1);
    std::filesystem::remove_all(dir);
}

TEST_CASE("priors")
{
    const CategoricalSchema s({2, 3});
    const Priors p = Priors::flat(s);
    CHECK(p.alpha == 0.25);
    CHECK(p.beta[1].size() == 4);
    Priors bad = p;
    bad.alpha = 0.0;
    CHECK_THROWS_AS(bad.validate(s), ValidationError);
    bad = p;
    bad.beta[0][0] = -1.0;
    CHECK_THROWS_AS(bad.validate(s), ValidationError);
}

}
