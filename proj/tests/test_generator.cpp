#include "lifetraj/registerdata.hpp"
#include "lifetraj/trajectory.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace lifetraj;
using testing::bundled_codebook;

namespace {

// Share of under-40 person-years followed by a residence change.
double young_move_rate(const Population& pop) {
    std::size_t years = 0;
    std::size_t moves = 0;
    for (const auto& h : pop.persons) {
        for (std::size_t i = 1; i < h.records.size(); ++i) {
            if (h.records[i - 1].age < 40) {
                ++years;
                moves += h.records[i].residence != h.records[i - 1].residence;
            }
        }
    }
    return static_cast<double>(moves) / static_cast<double>(years);
}

double label_prevalence(const Population& pop, int split_year) {
    std::size_t n = 0;
    std::size_t movers = 0;
    for (const auto& h : pop.persons) {
        if (in_cohort(h, split_year)) {
            ++n;
            movers += compute_label(h, split_year).moved;
        }
    }
    return static_cast<double>(movers) / static_cast<double>(n);
}

} // namespace

TEST_SUITE("generator") {

TEST_CASE("same seed, same population; different seed, different population") {
    SynthConfig c;
    c.population_size = 300;
    c.seed = 5;
    const auto a = generate_population(c, bundled_codebook());
    const auto b = generate_population(c, bundled_codebook());
    CHECK(a.persons == b.persons);
    c.seed = 6;
    const auto d = generate_population(c, bundled_codebook());
    CHECK_FALSE(a.persons == d.persons);
}

TEST_CASE("generated histories satisfy every record invariant and resolve in the codebook") {
    LoadOptions options;
    options.codebook = &bundled_codebook();
    options.observation_span = YearRange{2001, 2017};
    const auto report = validate_histories(testing::small_population().persons, options);
    CHECK_MESSAGE(report.ok(), report.to_string());
}

TEST_CASE("calibration hits the target share and reports it") {
    const auto& pop = testing::small_population();
    CHECK(pop.report.mover_share == doctest::Approx(label_prevalence(pop, 2013)));
    CHECK(std::abs(pop.report.mover_share - 0.136) < 0.02);
    CHECK(pop.report.cohort_size == cohort_filter(pop.persons, 2013).size());
}

TEST_CASE("zero hazard without calibration produces no movers") {
    SynthConfig c;
    c.population_size = 500;
    c.seed = 1;
    c.base_move_hazard = 0.0;
    c.age_effect = 1.0;
    c.children_effect = 1.0;
    c.target_mover_share.reset();
    const auto pop = generate_population(c, bundled_codebook());
    CHECK(pop.report.mover_share == 0.0);
    CHECK(label_prevalence(pop, 2013) == 0.0);
}

TEST_CASE("a stronger age effect raises the under-40 move rate") {
    SynthConfig c;
    c.population_size = 10000;
    c.seed = 3;
    c.target_mover_share.reset();
    c.age_effect = 1.5;
    const double low = young_move_rate(generate_population(c, bundled_codebook()));
    c.age_effect = 3.0;
    const double high = young_move_rate(generate_population(c, bundled_codebook()));
    CHECK(high > low);
}

TEST_CASE("a person's history does not depend on population size when uncalibrated") {
    SynthConfig c;
    c.seed = 9;
    c.target_mover_share.reset();
    c.population_size = 50;
    const auto small = generate_population(c, bundled_codebook());
    c.population_size = 120;
    const auto large = generate_population(c, bundled_codebook());
    for (std::size_t i = 0; i < 50; ++i) {
        CHECK(small.persons[i] == large.persons[i]);
    }
}

TEST_CASE("both classification revisions appear with matching scheme tags") {
    bool old_industry = false;
    bool new_industry = false;
    for (const auto& h : testing::small_population().persons) {
        for (const auto& r : h.records) {
            CHECK(r.industry_scheme == bundled_codebook().resolve_scheme(Variable::Industry, r.year));
            CHECK(r.occupation_scheme == bundled_codebook().resolve_scheme(Variable::Occupation, r.year));
            old_industry |= r.industry_scheme == "SNI2002";
            new_industry |= r.industry_scheme == "SNI2007";
        }
    }
    CHECK(old_industry);
    CHECK(new_industry);
}

TEST_CASE("invalid configurations name the offending field") {
    SynthConfig c;
    c.base_move_hazard = 1.5;
    try {
        c.validate();
        FAIL("expected config error");
    } catch (const ConfigError& e) {
        CHECK(e.field() == "base_move_hazard");
    }
    c = SynthConfig{};
    c.split_year = 2020;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = SynthConfig{};
    c.population_size = 0;
    CHECK_THROWS_AS(generate_population(c, bundled_codebook()), ConfigError);
}

}
