#include "lifetraj/pipeline.hpp"
#include "lifetraj/trajectory.hpp"

#include "oracles.hpp"
#include "support.hpp"

#include <doctest.h>

using namespace lifetraj;
using testing::bundled_codebook;

namespace {

PersonHistory two_years(Code industry_a, const char* scheme_a, int year_a, Code industry_b, const char* scheme_b,
                        int year_b) {
    PersonHistory h = testing::load_fixture_person("coded_excerpt.csv");
    h.records.resize(2);
    h.records[0].year = year_a;
    h.records[0].industry = industry_a;
    h.records[0].industry_scheme = scheme_a;
    h.records[1] = h.records[0];
    h.records[1].year = year_b;
    h.records[1].age += year_b - year_a;
    h.records[1].industry = industry_b;
    h.records[1].industry_scheme = scheme_b;
    return h;
}

std::size_t count_kind(const std::vector<LifeEvent>& events, EventKind kind) {
    return static_cast<std::size_t>(
        std::count_if(events.begin(), events.end(), [&](const LifeEvent& e) { return e.kind == kind; }));
}

} // namespace

TEST_SUITE("trajectory") {

TEST_CASE("coded excerpt yields the baseline and two events") {
    const PersonHistory h = testing::load_fixture_person("coded_excerpt.csv");
    const Trajectory t = build_trajectory(h, bundled_codebook(), 2013);
    CHECK(t.baseline.year == 2001);
    CHECK(t.baseline.age == 34);
    CHECK(t.baseline.sex.description == "Male");
    CHECK(t.baseline.residence.description == "Halmstad");
    CHECK(t.baseline.family_relation.description == "Married");
    CHECK(t.baseline.child_status.description == "No children");
    CHECK(t.baseline.education_level.description == "University degree");
    CHECK(t.baseline.education_field.description == "Economics");
    CHECK(t.baseline.occupation.description == "Financial assistant");
    CHECK(t.baseline.occupation.scheme == "SSYK2001");
    CHECK(t.baseline.industry.description == "Accounting and bookkeeping");
    REQUIRE(t.events.size() == 2);
    CHECK(t.events[0] == LifeEvent{2004, EventKind::ChildrenStatusChange, "No children", "Children"});
    CHECK(t.events[1] == LifeEvent{2006, EventKind::ResidentialMove, "Halmstad", "Göteborg"});
    CHECK(t.window == YearRange{2001, 2013});
}

TEST_CASE("label of the extended excerpt is zero") {
    const PersonHistory h = testing::load_fixture_person("coded_extended.csv");
    const MobilityLabel l = compute_label(h, 2013);
    CHECK_FALSE(l.moved);
    CHECK(l.window == YearRange{2014, 2017});
    // The SNI revision in 2013 keeps the same description: no event.
    CHECK(build_trajectory(h, bundled_codebook(), 2013).events.size() == 2);
}

TEST_CASE("a move from the split-year residence counts") {
    PersonHistory h = testing::load_fixture_person("coded_extended.csv");
    h.records[4].residence = 138;  // 2015
    CHECK(compute_label(h, 2013).moved);
    h = testing::load_fixture_person("coded_extended.csv");
    h.records[3].residence = 138;  // the 2013 record differs from 2015
    CHECK(compute_label(h, 2013).moved);
    h = testing::load_fixture_person("coded_extended.csv");
    h.records[2].residence = 138;  // a change at 2006 -> 2013 lies before the window
    h.records[1].residence = 138;
    CHECK_FALSE(compute_label(h, 2013).moved);
}

TEST_CASE("label and window errors") {
    const PersonHistory h = testing::load_fixture_person("coded_excerpt.csv");
    CHECK_THROWS_AS(compute_label(h, 2013), LabelUndefinedError);
    CHECK_THROWS_AS(build_baseline(h, bundled_codebook(), 2000), EmptyWindowError);
}

TEST_CASE("events match the brute-force pairwise diff on random histories") {
    Rng rng(2024);
    for (int i = 0; i < 300; ++i) {
        const PersonHistory h = oracle::random_history(rng, bundled_codebook(), "R" + std::to_string(i));
        CHECK(detect_events(h, bundled_codebook(), 2013) == oracle::brute_force_events(h, bundled_codebook(), 2013));
    }
}

TEST_CASE("events match the oracle on generated histories") {
    const auto& persons = testing::small_population().persons;
    for (std::size_t i = 0; i < 300; ++i) {
        CHECK(detect_events(persons[i], bundled_codebook(), 2013) ==
              oracle::brute_force_events(persons[i], bundled_codebook(), 2013));
    }
}

TEST_CASE("record order does not matter") {
    Rng rng(8);
    for (int i = 0; i < 50; ++i) {
        PersonHistory h = oracle::random_history(rng, bundled_codebook(), "R");
        const Trajectory expected = build_trajectory(h, bundled_codebook(), 2013);
        std::reverse(h.records.begin(), h.records.end());
        CHECK(build_trajectory(h, bundled_codebook(), 2013) == expected);
    }
}

TEST_CASE("classification revision modes") {
    // 64201 "Network operation" re-coded as 61100 "Wired telecommunications activities".
    const PersonHistory recode = two_years(64201, "SNI2002", 2007, 61100, "SNI2007", 2008);
    TrajectoryOptions o;
    CHECK(count_kind(detect_events(recode, bundled_codebook(), 2013, o), EventKind::IndustryChange) == 1);
    o.scheme_mode = SchemeChangeMode::harmonize;
    CHECK(count_kind(detect_events(recode, bundled_codebook(), 2013, o), EventKind::IndustryChange) == 0);

    // 37100 splits four ways; any target is a pure recoding under harmonize.
    const PersonHistory split = two_years(37100, "SNI2002", 2007, 38312, "SNI2007", 2008);
    CHECK(count_kind(detect_events(split, bundled_codebook(), 2013, o), EventKind::IndustryChange) == 0);
    const PersonHistory real = two_years(37100, "SNI2002", 2007, 61100, "SNI2007", 2008);
    CHECK(count_kind(detect_events(real, bundled_codebook(), 2013, o), EventKind::IndustryChange) == 1);

    // Same description across the revision: silent by default, explicit when strict.
    const PersonHistory same = two_years(6910, "SNI2002", 2007, 69201, "SNI2007", 2008);
    o.scheme_mode = SchemeChangeMode::descriptions;
    CHECK(detect_events(same, bundled_codebook(), 2013, o).empty());
    o.scheme_mode = SchemeChangeMode::strict_codes;
    const auto strict = detect_events(same, bundled_codebook(), 2013, o);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].from_value == "Accounting and bookkeeping (SNI2002 6910)");
    CHECK(strict[0].to_value == "Accounting and bookkeeping (SNI2007 69201)");
}

TEST_CASE("lenient mode names unknown codes instead of failing") {
    PersonHistory h = testing::load_fixture_person("coded_excerpt.csv");
    h.records[2].industry = 11111;
    CHECK_THROWS_AS(build_trajectory(h, bundled_codebook(), 2013), UnknownCodeError);
    TrajectoryOptions o;
    o.lenient = true;
    const auto t = build_trajectory(h, bundled_codebook(), 2013, o);
    CHECK(t.events.back().kind == EventKind::IndustryChange);
    CHECK(t.events.back().to_value == "unknown industry");
}

TEST_CASE("nothing after the split year reaches the trajectory") {
    const auto& persons = testing::small_population().persons;
    const auto before = build_dataset(persons, bundled_codebook(), 2013);
    auto altered = persons;
    for (auto& h : altered) {
        for (auto& r : h.records) {
            if (r.year > 2013) {
                r.family_relation = r.family_relation == 1 ? 2 : 1;
                r.employment = 3;
                r.income_percentile = 99;
                r.child_status = 2;
            }
        }
    }
    const auto after = build_dataset(altered, bundled_codebook(), 2013);
    REQUIRE(before.size() == after.size());
    for (std::size_t i = 0; i < before.size(); ++i) {
        CHECK(before[i].trajectory == after[i].trajectory);
        CHECK(before[i].label == after[i].label);
    }
}

TEST_CASE("income deciles and ordinals") {
    CHECK(income_decile(0) == 1);
    CHECK(income_decile(9) == 1);
    CHECK(income_decile(55) == 6);
    CHECK(income_decile(100) == 10);
    CHECK(ordinal(1) == "1st");
    CHECK(ordinal(2) == "2nd");
    CHECK(ordinal(3) == "3rd");
    CHECK(ordinal(10) == "10th");
    CHECK(ordinal(11) == "11th");
    CHECK(ordinal(22) == "22nd");
}

TEST_CASE("trajectories round-trip through JSONL") {
    const auto items = build_dataset(testing::small_population().persons, bundled_codebook(), 2013);
    const auto dir = testing::scratch_dir("trajectories");
    const std::vector<LabeledTrajectory> some(items.begin(), items.begin() + 40);
    save_trajectories(dir / "t.jsonl", some);
    CHECK(load_trajectories(dir / "t.jsonl") == some);
    for (EventKind k : kAllEventKinds) {
        CHECK(parse_event_kind(event_kind_name(k)) == k);
    }
}

}
