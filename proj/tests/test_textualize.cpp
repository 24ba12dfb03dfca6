#include "lifetraj/pipeline.hpp"
#include "lifetraj/textualize.hpp"

#include "support.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace lifetraj;
using testing::bundled_codebook;
using testing::bundled_templates;

namespace {

const char* const kExcerptText =
    "In 2001 a male, aged 34, lives in Halmstad, is married and has no children. "
    "The person has a university degree in economics. "
    "The person works as a financial assistant in accounting and bookkeeping. "
    "The person is employed. "
    "The person's workplace is in Halmstad, in the Halland labor market region. "
    "The person's main income source is salary, in the 6th income decile. "
    "The person receives no government support. "
    "In 2004, the person has children. "
    "In 2006 the person moves from Halmstad to Göteborg.";

Trajectory excerpt() {
    return build_trajectory(testing::load_fixture_person("coded_excerpt.csv"), bundled_codebook(), 2013);
}

// Everything the narrative is meant to carry, without codes or raw percentiles.
std::string content_key(const Trajectory& t) {
    const BaselineProfile& b = t.baseline;
    std::string key = std::to_string(b.year) + "|" + std::to_string(b.age) + "|" +
                      std::to_string(income_decile(b.income_percentile));
    for (const CodedValue* v : {&b.sex, &b.residence, &b.family_relation, &b.child_status, &b.education_level,
                                &b.education_field, &b.employment, &b.occupation, &b.industry, &b.workplace,
                                &b.labor_market_region, &b.income_source, &b.government_support}) {
        key += "|" + v->description;
    }
    for (const LifeEvent& e : t.events) {
        key += "|" + std::to_string(e.year) + ":" + std::string(event_kind_name(e.kind)) + ":" + e.from_value + ">" +
               e.to_value;
    }
    return key;
}

TemplateSet parse(const std::string& body) {
    return TemplateSet::parse("version = 1\n" + body, "inline");
}

} // namespace

TEST_SUITE("textualize") {

TEST_CASE("coded excerpt renders to the expected narrative") {
    CHECK(render_text(excerpt(), bundled_templates()) == kExcerptText);
}

TEST_CASE("restricted template set reproduces the short narrative") {
    const TemplateSet short_set = bundled_templates().restricted_to({"demographics", "education", "work"});
    CHECK(render_text(excerpt(), short_set) ==
          "In 2001 a male, aged 34, lives in Halmstad, is married and has no children. "
          "The person has a university degree in economics. "
          "The person works as a financial assistant in accounting and bookkeeping. "
          "In 2004, the person has children. "
          "In 2006 the person moves from Halmstad to Göteborg.");
}

TEST_CASE("article follows the sound of the next word") {
    const TemplateSet& t = bundled_templates();
    CHECK(t.starts_with_vowel_sound("engineer"));
    CHECK(t.starts_with_vowel_sound("Accountant"));
    CHECK_FALSE(t.starts_with_vowel_sound("university degree"));
    CHECK_FALSE(t.starts_with_vowel_sound("user support technician"));
    CHECK_FALSE(t.starts_with_vowel_sound("european"));
    CHECK_FALSE(t.starts_with_vowel_sound("financial assistant"));
    CHECK_FALSE(t.starts_with_vowel_sound(""));

    Trajectory tr = excerpt();
    tr.events.push_back({2008, EventKind::OccupationChange, "Financial assistant", "Accountant"});
    tr.events.push_back({2009, EventKind::OccupationChange, "Accountant", "Financial assistant"});
    const std::string text = render_text(tr, t);
    CHECK(text.find("In 2008 the person starts working as an accountant.") != std::string::npos);
    CHECK(text.find("In 2009 the person starts working as a financial assistant.") != std::string::npos);
}

TEST_CASE("template compilation") {
    const auto s = SentenceTemplate::compile("In {year} a {to|lc} x", "t");
    REQUIRE(s.segments().size() == 5);
    CHECK(s.segments()[1].is_placeholder);
    CHECK(s.segments()[1].text == "year");
    CHECK(s.segments()[3].lowercase_first);
    REQUIRE(s.article_slot() != nullptr);
    CHECK(*s.article_slot() == "to");
    CHECK(SentenceTemplate::compile("no slots", "t").article_slot() == nullptr);
    CHECK_THROWS_AS(SentenceTemplate::compile("broken {year", "t"), TemplateError);
    CHECK_THROWS_AS(SentenceTemplate::compile("bad {year|up}", "t"), TemplateError);
    CHECK_THROWS_AS(SentenceTemplate::compile("empty {}", "t"), TemplateError);
}

TEST_CASE("template files are checked") {
    CHECK_THROWS_AS(TemplateSet::parse("[baseline]\ndemographics = \"x\"\n", "t"), TemplateError);
    CHECK_THROWS_AS(parse("[baseline]\ndemographics = \"In {from}\"\n"), TemplateError);
    CHECK_THROWS_AS(parse("[events]\nresidential_move = \"{age}\"\n"), TemplateError);
    CHECK_THROWS_AS(parse("[events]\nteleport = \"{year}\"\n"), TemplateError);
    CHECK_THROWS_AS(parse("[baseline]\nhobbies = \"{year}\"\n"), TemplateError);
}

TEST_CASE("an event without a template is an error") {
    const TemplateSet t = parse("[baseline]\ndemographics = \"In {year}.\"\n");
    Trajectory tr = excerpt();
    CHECK_THROWS_AS(render_text(tr, t), TemplateError);
    tr.events.clear();
    CHECK(render_text(tr, t) == "In 2001.");
}

TEST_CASE("static-only text equals full text when nothing changes") {
    PersonHistory h = testing::load_fixture_person("coded_excerpt.csv");
    for (auto& r : h.records) {
        r.residence = 138;
        r.child_status = 0;
    }
    const auto full = build_trajectory(h, bundled_codebook(), 2013);
    const auto stat = build_static_only(h, bundled_codebook(), 2013);
    CHECK(full.events.empty());
    CHECK(render_text(full, bundled_templates()) == render_text(stat, bundled_templates()));
}

TEST_CASE("distinct trajectories render to distinct texts") {
    const auto items = build_dataset(testing::small_population().persons, bundled_codebook(), 2013);
    std::map<std::string, std::string> seen;
    std::size_t collisions = 0;
    for (const auto& item : items) {
        const std::string key = content_key(item.trajectory);
        auto [it, inserted] = seen.emplace(render_text(item.trajectory, bundled_templates()), key);
        collisions += !inserted && it->second != key ? 1 : 0;
    }
    CHECK(collisions == 0);
}

TEST_CASE("rendering is deterministic and keeps ids and labels") {
    const auto items = build_dataset(testing::small_population().persons, bundled_codebook(), 2013);
    const auto a = render_all(items, bundled_templates());
    const auto b = render_all(items, bundled_templates());
    CHECK(a == b);
    REQUIRE(a.size() == items.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].person_id == items[i].trajectory.person_id);
        CHECK(a[i].label == items[i].label.moved);
        CHECK(a[i].text.find("  ") == std::string::npos);
    }
}

TEST_CASE("dataset JSONL round-trip") {
    const auto dir = testing::scratch_dir("textualize");
    const auto items = build_dataset(testing::small_population().persons, bundled_codebook(), 2013);
    std::vector<RenderedTrajectory> rendered = render_all(items, bundled_templates());
    rendered.resize(25);
    render_dataset(rendered, dir / "d.jsonl");
    auto back = load_dataset(dir / "d.jsonl");
    REQUIRE(back.size() == rendered.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CHECK(back[i].person_id == rendered[i].person_id);
        CHECK(back[i].text == rendered[i].text);
        CHECK(back[i].label == rendered[i].label);
    }

    std::ifstream in(dir / "d.jsonl");
    std::string first;
    std::getline(in, first);
    CHECK(first.rfind("{\"id\":", 0) == 0);
    CHECK(first.find("\"label\":" + std::string(rendered[0].label ? "1" : "0")) != std::string::npos);

    render_dataset({}, dir / "empty.jsonl");
    CHECK(load_dataset(dir / "empty.jsonl").empty());
}

}
