#include "lifetraj/textualize.hpp"

#include "lifetraj/io.hpp"
#include "lifetraj/kvfile.hpp"
#include "lifetraj/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <set>

namespace lifetraj {

namespace {

const std::set<std::string, std::less<>> kBaselineSlots = {
    "year",       "age",       "sex",           "residence",           "family_relation", "child_status",
    "education_level", "education_field", "employment", "occupation", "industry", "workplace",
    "labor_market_region", "income_source", "income_decile", "government_support",
};

const std::set<std::string, std::less<>> kEventSlots = {"year", "from", "to"};

const std::string_view kBaselineGroups[] = {"demographics", "education", "work",   "employment",
                                             "workplace",    "income",    "support"};

void lowercase_first(std::string& s) {
    if (!s.empty() && s[0] >= 'A' && s[0] <= 'Z') {
        s[0] = static_cast<char>(s[0] - 'A' + 'a');
    }
}

void check_slots(const SentenceTemplate& t, const std::set<std::string, std::less<>>& allowed,
                 const std::string& where) {
    for (const auto& seg : t.segments()) {
        if (seg.is_placeholder && allowed.count(seg.text) == 0) {
            throw TemplateError(where + ": unknown placeholder {" + seg.text + "}");
        }
    }
}

std::string baseline_value(const BaselineProfile& b, std::string_view name) {
    if (name == "year") return std::to_string(b.year);
    if (name == "age") return std::to_string(b.age);
    if (name == "sex") return b.sex.description;
    if (name == "residence") return b.residence.description;
    if (name == "family_relation") return b.family_relation.description;
    if (name == "child_status") return b.child_status.description;
    if (name == "education_level") return b.education_level.description;
    if (name == "education_field") return b.education_field.description;
    if (name == "employment") return b.employment.description;
    if (name == "occupation") return b.occupation.description;
    if (name == "industry") return b.industry.description;
    if (name == "workplace") return b.workplace.description;
    if (name == "labor_market_region") return b.labor_market_region.description;
    if (name == "income_source") return b.income_source.description;
    if (name == "income_decile") return ordinal(income_decile(b.income_percentile));
    if (name == "government_support") return b.government_support.description;
    throw TemplateError("unknown placeholder {" + std::string(name) + "}");
}

std::string event_value(const LifeEvent& e, std::string_view name) {
    if (name == "year") return std::to_string(e.year);
    if (name == "from") return e.from_value;
    if (name == "to") return e.to_value;
    throw TemplateError("unknown placeholder {" + std::string(name) + "}");
}

template <typename Lookup>
void append_sentence(std::string& out, const TemplateSet& set, const TemplateEntry& entry, Lookup&& lookup) {
    const SentenceTemplate* chosen = &entry.plain;
    if (entry.vowel && entry.plain.article_slot() != nullptr &&
        set.starts_with_vowel_sound(lookup(*entry.plain.article_slot()))) {
        chosen = &*entry.vowel;
    }
    if (!out.empty()) {
        out += ' ';
    }
    for (const auto& seg : chosen->segments()) {
        if (!seg.is_placeholder) {
            out += seg.text;
            continue;
        }
        std::string value = lookup(seg.text);
        if (seg.lowercase_first) {
            lowercase_first(value);
        }
        out += value;
    }
}

} // namespace

SentenceTemplate SentenceTemplate::compile(std::string_view pattern, const std::string& where) {
    SentenceTemplate t;
    t.pattern_ = std::string(pattern);
    std::string literal;
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        const char c = pattern[i];
        if (c == '}') {
            throw TemplateError(where + ": unmatched '}' at offset " + std::to_string(i));
        }
        if (c != '{') {
            literal += c;
            continue;
        }
        const auto close = pattern.find('}', i);
        if (close == std::string_view::npos) {
            throw TemplateError(where + ": unterminated placeholder at offset " + std::to_string(i));
        }
        std::string_view body = pattern.substr(i + 1, close - i - 1);
        Segment seg;
        seg.is_placeholder = true;
        if (const auto bar = body.find('|'); bar != std::string_view::npos) {
            if (body.substr(bar + 1) != "lc") {
                throw TemplateError(where + ": unknown filter '" + std::string(body.substr(bar + 1)) + "'");
            }
            seg.lowercase_first = true;
            body = body.substr(0, bar);
        }
        if (body.empty()) {
            throw TemplateError(where + ": empty placeholder at offset " + std::to_string(i));
        }
        seg.text = std::string(body);
        const bool after_article = literal == "a " || (literal.size() >= 3 && literal.ends_with(" a ")) ||
                                   literal.ends_with(" an ") || literal == "an ";
        if (!t.article_slot_ && after_article) {
            t.article_slot_ = seg.text;
        }
        if (!literal.empty()) {
            t.segments_.push_back(Segment{std::move(literal), false, false});
            literal.clear();
        }
        t.segments_.push_back(std::move(seg));
        i = close;
    }
    if (!literal.empty()) {
        t.segments_.push_back(Segment{std::move(literal), false, false});
    }
    return t;
}

TemplateSet TemplateSet::parse(std::string_view text, const std::string& source) {
    const KvFile kv = KvFile::parse(text, source);
    TemplateSet set;
    std::map<std::string, std::pair<std::optional<SentenceTemplate>, std::optional<SentenceTemplate>>> baseline;
    std::vector<std::string> baseline_order;
    std::map<EventKind, std::pair<std::optional<SentenceTemplate>, std::optional<SentenceTemplate>>> events;

    for (const auto& e : kv.entries()) {
        const std::string where = source + ":" + std::to_string(e.line);
        if (e.key == "version") {
            set.version = static_cast<int>(kv.get_int("version").value_or(0));
            continue;
        }
        if (e.key == "grammar.vowels") {
            set.vowels = e.value;
            continue;
        }
        if (e.key == "grammar.consonant_sound_prefixes") {
            set.consonant_sound_prefixes.clear();
            std::size_t pos = 0;
            while (pos <= e.value.size()) {
                const auto bar = std::min(e.value.find('|', pos), e.value.size());
                if (bar > pos) {
                    set.consonant_sound_prefixes.push_back(e.value.substr(pos, bar - pos));
                }
                pos = bar + 1;
            }
            continue;
        }
        const auto dot = e.key.find('.');
        if (dot == std::string::npos || !e.quoted) {
            throw TemplateError(where + ": unexpected entry '" + e.key + "'");
        }
        const std::string section = e.key.substr(0, dot);
        std::string name = e.key.substr(dot + 1);
        bool vowel = false;
        if (name.ends_with("@vowel")) {
            vowel = true;
            name.resize(name.size() - 6);
        }
        SentenceTemplate compiled = SentenceTemplate::compile(e.value, where);
        if (section == "baseline") {
            if (std::find(std::begin(kBaselineGroups), std::end(kBaselineGroups), name) == std::end(kBaselineGroups)) {
                throw TemplateError(where + ": unknown baseline group '" + name + "'");
            }
            check_slots(compiled, kBaselineSlots, where);
            if (baseline.count(name) == 0) {
                baseline_order.push_back(name);
            }
            auto& slot = baseline[name];
            (vowel ? slot.second : slot.first) = std::move(compiled);
        } else if (section == "events") {
            const auto kind = parse_event_kind(name);
            if (!kind) {
                throw TemplateError(where + ": unknown event kind '" + name + "'");
            }
            check_slots(compiled, kEventSlots, where);
            auto& slot = events[*kind];
            (vowel ? slot.second : slot.first) = std::move(compiled);
        } else {
            throw TemplateError(where + ": unknown section '" + section + "'");
        }
    }
    if (set.version < 1) {
        throw TemplateError(source + ": missing or invalid version");
    }
    for (const auto& name : baseline_order) {
        auto& [plain, vowel] = baseline[name];
        if (!plain) {
            throw TemplateError(source + ": baseline." + name + "@vowel has no plain template");
        }
        set.baseline.emplace_back(name, TemplateEntry{std::move(*plain), std::move(vowel)});
    }
    for (auto& [kind, slot] : events) {
        if (!slot.first) {
            throw TemplateError(source + ": events." + std::string(event_kind_name(kind)) +
                                "@vowel has no plain template");
        }
        set.events.emplace(kind, TemplateEntry{std::move(*slot.first), std::move(slot.second)});
    }
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& path) { return parse(read_file(path), path.string()); }

TemplateSet TemplateSet::restricted_to(const std::vector<std::string>& groups) const {
    TemplateSet out = *this;
    std::erase_if(out.baseline, [&](const auto& entry) {
        return std::find(groups.begin(), groups.end(), entry.first) == groups.end();
    });
    return out;
}

bool TemplateSet::starts_with_vowel_sound(std::string_view word) const {
    if (word.empty()) {
        return false;
    }
    std::string lower(word.substr(0, 8));
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](char c) { return c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c; });
    for (const auto& prefix : consonant_sound_prefixes) {
        if (lower.starts_with(prefix)) {
            return false;
        }
    }
    return vowels.find(lower[0]) != std::string::npos;
}

std::string render_text(const Trajectory& trajectory, const TemplateSet& templates) {
    std::string out;
    const BaselineProfile& b = trajectory.baseline;
    for (const auto& [group, entry] : templates.baseline) {
        append_sentence(out, templates, entry, [&](std::string_view name) { return baseline_value(b, name); });
    }
    for (const auto& e : trajectory.events) {
        const auto it = templates.events.find(e.kind);
        if (it == templates.events.end()) {
            throw TemplateError("no template for event kind '" + std::string(event_kind_name(e.kind)) + "'");
        }
        append_sentence(out, templates, it->second, [&](std::string_view name) { return event_value(e, name); });
    }
    if (out.empty()) {
        throw TemplateError("template set produced empty text for " + trajectory.person_id);
    }
    return out;
}

RenderedTrajectory render(const LabeledTrajectory& item, const TemplateSet& templates) {
    return RenderedTrajectory{item.trajectory.person_id, render_text(item.trajectory, templates), item.label.moved,
                              std::nullopt};
}

std::vector<RenderedTrajectory> render_all(const std::vector<LabeledTrajectory>& items,
                                           const TemplateSet& templates) {
    std::vector<RenderedTrajectory> out(items.size());
    parallel_for(items.size(), [&](std::size_t i) { out[i] = render(items[i], templates); });
    return out;
}

void render_dataset(const std::vector<RenderedTrajectory>& rendered, const std::filesystem::path& path) {
    AtomicFile file(path);
    for (const auto& r : rendered) {
        nlohmann::ordered_json line{{"id", r.person_id}, {"text", r.text}, {"label", r.label ? 1 : 0}};
        file.stream() << line.dump() << '\n';
    }
    file.commit();
}

std::vector<RenderedTrajectory> load_dataset(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<RenderedTrajectory> out;
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        const std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            const auto j = nlohmann::json::parse(line);
            const int label = j.at("label").get<int>();
            if (label != 0 && label != 1) {
                throw ParseError(path.string(), line_no, 1, "label must be 0 or 1");
            }
            out.push_back(RenderedTrajectory{j.at("id").get<std::string>(), j.at("text").get<std::string>(),
                                             label == 1, std::nullopt});
        } catch (const nlohmann::json::parse_error& e) {
            throw ParseError(path.string(), line_no, e.byte == 0 ? 1 : e.byte, "invalid JSON");
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(path.string(), line_no, 1, e.what());
        }
    }
    return out;
}

} // namespace lifetraj
