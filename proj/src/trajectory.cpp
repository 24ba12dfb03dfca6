#include "lifetraj/trajectory.hpp"

#include "lifetraj/io.hpp"

#include <json.hpp>

#include <algorithm>

namespace lifetraj {

namespace {

using nlohmann::ordered_json;

constexpr std::pair<EventKind, std::string_view> kKindNames[] = {
    {EventKind::ResidentialMove, "residential_move"},
    {EventKind::FamilyChange, "family_change"},
    {EventKind::ChildrenStatusChange, "children_status_change"},
    {EventKind::EducationChange, "education_change"},
    {EventKind::EmploymentChange, "employment_change"},
    {EventKind::OccupationChange, "occupation_change"},
    {EventKind::IndustryChange, "industry_change"},
    {EventKind::WorkplaceMove, "workplace_move"},
    {EventKind::LaborMarketMove, "labor_market_move"},
    {EventKind::IncomeChange, "income_change"},
    {EventKind::GovernmentSupportChange, "government_support_change"},
};

std::string decapitalize(std::string s) {
    if (!s.empty() && s[0] >= 'A' && s[0] <= 'Z') {
        s[0] = static_cast<char>(s[0] - 'A' + 'a');
    }
    return s;
}

// Records at or before `last_year`, in year order regardless of input order.
std::vector<const AnnualRecord*> sorted_until(const PersonHistory& h, int last_year) {
    std::vector<const AnnualRecord*> out;
    for (const auto& r : h.records) {
        if (r.year <= last_year) {
            out.push_back(&r);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const auto* a, const auto* b) { return a->year < b->year; });
    return out;
}

Code code_of(const AnnualRecord& r, Variable v) {
    switch (v) {
    case Variable::Sex: return r.sex;
    case Variable::Residence: return r.residence;
    case Variable::FamilyRelation: return r.family_relation;
    case Variable::ChildStatus: return r.child_status;
    case Variable::EducationLevel: return r.education_level;
    case Variable::EducationField: return r.education_field;
    case Variable::Employment: return r.employment;
    case Variable::Occupation: return r.occupation;
    case Variable::Industry: return r.industry;
    case Variable::WorkplaceMunicipality: return r.workplace;
    case Variable::LaborMarketRegion: return r.labor_market_region;
    case Variable::IncomeSource: return r.income_source;
    case Variable::GovernmentSupport: return r.government_support ? 1 : 0;
    }
    return 0;
}

class Describer {
public:
    Describer(const Codebook& book, const TrajectoryOptions& options) : book_(book), options_(options) {}

    // Scheme used to read this record's code: the record's own tag where it
    // carries one, otherwise the year's active scheme.
    std::string scheme(const AnnualRecord& r, Variable v) const {
        if (v == Variable::Occupation && !r.occupation_scheme.empty()) {
            return r.occupation_scheme;
        }
        if (v == Variable::Industry && !r.industry_scheme.empty()) {
            return r.industry_scheme;
        }
        try {
            return book_.resolve_scheme(v, r.year);
        } catch (const SchemeResolutionError&) {
            if (options_.lenient) {
                return {};
            }
            throw;
        }
    }

    CodedValue value(const AnnualRecord& r, Variable v) const {
        CodedValue out;
        out.code = code_of(r, v);
        out.scheme = scheme(r, v);
        out.description = describe(out.scheme, r.year, out.code, v);
        return out;
    }

    // Description plus, in harmonize mode, the revision targets of the code.
    HarmonizedLabel label(const AnnualRecord& r, Variable v) const {
        const std::string s = scheme(r, v);
        const Code c = code_of(r, v);
        if (options_.scheme_mode == SchemeChangeMode::harmonize && !s.empty()) {
            try {
                return book_.harmonize(s, r.year, c);
            } catch (const Error&) {
                if (!options_.lenient) {
                    throw;
                }
            }
        }
        return HarmonizedLabel{describe(s, r.year, c, v), s, {}};
    }

private:
    std::string describe(const std::string& scheme, int year, Code code, Variable v) const {
        if (options_.lenient) {
            const std::string* d = scheme.empty() ? nullptr : book_.try_lookup(scheme, year, code);
            return d != nullptr ? *d : "unknown " + std::string(variable_name(v));
        }
        return book_.lookup(scheme, year, code);
    }

    const Codebook& book_;
    const TrajectoryOptions& options_;
};

std::string education_text(const Describer& d, const AnnualRecord& r) {
    return d.label(r, Variable::EducationLevel).description + " in " +
           decapitalize(d.label(r, Variable::EducationField).description);
}

std::string income_text(const Describer& d, const AnnualRecord& r) {
    return d.label(r, Variable::IncomeSource).description + ", " + ordinal(income_decile(r.income_percentile)) +
           " income decile";
}

struct SimpleEvent {
    EventKind kind;
    Variable variable;
};

constexpr SimpleEvent kSimpleEvents[] = {
    {EventKind::ResidentialMove, Variable::Residence},
    {EventKind::FamilyChange, Variable::FamilyRelation},
    {EventKind::ChildrenStatusChange, Variable::ChildStatus},
    {EventKind::EmploymentChange, Variable::Employment},
    {EventKind::OccupationChange, Variable::Occupation},
    {EventKind::IndustryChange, Variable::Industry},
    {EventKind::WorkplaceMove, Variable::WorkplaceMunicipality},
    {EventKind::LaborMarketMove, Variable::LaborMarketRegion},
    {EventKind::GovernmentSupportChange, Variable::GovernmentSupport},
};

void compare_pair(const Describer& d, const AnnualRecord& prev, const AnnualRecord& cur, SchemeChangeMode mode,
                  std::vector<LifeEvent>& out) {
    auto emit = [&](EventKind kind, std::string from, std::string to) {
        out.push_back(LifeEvent{cur.year, kind, std::move(from), std::move(to)});
    };
    for (EventKind kind : kAllEventKinds) {
        if (kind == EventKind::EducationChange) {
            if (prev.education_level != cur.education_level || prev.education_field != cur.education_field) {
                std::string from = education_text(d, prev);
                std::string to = education_text(d, cur);
                if (from != to) {
                    emit(kind, std::move(from), std::move(to));
                }
            }
            continue;
        }
        if (kind == EventKind::IncomeChange) {
            if (income_decile(prev.income_percentile) != income_decile(cur.income_percentile) ||
                prev.income_source != cur.income_source) {
                emit(kind, income_text(d, prev), income_text(d, cur));
            }
            continue;
        }
        const auto it = std::find_if(std::begin(kSimpleEvents), std::end(kSimpleEvents),
                                     [&](const SimpleEvent& e) { return e.kind == kind; });
        const Variable v = it->variable;
        const Code a = code_of(prev, v);
        const Code b = code_of(cur, v);
        const bool revised = v == Variable::Occupation || v == Variable::Industry;
        const bool scheme_differs = revised && d.scheme(prev, v) != d.scheme(cur, v);
        if (a == b && !scheme_differs) {
            continue;
        }
        if (mode == SchemeChangeMode::strict_codes) {
            CodedValue from = d.value(prev, v);
            CodedValue to = d.value(cur, v);
            if (from.description == to.description) {
                from.description += " (" + from.scheme + " " + std::to_string(from.code) + ")";
                to.description += " (" + to.scheme + " " + std::to_string(to.code) + ")";
            }
            emit(kind, std::move(from.description), std::move(to.description));
            continue;
        }
        HarmonizedLabel from = d.label(prev, v);
        HarmonizedLabel to = d.label(cur, v);
        if (from.description == to.description) {
            continue;
        }
        if (mode == SchemeChangeMode::harmonize && from.targets.count(b) != 0 && to.targets.empty()) {
            continue;  // pure recoding of the same category into the new revision
        }
        emit(kind, std::move(from.description), std::move(to.description));
    }
}

ordered_json coded_json(const CodedValue& v) {
    return ordered_json{{"code", v.code}, {"scheme", v.scheme}, {"description", v.description}};
}

CodedValue coded_from_json(const ordered_json& j) {
    return CodedValue{j.at("code").get<Code>(), j.at("scheme").get<std::string>(),
                      j.at("description").get<std::string>()};
}

} // namespace

std::string_view event_kind_name(EventKind kind) {
    for (const auto& [k, name] : kKindNames) {
        if (k == kind) {
            return name;
        }
    }
    return "unknown";
}

std::optional<EventKind> parse_event_kind(std::string_view name) {
    for (const auto& [k, n] : kKindNames) {
        if (n == name) {
            return k;
        }
    }
    return std::nullopt;
}

int income_decile(int percentile) { return std::clamp(percentile / 10, 0, 9) + 1; }

std::string ordinal(int n) {
    const int mod100 = n % 100;
    const char* suffix = "th";
    if (mod100 < 11 || mod100 > 13) {
        switch (n % 10) {
        case 1: suffix = "st"; break;
        case 2: suffix = "nd"; break;
        case 3: suffix = "rd"; break;
        default: break;
        }
    }
    return std::to_string(n) + suffix;
}

std::vector<LifeEvent> detect_events(const PersonHistory& history, const Codebook& codebook, int split_year,
                                     const TrajectoryOptions& options) {
    const Describer d(codebook, options);
    const auto records = sorted_until(history, split_year);
    std::vector<LifeEvent> events;
    for (std::size_t i = 1; i < records.size(); ++i) {
        compare_pair(d, *records[i - 1], *records[i], options.scheme_mode, events);
    }
    std::stable_sort(events.begin(), events.end(), [](const LifeEvent& a, const LifeEvent& b) {
        return a.year != b.year ? a.year < b.year : a.kind < b.kind;
    });
    return events;
}

BaselineProfile build_baseline(const PersonHistory& history, const Codebook& codebook, int split_year,
                               const TrajectoryOptions& options) {
    const auto records = sorted_until(history, split_year);
    if (records.empty()) {
        throw EmptyWindowError("person " + history.person_id + " has no record at or before " +
                               std::to_string(split_year));
    }
    const AnnualRecord& r = *records.front();
    const Describer d(codebook, options);
    auto value = [&](Variable v) {
        CodedValue out = d.value(r, v);
        if (options.scheme_mode == SchemeChangeMode::harmonize) {
            out.description = d.label(r, v).description;
        }
        return out;
    };
    BaselineProfile b;
    b.year = r.year;
    b.sex = value(Variable::Sex);
    b.age = r.age;
    b.residence = value(Variable::Residence);
    b.family_relation = value(Variable::FamilyRelation);
    b.child_status = value(Variable::ChildStatus);
    b.education_level = value(Variable::EducationLevel);
    b.education_field = value(Variable::EducationField);
    b.employment = value(Variable::Employment);
    b.occupation = value(Variable::Occupation);
    b.industry = value(Variable::Industry);
    b.workplace = value(Variable::WorkplaceMunicipality);
    b.labor_market_region = value(Variable::LaborMarketRegion);
    b.income_percentile = r.income_percentile;
    b.income_source = value(Variable::IncomeSource);
    b.government_support = value(Variable::GovernmentSupport);
    return b;
}

MobilityLabel compute_label(const PersonHistory& history, int split_year) {
    const auto records = sorted_until(history, split_year + 4);
    MobilityLabel label{history.person_id, false, {split_year + 1, split_year + 4}};
    const bool has_before = !records.empty() && records.front()->year <= split_year;
    const bool has_inside = !records.empty() && records.back()->year > split_year;
    if (!has_before || !has_inside) {
        throw LabelUndefinedError("person " + history.person_id + " needs records both at or before " +
                                  std::to_string(split_year) + " and in " + std::to_string(split_year + 1) + "-" +
                                  std::to_string(split_year + 4));
    }
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i]->year > split_year && records[i]->residence != records[i - 1]->residence) {
            label.moved = true;
            break;
        }
    }
    return label;
}

Trajectory build_trajectory(const PersonHistory& history, const Codebook& codebook, int split_year,
                            const TrajectoryOptions& options) {
    Trajectory t;
    t.person_id = history.person_id;
    t.baseline = build_baseline(history, codebook, split_year, options);
    t.events = detect_events(history, codebook, split_year, options);
    t.window = {t.baseline.year, split_year};
    return t;
}

Trajectory build_static_only(const PersonHistory& history, const Codebook& codebook, int split_year,
                             const TrajectoryOptions& options) {
    Trajectory t;
    t.person_id = history.person_id;
    t.baseline = build_baseline(history, codebook, split_year, options);
    t.window = {t.baseline.year, split_year};
    return t;
}

void save_trajectories(const std::filesystem::path& path, const std::vector<LabeledTrajectory>& items) {
    AtomicFile file(path);
    for (const auto& [t, label] : items) {
        const BaselineProfile& b = t.baseline;
        ordered_json base{
            {"year", b.year},
            {"sex", coded_json(b.sex)},
            {"age", b.age},
            {"residence", coded_json(b.residence)},
            {"family_relation", coded_json(b.family_relation)},
            {"child_status", coded_json(b.child_status)},
            {"education_level", coded_json(b.education_level)},
            {"education_field", coded_json(b.education_field)},
            {"employment", coded_json(b.employment)},
            {"occupation", coded_json(b.occupation)},
            {"industry", coded_json(b.industry)},
            {"workplace", coded_json(b.workplace)},
            {"labor_market_region", coded_json(b.labor_market_region)},
            {"income_percentile", b.income_percentile},
            {"income_source", coded_json(b.income_source)},
            {"government_support", coded_json(b.government_support)},
        };
        ordered_json events = ordered_json::array();
        for (const auto& e : t.events) {
            events.push_back(ordered_json{
                {"year", e.year}, {"kind", event_kind_name(e.kind)}, {"from", e.from_value}, {"to", e.to_value}});
        }
        ordered_json line{
            {"id", t.person_id},
            {"window", {t.window.from, t.window.to}},
            {"baseline", std::move(base)},
            {"events", std::move(events)},
            {"label", {{"moved", label.moved}, {"window", {label.window.from, label.window.to}}}},
        };
        file.stream() << line.dump() << '\n';
    }
    file.commit();
}

std::vector<LabeledTrajectory> load_trajectories(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::vector<LabeledTrajectory> out;
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
            const auto j = ordered_json::parse(line);
            LabeledTrajectory item;
            Trajectory& t = item.trajectory;
            t.person_id = j.at("id").get<std::string>();
            t.window = {j.at("window").at(0).get<int>(), j.at("window").at(1).get<int>()};
            const auto& b = j.at("baseline");
            t.baseline.year = b.at("year").get<int>();
            t.baseline.sex = coded_from_json(b.at("sex"));
            t.baseline.age = b.at("age").get<int>();
            t.baseline.residence = coded_from_json(b.at("residence"));
            t.baseline.family_relation = coded_from_json(b.at("family_relation"));
            t.baseline.child_status = coded_from_json(b.at("child_status"));
            t.baseline.education_level = coded_from_json(b.at("education_level"));
            t.baseline.education_field = coded_from_json(b.at("education_field"));
            t.baseline.employment = coded_from_json(b.at("employment"));
            t.baseline.occupation = coded_from_json(b.at("occupation"));
            t.baseline.industry = coded_from_json(b.at("industry"));
            t.baseline.workplace = coded_from_json(b.at("workplace"));
            t.baseline.labor_market_region = coded_from_json(b.at("labor_market_region"));
            t.baseline.income_percentile = b.at("income_percentile").get<int>();
            t.baseline.income_source = coded_from_json(b.at("income_source"));
            t.baseline.government_support = coded_from_json(b.at("government_support"));
            for (const auto& e : j.at("events")) {
                const auto kind = parse_event_kind(e.at("kind").get<std::string>());
                if (!kind) {
                    throw ParseError(path.string(), line_no, 1, "unknown event kind");
                }
                t.events.push_back(LifeEvent{e.at("year").get<int>(), *kind, e.at("from").get<std::string>(),
                                             e.at("to").get<std::string>()});
            }
            const auto& l = j.at("label");
            item.label = MobilityLabel{t.person_id, l.at("moved").get<bool>(),
                                       {l.at("window").at(0).get<int>(), l.at("window").at(1).get<int>()}};
            out.push_back(std::move(item));
        } catch (const ordered_json::parse_error& e) {
            throw ParseError(path.string(), line_no, e.byte == 0 ? 1 : e.byte, "invalid JSON");
        } catch (const ordered_json::exception& e) {
            throw ParseError(path.string(), line_no, 1, e.what());
        }
    }
    return out;
}

} // namespace lifetraj
