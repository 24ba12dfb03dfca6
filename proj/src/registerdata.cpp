#include "lifetraj/registerdata.hpp"

#include "lifetraj/io.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace lifetraj {

namespace {

using nlohmann::json;

enum Column : std::size_t {
    kPersonId,
    kYear,
    kSex,
    kAge,
    kResMun,
    kFamilyRel,
    kChildStatus,
    kEduLevel,
    kEduField,
    kEmployment,
    kOccupation,
    kOccupationScheme,
    kIndustry,
    kIndustryScheme,
    kWorkMun,
    kLmaRegion,
    kIncomePct,
    kIncomeSource,
    kGovSupport,
    kColumnCount,
};

constexpr std::array<std::string_view, kColumnCount> kColumnNames = {
    "person_id",  "year",       "sex",          "age",         "res_mun",     "family_rel",      "child_status",
    "edu_level",  "edu_field",  "employment",   "occupation",  "occupation_scheme", "industry", "industry_scheme",
    "work_mun",   "lma_region", "income_pct",   "income_source", "gov_support",
};

struct Field {
    std::string text;
    std::size_t column = 1;
};

// RFC 4180-style split of one line; quoted fields may contain commas and "".
std::vector<Field> split_csv_line(std::string_view line, const std::string& source, std::size_t line_no) {
    std::vector<Field> out;
    std::size_t i = 0;
    while (true) {
        Field f;
        f.column = i + 1;
        if (i < line.size() && line[i] == '"') {
            ++i;
            bool closed = false;
            while (i < line.size()) {
                if (line[i] == '"') {
                    if (i + 1 < line.size() && line[i + 1] == '"') {
                        f.text += '"';
                        i += 2;
                        continue;
                    }
                    closed = true;
                    ++i;
                    break;
                }
                f.text += line[i++];
            }
            if (!closed) {
                throw ParseError(source, line_no, f.column, "unterminated quoted field");
            }
            if (i < line.size() && line[i] != ',') {
                throw ParseError(source, line_no, i + 1, "unexpected character after quoted field");
            }
        } else {
            const auto comma = line.find(',', i);
            const std::size_t end = comma == std::string_view::npos ? line.size() : comma;
            f.text = std::string(line.substr(i, end - i));
            i = end;
        }
        out.push_back(std::move(f));
        if (i >= line.size()) {
            break;
        }
        ++i;  // skip comma
        if (i == line.size()) {
            out.push_back(Field{"", i + 1});
            break;
        }
    }
    return out;
}

int to_int(const Field& f, const std::string& source, std::size_t line_no, std::string_view name) {
    int v = 0;
    const char* end = f.text.data() + f.text.size();
    const auto [ptr, ec] = std::from_chars(f.text.data(), end, v);
    if (f.text.empty() || ec != std::errc() || ptr != end) {
        throw ParseError(source, line_no, f.column, "expected integer for " + std::string(name));
    }
    return v;
}

bool to_bool(const Field& f, const std::string& source, std::size_t line_no) {
    if (f.text == "1" || f.text == "true") {
        return true;
    }
    if (f.text == "0" || f.text == "false") {
        return false;
    }
    throw ParseError(source, line_no, f.column, "expected 0/1 for gov_support");
}

struct Grouper {
    std::vector<PersonHistory> histories;
    std::unordered_map<std::string, std::size_t> index;

    void add(const std::string& id, AnnualRecord rec) {
        auto [it, inserted] = index.emplace(id, histories.size());
        if (inserted) {
            histories.push_back(PersonHistory{id, {}});
        }
        histories[it->second].records.push_back(std::move(rec));
    }

    std::vector<PersonHistory> finish() {
        for (auto& h : histories) {
            std::stable_sort(h.records.begin(), h.records.end(),
                             [](const AnnualRecord& a, const AnnualRecord& b) { return a.year < b.year; });
        }
        return std::move(histories);
    }
};

void parse_csv(std::string_view text, const std::string& source, Grouper& grouper) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    std::array<std::size_t, kColumnCount> slot{};
    std::size_t n_header = 0;
    bool header_seen = false;
    if (text.substr(0, 3) == "\xEF\xBB\xBF") {
        pos = 3;
    }
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty()) {
            continue;
        }
        auto fields = split_csv_line(line, source, line_no);
        if (!header_seen) {
            slot.fill(kColumnCount);
            n_header = fields.size();
            for (std::size_t i = 0; i < fields.size(); ++i) {
                const auto it = std::find(kColumnNames.begin(), kColumnNames.end(), fields[i].text);
                if (it == kColumnNames.end()) {
                    throw ParseError(source, line_no, fields[i].column, "unknown column '" + fields[i].text + "'");
                }
                const auto c = static_cast<std::size_t>(it - kColumnNames.begin());
                if (slot[c] != kColumnCount) {
                    throw ParseError(source, line_no, fields[i].column, "duplicate column '" + fields[i].text + "'");
                }
                slot[c] = i;
            }
            for (std::size_t c = 0; c < kColumnCount; ++c) {
                if (slot[c] == kColumnCount) {
                    throw ParseError(source, line_no, 1, "missing column '" + std::string(kColumnNames[c]) + "'");
                }
            }
            header_seen = true;
            continue;
        }
        if (fields.size() != n_header) {
            throw ParseError(source, line_no, line.size() + 1,
                             "expected " + std::to_string(n_header) + " fields, found " + std::to_string(fields.size()));
        }
        auto get = [&](Column c) -> const Field& { return fields[slot[c]]; };
        auto num = [&](Column c) { return to_int(get(c), source, line_no, kColumnNames[c]); };
        AnnualRecord r;
        r.year = num(kYear);
        r.sex = num(kSex);
        r.age = num(kAge);
        r.residence = num(kResMun);
        r.family_relation = num(kFamilyRel);
        r.child_status = num(kChildStatus);
        r.education_level = num(kEduLevel);
        r.education_field = num(kEduField);
        r.employment = num(kEmployment);
        r.occupation = num(kOccupation);
        r.occupation_scheme = get(kOccupationScheme).text;
        r.industry = num(kIndustry);
        r.industry_scheme = get(kIndustryScheme).text;
        r.workplace = num(kWorkMun);
        r.labor_market_region = num(kLmaRegion);
        r.income_percentile = num(kIncomePct);
        r.income_source = num(kIncomeSource);
        r.government_support = to_bool(get(kGovSupport), source, line_no);
        if (get(kPersonId).text.empty()) {
            throw ParseError(source, line_no, get(kPersonId).column, "empty person_id");
        }
        grouper.add(get(kPersonId).text, std::move(r));
    }
}

void parse_jsonl(std::string_view text, const std::string& source, Grouper& grouper) {
    std::size_t pos = 0;
    std::size_t line_no = 0;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) {
            eol = text.size();
        }
        std::string_view line = text.substr(pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.find_first_not_of(" \t") == std::string_view::npos) {
            continue;
        }
        json obj;
        try {
            obj = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(source, line_no, e.byte == 0 ? 1 : e.byte, "invalid JSON");
        }
        if (!obj.is_object()) {
            throw ParseError(source, line_no, 1, "expected a JSON object");
        }
        auto column_of = [&](std::string_view key) -> std::size_t {
            const std::string needle = "\"" + std::string(key) + "\"";
            const auto at = line.find(needle);
            return at == std::string_view::npos ? 1 : at + 1;
        };
        auto member = [&](Column c) -> const json& {
            const auto it = obj.find(std::string(kColumnNames[c]));
            if (it == obj.end()) {
                throw ParseError(source, line_no, 1, "missing key '" + std::string(kColumnNames[c]) + "'");
            }
            return *it;
        };
        auto num = [&](Column c) -> int {
            const json& v = member(c);
            if (!v.is_number_integer()) {
                throw ParseError(source, line_no, column_of(kColumnNames[c]),
                                 "expected integer for " + std::string(kColumnNames[c]));
            }
            return v.get<int>();
        };
        auto str = [&](Column c) -> std::string {
            const json& v = member(c);
            if (v.is_string()) {
                return v.get<std::string>();
            }
            if (v.is_number_integer()) {
                return std::to_string(v.get<long long>());
            }
            throw ParseError(source, line_no, column_of(kColumnNames[c]),
                             "expected string for " + std::string(kColumnNames[c]));
        };
        AnnualRecord r;
        r.year = num(kYear);
        r.sex = num(kSex);
        r.age = num(kAge);
        r.residence = num(kResMun);
        r.family_relation = num(kFamilyRel);
        r.child_status = num(kChildStatus);
        r.education_level = num(kEduLevel);
        r.education_field = num(kEduField);
        r.employment = num(kEmployment);
        r.occupation = num(kOccupation);
        r.occupation_scheme = str(kOccupationScheme);
        r.industry = num(kIndustry);
        r.industry_scheme = str(kIndustryScheme);
        r.workplace = num(kWorkMun);
        r.labor_market_region = num(kLmaRegion);
        r.income_percentile = num(kIncomePct);
        r.income_source = num(kIncomeSource);
        const json& gov = member(kGovSupport);
        if (gov.is_boolean()) {
            r.government_support = gov.get<bool>();
        } else if (gov.is_number_integer() && (gov.get<int>() == 0 || gov.get<int>() == 1)) {
            r.government_support = gov.get<int>() == 1;
        } else {
            throw ParseError(source, line_no, column_of("gov_support"), "expected boolean for gov_support");
        }
        const std::string id = str(kPersonId);
        if (id.empty()) {
            throw ParseError(source, line_no, column_of("person_id"), "empty person_id");
        }
        grouper.add(id, std::move(r));
    }
}

class IssueSink {
public:
    IssueSink(ValidationReport& report, bool fail_fast) : report_(report), fail_fast_(fail_fast) {}

    void add(const std::string& person, int year, std::string field, std::string message) {
        report_.issues.push_back({person, year, std::move(field), std::move(message)});
        if (fail_fast_) {
            throw RecordValidationError(report_);
        }
    }

private:
    ValidationReport& report_;
    bool fail_fast_;
};

void check_codes(const PersonHistory& h, const AnnualRecord& r, const Codebook& book, IssueSink& sink) {
    struct Coded {
        Variable var;
        std::string_view field;
        Code code;
        const std::string* tag;
    };
    const Coded coded[] = {
        {Variable::Sex, "sex", r.sex, nullptr},
        {Variable::Residence, "res_mun", r.residence, nullptr},
        {Variable::FamilyRelation, "family_rel", r.family_relation, nullptr},
        {Variable::ChildStatus, "child_status", r.child_status, nullptr},
        {Variable::EducationLevel, "edu_level", r.education_level, nullptr},
        {Variable::EducationField, "edu_field", r.education_field, nullptr},
        {Variable::Employment, "employment", r.employment, nullptr},
        {Variable::Occupation, "occupation", r.occupation, &r.occupation_scheme},
        {Variable::Industry, "industry", r.industry, &r.industry_scheme},
        {Variable::WorkplaceMunicipality, "work_mun", r.workplace, nullptr},
        {Variable::LaborMarketRegion, "lma_region", r.labor_market_region, nullptr},
        {Variable::IncomeSource, "income_source", r.income_source, nullptr},
        {Variable::GovernmentSupport, "gov_support", r.government_support ? 1 : 0, nullptr},
    };
    for (const auto& c : coded) {
        const std::string* scheme = nullptr;
        try {
            scheme = &book.resolve_scheme(c.var, r.year);
        } catch (const SchemeResolutionError& e) {
            sink.add(h.person_id, r.year, std::string(c.field), e.what());
            continue;
        }
        if (c.tag != nullptr && *c.tag != *scheme) {
            sink.add(h.person_id, r.year, std::string(c.field) + "_scheme",
                     "scheme tag '" + *c.tag + "' is not the active scheme " + *scheme);
            continue;
        }
        if (book.try_lookup(*scheme, r.year, c.code) == nullptr) {
            sink.add(h.person_id, r.year, std::string(c.field),
                     "code " + std::to_string(c.code) + " not in " + *scheme + " for " + std::to_string(r.year));
        }
    }
}

} // namespace

std::optional<RecordFormat> parse_record_format(std::string_view name) {
    if (name == "csv") {
        return RecordFormat::csv;
    }
    if (name == "jsonl") {
        return RecordFormat::jsonl;
    }
    return std::nullopt;
}

RecordFormat record_format_for(const std::filesystem::path& path) {
    return path.extension() == ".jsonl" ? RecordFormat::jsonl : RecordFormat::csv;
}

std::string ValidationReport::to_string() const {
    std::ostringstream out;
    for (const auto& i : issues) {
        out << "person " << i.person_id << ", year " << i.year << ", field " << i.field << ": " << i.message << '\n';
    }
    return out.str();
}

RecordValidationError::RecordValidationError(ValidationReport report)
    : ValidationError(std::to_string(report.issues.size()) + " record validation issue(s); first: " +
                      (report.issues.empty() ? std::string("none")
                                             : "person " + report.issues.front().person_id + ", year " +
                                                   std::to_string(report.issues.front().year) + ", field " +
                                                   report.issues.front().field + ": " + report.issues.front().message)),
      report_(std::move(report)) {}

ValidationReport validate_histories(const std::vector<PersonHistory>& histories, const LoadOptions& options) {
    ValidationReport report;
    IssueSink sink(report, options.fail_fast);
    for (const auto& h : histories) {
        for (std::size_t i = 0; i < h.records.size(); ++i) {
            const AnnualRecord& r = h.records[i];
            if (options.observation_span && !options.observation_span->contains(r.year)) {
                sink.add(h.person_id, r.year, "year",
                         "year outside observation span " + std::to_string(options.observation_span->from) + "-" +
                             std::to_string(options.observation_span->to));
            }
            if (r.income_percentile < 0 || r.income_percentile > 100) {
                sink.add(h.person_id, r.year, "income_pct",
                         "income percentile " + std::to_string(r.income_percentile) + " outside [0, 100]");
            }
            if (r.sex != 1 && r.sex != 2) {
                sink.add(h.person_id, r.year, "sex", "sex code must be 1 or 2");
            }
            if (r.child_status < 0 || r.child_status > 2) {
                sink.add(h.person_id, r.year, "child_status", "child status must be 0, 1 or 2");
            }
            if (r.age < 0) {
                sink.add(h.person_id, r.year, "age", "negative age");
            }
            if (i > 0) {
                const AnnualRecord& p = h.records[i - 1];
                if (r.year <= p.year) {
                    sink.add(h.person_id, r.year, "year", "duplicate record for year " + std::to_string(r.year));
                } else if (r.age - p.age != r.year - p.year) {
                    sink.add(h.person_id, r.year, "age",
                             "age-progression invariant violated: age " + std::to_string(r.age) + " in " +
                                 std::to_string(r.year) + " after age " + std::to_string(p.age) + " in " +
                                 std::to_string(p.year));
                }
                if (r.sex != p.sex) {
                    sink.add(h.person_id, r.year, "sex", "sex changes within a history");
                }
            }
            if (options.codebook != nullptr) {
                check_codes(h, r, *options.codebook, sink);
            }
        }
    }
    return report;
}

std::vector<PersonHistory> parse_records(std::string_view text, RecordFormat format, const std::string& source,
                                         const LoadOptions& options) {
    Grouper grouper;
    if (format == RecordFormat::csv) {
        parse_csv(text, source, grouper);
    } else {
        parse_jsonl(text, source, grouper);
    }
    auto histories = grouper.finish();
    ValidationReport report = validate_histories(histories, options);
    if (!report.ok()) {
        throw RecordValidationError(std::move(report));
    }
    return histories;
}

std::vector<PersonHistory> load_records(const std::filesystem::path& path, RecordFormat format,
                                        const LoadOptions& options) {
    return parse_records(read_file(path), format, path.string(), options);
}

void write_records(std::ostream& out, const std::vector<PersonHistory>& histories, RecordFormat format) {
    if (format == RecordFormat::csv) {
        for (std::size_t c = 0; c < kColumnCount; ++c) {
            out << (c ? "," : "") << kColumnNames[c];
        }
        out << '\n';
    }
    for (const auto& h : histories) {
        for (const auto& r : h.records) {
            if (format == RecordFormat::csv) {
                std::string id = h.person_id;
                if (id.find_first_of(",\"") != std::string::npos) {
                    std::string quoted = "\"";
                    for (char c : id) {
                        quoted += c == '"' ? std::string("\"\"") : std::string(1, c);
                    }
                    id = quoted + "\"";
                }
                out << id << ',' << r.year << ',' << r.sex << ',' << r.age << ',' << r.residence << ','
                    << r.family_relation << ',' << r.child_status << ',' << r.education_level << ','
                    << r.education_field << ',' << r.employment << ',' << r.occupation << ',' << r.occupation_scheme
                    << ',' << r.industry << ',' << r.industry_scheme << ',' << r.workplace << ','
                    << r.labor_market_region << ',' << r.income_percentile << ',' << r.income_source << ','
                    << (r.government_support ? 1 : 0) << '\n';
            } else {
                nlohmann::ordered_json o;
                o["person_id"] = h.person_id;
                o["year"] = r.year;
                o["sex"] = r.sex;
                o["age"] = r.age;
                o["res_mun"] = r.residence;
                o["family_rel"] = r.family_relation;
                o["child_status"] = r.child_status;
                o["edu_level"] = r.education_level;
                o["edu_field"] = r.education_field;
                o["employment"] = r.employment;
                o["occupation"] = r.occupation;
                o["occupation_scheme"] = r.occupation_scheme;
                o["industry"] = r.industry;
                o["industry_scheme"] = r.industry_scheme;
                o["work_mun"] = r.workplace;
                o["lma_region"] = r.labor_market_region;
                o["income_pct"] = r.income_percentile;
                o["income_source"] = r.income_source;
                o["gov_support"] = r.government_support ? 1 : 0;
                out << o.dump() << '\n';
            }
        }
    }
}

void save_records(const std::filesystem::path& path, const std::vector<PersonHistory>& histories,
                  RecordFormat format) {
    AtomicFile file(path);
    write_records(file.stream(), histories, format);
    file.commit();
}

bool in_cohort(const PersonHistory& history, int split_year) {
    if (history.records.empty()) {
        return false;
    }
    return history.records.front().year < split_year - 3 && history.records.back().year >= split_year + 2;
}

std::vector<PersonHistory> cohort_filter(const std::vector<PersonHistory>& histories, int split_year) {
    std::vector<PersonHistory> out;
    for (const auto& h : histories) {
        if (in_cohort(h, split_year)) {
            out.push_back(h);
        }
    }
    return out;
}

} // namespace lifetraj
