#include "lifetraj/codebook.hpp"

#include "lifetraj/io.hpp"

#include <algorithm>
#include <charconv>
#include <sstream>

namespace lifetraj {

namespace {

constexpr std::string_view kDictionaryHeader = "scheme_id\tvalid_from\tvalid_to\tcode\tdescription";
constexpr std::string_view kCrosswalkHeader = "from_scheme\tto_scheme\tfrom_code\tto_code";

struct VariableInfo {
    Variable variable;
    std::string_view name;
    std::initializer_list<std::string_view> default_schemes;
};

const VariableInfo kVariableInfo[] = {
    {Variable::Sex, "sex", {"SEX"}},
    {Variable::Residence, "residence", {"MUNICIPALITY"}},
    {Variable::FamilyRelation, "family_relation", {"FAMILY_REL"}},
    {Variable::ChildStatus, "child_status", {"CHILD_STATUS"}},
    {Variable::EducationLevel, "education_level", {"EDU_LEVEL"}},
    {Variable::EducationField, "education_field", {"EDU_FIELD"}},
    {Variable::Employment, "employment", {"EMPLOYMENT"}},
    {Variable::Occupation, "occupation", {"SSYK2001", "SSYK2014"}},
    {Variable::Industry, "industry", {"SNI2002", "SNI2007"}},
    {Variable::WorkplaceMunicipality, "workplace_municipality", {"MUNICIPALITY"}},
    {Variable::LaborMarketRegion, "labor_market_region", {"LMA_REGION"}},
    {Variable::IncomeSource, "income_source", {"INCOME_SOURCE"}},
    {Variable::GovernmentSupport, "government_support", {"GOV_SUPPORT"}},
};

std::vector<std::string_view> split_tabs(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto tab = line.find('\t', start);
        out.push_back(line.substr(start, tab == std::string_view::npos ? std::string_view::npos : tab - start));
        if (tab == std::string_view::npos) {
            break;
        }
        start = tab + 1;
    }
    return out;
}

// Column (1-based) where field `index` starts.
std::size_t column_of(const std::vector<std::string_view>& fields, std::size_t index) {
    std::size_t col = 1;
    for (std::size_t i = 0; i < index; ++i) {
        col += fields[i].size() + 1;
    }
    return col;
}

int parse_int_field(const std::string& source, std::size_t line, const std::vector<std::string_view>& fields,
                    std::size_t index, std::string_view what) {
    int v = 0;
    const auto f = fields[index];
    const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
    if (f.empty() || ec != std::errc() || ptr != f.data() + f.size()) {
        throw ParseError(source, line, column_of(fields, index), "expected integer " + std::string(what));
    }
    return v;
}

template <typename RowFn>
void read_tsv(const std::filesystem::path& path, std::string_view header, std::size_t columns, RowFn&& on_row) {
    const std::string text = read_file(path);
    const std::string source = path.string();
    std::size_t pos = 0;
    std::size_t line_no = 0;
    bool saw_header = false;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string::npos) {
            eol = text.size();
        }
        std::string_view line(text.data() + pos, eol - pos);
        pos = eol + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (line.empty() || line.front() == '#') {
            continue;
        }
        if (!saw_header) {
            if (line != header) {
                throw ParseError(source, line_no, 1, "expected header '" + std::string(header) + "'");
            }
            saw_header = true;
            continue;
        }
        const auto fields = split_tabs(line);
        if (fields.size() != columns) {
            throw ParseError(source, line_no, line.size() + 1,
                             "expected " + std::to_string(columns) + " tab-separated columns, found " +
                                 std::to_string(fields.size()));
        }
        on_row(source, line_no, fields);
    }
}

bool ends_with(std::string_view s, std::string_view suffix) {
    return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

} // namespace

std::string_view variable_name(Variable v) {
    for (const auto& info : kVariableInfo) {
        if (info.variable == v) {
            return info.name;
        }
    }
    return "unknown";
}

std::optional<Variable> parse_variable(std::string_view name) {
    for (const auto& info : kVariableInfo) {
        if (info.name == name) {
            return info.variable;
        }
    }
    return std::nullopt;
}

const std::set<Code>& crosswalk_map(const Crosswalk& crosswalk, Code code) {
    const auto it = crosswalk.mapping.find(code);
    if (it == crosswalk.mapping.end() || it->second.empty()) {
        throw UnmappedCodeError(crosswalk.from_scheme, crosswalk.to_scheme, code);
    }
    return it->second;
}

Crosswalk identity_crosswalk(const CodeDictionary& dictionary) {
    Crosswalk cw{dictionary.scheme_id, dictionary.scheme_id, {}};
    for (const auto& [code, _] : dictionary.entries) {
        cw.mapping[code] = {code};
    }
    return cw;
}

std::string CodebookReport::to_string() const {
    std::ostringstream out;
    for (const auto& line : coverage) {
        out << line << '\n';
    }
    if (issues.empty()) {
        out << "OK: no issues\n";
    } else {
        out << issues.size() << " issue(s):\n";
        for (const auto& issue : issues) {
            out << "  " << issue.where << ": " << issue.message << '\n';
        }
    }
    return out.str();
}

Codebook::Codebook() {
    for (const auto& info : kVariableInfo) {
        for (auto scheme : info.default_schemes) {
            bindings_[info.variable].emplace_back(scheme);
        }
    }
}

Codebook Codebook::load(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw IoError("codebook directory not found: " + dir.string());
    }
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files.push_back(entry.path());
        }
    }
    std::sort(files.begin(), files.end());

    Codebook book;
    for (const auto& path : files) {
        const std::string name = path.filename().string();
        if (ends_with(name, ".dict.tsv")) {
            std::map<std::tuple<std::string, int, int>, CodeDictionary> editions;
            read_tsv(path, kDictionaryHeader, 5, [&](const std::string& src, std::size_t line, const auto& f) {
                const int from = parse_int_field(src, line, f, 1, "valid_from");
                const int to = parse_int_field(src, line, f, 2, "valid_to");
                const Code code = parse_int_field(src, line, f, 3, "code");
                if (f[0].empty()) {
                    throw ParseError(src, line, 1, "empty scheme_id");
                }
                if (from > to) {
                    throw ParseError(src, line, column_of(f, 1), "valid_from after valid_to");
                }
                auto& dict = editions[{std::string(f[0]), from, to}];
                dict.scheme_id = std::string(f[0]);
                dict.valid_years = {from, to};
                const std::string where = src + ":" + std::to_string(line);
                if (f[4].empty()) {
                    book.load_issues_.push_back({where, "empty description for code " + std::to_string(code)});
                }
                if (!dict.entries.emplace(code, std::string(f[4])).second) {
                    book.load_issues_.push_back(
                        {where, "duplicate code " + std::to_string(code) + " in scheme " + dict.scheme_id});
                }
            });
            for (auto& [_, dict] : editions) {
                book.add_dictionary(std::move(dict));
            }
        } else if (ends_with(name, ".xwalk.tsv")) {
            std::map<std::pair<std::string, std::string>, Crosswalk> walks;
            read_tsv(path, kCrosswalkHeader, 4, [&](const std::string& src, std::size_t line, const auto& f) {
                const Code from = parse_int_field(src, line, f, 2, "from_code");
                const Code to = parse_int_field(src, line, f, 3, "to_code");
                auto& cw = walks[{std::string(f[0]), std::string(f[1])}];
                cw.from_scheme = std::string(f[0]);
                cw.to_scheme = std::string(f[1]);
                cw.mapping[from].insert(to);
            });
            for (auto& [_, cw] : walks) {
                book.add_crosswalk(std::move(cw));
            }
        }
    }
    return book;
}

void Codebook::add_dictionary(CodeDictionary dictionary) {
    editions_[dictionary.scheme_id].push_back(dictionaries_.size());
    dictionaries_.push_back(std::move(dictionary));
}

void Codebook::add_crosswalk(Crosswalk crosswalk) { crosswalks_.push_back(std::move(crosswalk)); }

void Codebook::bind(Variable variable, std::string scheme_id) {
    auto& schemes = bindings_[variable];
    if (std::find(schemes.begin(), schemes.end(), scheme_id) == schemes.end()) {
        schemes.push_back(std::move(scheme_id));
    }
}

const CodeDictionary& Codebook::dictionary(std::string_view scheme_id, int year) const {
    const auto it = editions_.find(scheme_id);
    if (it == editions_.end()) {
        throw SchemeResolutionError(std::string(scheme_id), year, "unknown scheme " + std::string(scheme_id));
    }
    for (std::size_t idx : it->second) {
        if (dictionaries_[idx].valid_years.contains(year)) {
            return dictionaries_[idx];
        }
    }
    throw SchemeResolutionError(std::string(scheme_id), year,
                                "scheme " + std::string(scheme_id) + " is not active in " + std::to_string(year));
}

const std::string* Codebook::try_lookup(std::string_view scheme_id, int year, Code code) const {
    const auto it = editions_.find(scheme_id);
    if (it == editions_.end()) {
        return nullptr;
    }
    for (std::size_t idx : it->second) {
        if (dictionaries_[idx].valid_years.contains(year)) {
            return dictionaries_[idx].find(code);
        }
    }
    return nullptr;
}

const std::string& Codebook::lookup(std::string_view scheme_id, int year, Code code) const {
    const CodeDictionary& dict = dictionary(scheme_id, year);
    const std::string* desc = dict.find(code);
    if (desc == nullptr) {
        throw UnknownCodeError(std::string(scheme_id), year, code);
    }
    return *desc;
}

const std::string& Codebook::resolve_scheme(Variable variable, int year) const {
    const auto it = bindings_.find(variable);
    const std::string* found = nullptr;
    if (it != bindings_.end()) {
        for (const auto& scheme : it->second) {
            const auto ed = editions_.find(scheme);
            if (ed == editions_.end()) {
                continue;
            }
            for (std::size_t idx : ed->second) {
                if (!dictionaries_[idx].valid_years.contains(year)) {
                    continue;
                }
                if (found != nullptr && *found != scheme) {
                    throw SchemeResolutionError(scheme, year,
                                                "more than one active scheme for " +
                                                    std::string(variable_name(variable)) + " in " +
                                                    std::to_string(year) + ": " + *found + ", " + scheme);
                }
                found = &scheme;
            }
        }
    }
    if (found == nullptr) {
        throw SchemeResolutionError("", year,
                                    "no active scheme for " + std::string(variable_name(variable)) + " in " +
                                        std::to_string(year));
    }
    return *found;
}

std::vector<std::string> Codebook::schemes_for(Variable variable) const {
    const auto it = bindings_.find(variable);
    return it == bindings_.end() ? std::vector<std::string>{} : it->second;
}

const Crosswalk* Codebook::crosswalk_from(std::string_view from_scheme) const {
    for (const auto& cw : crosswalks_) {
        if (cw.from_scheme == from_scheme && cw.to_scheme != from_scheme) {
            return &cw;
        }
    }
    return nullptr;
}

const Crosswalk& Codebook::crosswalk(std::string_view from_scheme, std::string_view to_scheme) const {
    for (const auto& cw : crosswalks_) {
        if (cw.from_scheme == from_scheme && cw.to_scheme == to_scheme) {
            return cw;
        }
    }
    throw SchemeResolutionError(std::string(from_scheme), 0,
                                "no crosswalk from " + std::string(from_scheme) + " to " + std::string(to_scheme));
}

HarmonizedLabel Codebook::harmonize(std::string_view scheme_id, int year, Code code) const {
    HarmonizedLabel out;
    out.description = lookup(scheme_id, year, code);
    out.scheme = std::string(scheme_id);

    std::set<Code> current{code};
    std::string scheme(scheme_id);
    std::set<std::string> visited{scheme};
    while (const Crosswalk* cw = crosswalk_from(scheme)) {
        if (!visited.insert(cw->to_scheme).second) {
            break;
        }
        std::set<Code> next;
        for (Code c : current) {
            const auto& targets = crosswalk_map(*cw, c);
            next.insert(targets.begin(), targets.end());
        }
        current = std::move(next);
        scheme = cw->to_scheme;
    }
    if (scheme == scheme_id) {
        return out;
    }

    // Newest edition of the target scheme.
    const auto ed = editions_.find(scheme);
    if (ed == editions_.end()) {
        throw SchemeResolutionError(scheme, year, "crosswalk target scheme " + scheme + " has no dictionary");
    }
    const CodeDictionary* newest = nullptr;
    for (std::size_t idx : ed->second) {
        if (newest == nullptr || dictionaries_[idx].valid_years.to > newest->valid_years.to) {
            newest = &dictionaries_[idx];
        }
    }
    std::optional<std::string> shared;
    bool unique = true;
    for (Code c : current) {
        const std::string* d = newest->find(c);
        if (d == nullptr) {
            throw UnknownCodeError(scheme, newest->valid_years.from, c);
        }
        if (!shared) {
            shared = *d;
        } else if (*shared != *d) {
            unique = false;
        }
    }
    out.scheme = scheme;
    out.targets = std::move(current);
    // A one-to-many split with distinct target labels cannot be re-labelled
    // without guessing, so the original description is kept.
    if (unique && shared) {
        out.description = *shared;
    }
    return out;
}

CodebookReport Codebook::validate() const {
    CodebookReport report;
    report.issues = load_issues_;

    for (const auto& dict : dictionaries_) {
        report.coverage.push_back("dictionary " + dict.scheme_id + " [" + std::to_string(dict.valid_years.from) + "-" +
                                  std::to_string(dict.valid_years.to) + "]: " + std::to_string(dict.entries.size()) +
                                  " codes");
        for (const auto& [code, desc] : dict.entries) {
            if (desc.empty()) {
                report.issues.push_back({dict.scheme_id, "empty description for code " + std::to_string(code)});
            }
        }
    }

    // Exactly one active scheme per variable and year across the bound span.
    for (const auto& [variable, schemes] : bindings_) {
        std::vector<std::pair<YearRange, std::string>> ranges;
        for (const auto& scheme : schemes) {
            const auto ed = editions_.find(scheme);
            if (ed == editions_.end()) {
                continue;
            }
            for (std::size_t idx : ed->second) {
                ranges.emplace_back(dictionaries_[idx].valid_years, scheme);
            }
        }
        const std::string var(variable_name(variable));
        if (ranges.empty()) {
            report.issues.push_back({var, "no dictionary loaded for any bound scheme"});
            continue;
        }
        std::sort(ranges.begin(), ranges.end(),
                  [](const auto& a, const auto& b) { return a.first.from < b.first.from; });
        for (std::size_t i = 1; i < ranges.size(); ++i) {
            const auto& prev = ranges[i - 1];
            const auto& cur = ranges[i];
            if (prev.first.overlaps(cur.first)) {
                report.issues.push_back({var, "schemes " + prev.second + " and " + cur.second + " both active in " +
                                                  std::to_string(cur.first.from)});
            } else if (cur.first.from != prev.first.to + 1) {
                report.issues.push_back({var, "no active scheme between " + std::to_string(prev.first.to) + " and " +
                                                  std::to_string(cur.first.from)});
            }
        }
    }

    for (const auto& cw : crosswalks_) {
        const std::string where = "crosswalk " + cw.from_scheme + "->" + cw.to_scheme;
        auto collect = [&](const std::string& scheme) {
            std::set<Code> codes;
            const auto ed = editions_.find(scheme);
            if (ed != editions_.end()) {
                for (std::size_t idx : ed->second) {
                    for (const auto& [code, _] : dictionaries_[idx].entries) {
                        codes.insert(code);
                    }
                }
            }
            return codes;
        };
        if (editions_.find(cw.from_scheme) == editions_.end()) {
            report.issues.push_back({where, "source scheme " + cw.from_scheme + " has no dictionary"});
            continue;
        }
        if (editions_.find(cw.to_scheme) == editions_.end()) {
            report.issues.push_back({where, "target scheme " + cw.to_scheme + " has no dictionary"});
            continue;
        }
        const std::set<Code> source_codes = collect(cw.from_scheme);
        const std::set<Code> target_codes = collect(cw.to_scheme);

        std::vector<Code> missing;
        std::vector<Code> extra;
        std::size_t pairs = 0;
        for (Code c : source_codes) {
            const auto it = cw.mapping.find(c);
            if (it == cw.mapping.end() || it->second.empty()) {
                missing.push_back(c);
            }
        }
        for (const auto& [from, targets] : cw.mapping) {
            if (!source_codes.count(from)) {
                extra.push_back(from);
            }
            pairs += targets.size();
            for (Code t : targets) {
                if (!target_codes.count(t)) {
                    report.issues.push_back({where, "target code " + std::to_string(t) + " (from " +
                                                        std::to_string(from) + ") not in " + cw.to_scheme});
                }
            }
        }
        auto join = [](const std::vector<Code>& codes) {
            std::string s;
            for (Code c : codes) {
                s += (s.empty() ? "" : ", ") + std::to_string(c);
            }
            return s;
        };
        if (!missing.empty()) {
            report.issues.push_back({where, "source codes without mapping: " + join(missing)});
        }
        if (!extra.empty()) {
            report.issues.push_back({where, "mapped codes absent from " + cw.from_scheme + ": " + join(extra)});
        }
        report.coverage.push_back(where + ": " + std::to_string(source_codes.size() - missing.size()) + "/" +
                                  std::to_string(source_codes.size()) + " source codes mapped, " +
                                  std::to_string(pairs) + " pairs");
    }
    return report;
}

} // namespace lifetraj
