#pragma once

#include "lifetraj/error.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace lifetraj {

using Code = std::int32_t;

struct YearRange {
    int from = 0;
    int to = 0;

    bool contains(int year) const noexcept { return year >= from && year <= to; }
    bool overlaps(const YearRange& o) const noexcept { return from <= o.to && o.from <= to; }

    bool operator==(const YearRange&) const = default;
};

// Coded register variables that are rendered through a dictionary. Residence
// and workplace share the municipality scheme but are distinct variables.
enum class Variable {
    Sex,
    Residence,
    FamilyRelation,
    ChildStatus,
    EducationLevel,
    EducationField,
    Employment,
    Occupation,
    Industry,
    WorkplaceMunicipality,
    LaborMarketRegion,
    IncomeSource,
    GovernmentSupport,
};

inline constexpr Variable kAllVariables[] = {
    Variable::Sex,        Variable::Residence,  Variable::FamilyRelation,        Variable::ChildStatus,
    Variable::EducationLevel, Variable::EducationField, Variable::Employment,    Variable::Occupation,
    Variable::Industry,   Variable::WorkplaceMunicipality, Variable::LaborMarketRegion, Variable::IncomeSource,
    Variable::GovernmentSupport,
};

std::string_view variable_name(Variable v);
std::optional<Variable> parse_variable(std::string_view name);

class SchemeResolutionError : public Error {
public:
    SchemeResolutionError(std::string scheme, int year, const std::string& message)
        : Error(message), scheme_(std::move(scheme)), year_(year) {}

    const std::string& scheme() const noexcept { return scheme_; }
    int year() const noexcept { return year_; }

private:
    std::string scheme_;
    int year_;
};

class UnknownCodeError : public Error {
public:
    UnknownCodeError(std::string scheme, int year, Code code)
        : Error("unknown code " + std::to_string(code) + " in scheme " + scheme + " for year " + std::to_string(year)),
          scheme_(std::move(scheme)), year_(year), code_(code) {}

    const std::string& scheme() const noexcept { return scheme_; }
    int year() const noexcept { return year_; }
    Code code() const noexcept { return code_; }

private:
    std::string scheme_;
    int year_;
    Code code_;
};

class UnmappedCodeError : public Error {
public:
    UnmappedCodeError(std::string from_scheme, std::string to_scheme, Code code)
        : Error("code " + std::to_string(code) + " of " + from_scheme + " has no mapping to " + to_scheme),
          from_scheme_(std::move(from_scheme)), code_(code) {}

    const std::string& from_scheme() const noexcept { return from_scheme_; }
    Code code() const noexcept { return code_; }

private:
    std::string from_scheme_;
    Code code_;
};

struct CodeDictionary {
    std::string scheme_id;
    YearRange valid_years;
    std::map<Code, std::string> entries;

    const std::string* find(Code code) const {
        const auto it = entries.find(code);
        return it == entries.end() ? nullptr : &it->second;
    }
};

struct Crosswalk {
    std::string from_scheme;
    std::string to_scheme;
    std::map<Code, std::set<Code>> mapping;
};

// Full target set for `code`; std::set keeps the ascending serialisation order.
const std::set<Code>& crosswalk_map(const Crosswalk& crosswalk, Code code);
Crosswalk identity_crosswalk(const CodeDictionary& dictionary);

struct CodebookIssue {
    std::string where;
    std::string message;
};

struct CodebookReport {
    std::vector<CodebookIssue> issues;
    std::vector<std::string> coverage;  // one human-readable line per dictionary/crosswalk

    bool ok() const noexcept { return issues.empty(); }
    std::string to_string() const;
};

// Description of a code re-labelled into the newest revision of its scheme
// (following crosswalks transitively). `targets` is empty when the scheme has
// no outgoing crosswalk.
struct HarmonizedLabel {
    std::string description;
    std::string scheme;
    std::set<Code> targets;
};

class Codebook {
public:
    Codebook();

    // Reads every *.dict.tsv and *.xwalk.tsv in `dir` (sorted by file name).
    static Codebook load(const std::filesystem::path& dir);

    void add_dictionary(CodeDictionary dictionary);
    void add_crosswalk(Crosswalk crosswalk);
    void bind(Variable variable, std::string scheme_id);

    const std::string& lookup(std::string_view scheme_id, int year, Code code) const;
    const std::string* try_lookup(std::string_view scheme_id, int year, Code code) const;
    const CodeDictionary& dictionary(std::string_view scheme_id, int year) const;
    const std::string& resolve_scheme(Variable variable, int year) const;

    const Crosswalk* crosswalk_from(std::string_view from_scheme) const;
    const Crosswalk& crosswalk(std::string_view from_scheme, std::string_view to_scheme) const;

    HarmonizedLabel harmonize(std::string_view scheme_id, int year, Code code) const;

    const std::vector<CodeDictionary>& dictionaries() const noexcept { return dictionaries_; }
    const std::vector<Crosswalk>& crosswalks() const noexcept { return crosswalks_; }
    std::vector<std::string> schemes_for(Variable variable) const;

    // Structural checks: duplicate codes, empty descriptions, overlapping or
    // missing editions per variable, crosswalk codes that do not exist, and
    // crosswalk source coverage against the source dictionary.
    CodebookReport validate() const;

private:
    std::vector<CodeDictionary> dictionaries_;
    std::vector<Crosswalk> crosswalks_;
    std::map<std::string, std::vector<std::size_t>, std::less<>> editions_;
    std::map<Variable, std::vector<std::string>> bindings_;
    std::vector<CodebookIssue> load_issues_;
};

} // namespace lifetraj
