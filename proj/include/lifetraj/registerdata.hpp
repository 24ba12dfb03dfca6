#pragma once

#include "lifetraj/codebook.hpp"
#include "lifetraj/error.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifetraj {

// One coded register row. The owning PersonHistory carries the person id.
struct AnnualRecord {
    int year = 0;
    Code sex = 0;  // 1 male, 2 female
    int age = 0;
    Code residence = 0;
    Code family_relation = 0;
    Code child_status = 0;  // 0 none, 1 children, 2 grown up
    Code education_level = 0;
    Code education_field = 0;
    Code employment = 0;
    Code occupation = 0;
    std::string occupation_scheme;
    Code industry = 0;
    std::string industry_scheme;
    Code workplace = 0;
    Code labor_market_region = 0;
    int income_percentile = 0;
    Code income_source = 0;
    bool government_support = false;

    bool operator==(const AnnualRecord&) const = default;
};

struct PersonHistory {
    std::string person_id;
    std::vector<AnnualRecord> records;  // strictly increasing years, gaps allowed

    bool operator==(const PersonHistory&) const = default;
};

struct SynthConfig {
    std::size_t population_size = 10000;
    int first_year = 2001;
    int last_year = 2017;
    int split_year = 2013;
    std::uint64_t seed = 0;
    std::size_t n_municipalities = 100;
    // Per-year probability of a residential move before modifiers. Replaced by
    // the calibrated value when target_mover_share is set.
    double base_move_hazard = 0.02;
    // Hazard multiplier per decade of age below 40 (applied continuously).
    double age_effect = 4.0;
    // Hazard multiplier while child_status == 1.
    double children_effect = 0.5;
    std::optional<double> target_mover_share = 0.136;
    // Standard deviation of the log of a per-person mean-one mobility propensity.
    double mobility_heterogeneity = 0.8;

    void validate() const;
};

struct GenerationReport {
    double move_hazard = 0.0;  // base hazard actually used
    std::size_t cohort_size = 0;
    double mover_share = 0.0;  // share of the cohort with a residence change in (split, split + 4]
};

struct Population {
    std::vector<PersonHistory> persons;
    GenerationReport report;
};

// Deterministic for a fixed config. Codes are drawn from `codebook`, so every
// emitted code resolves there for its year.
Population generate_population(const SynthConfig& config, const Codebook& codebook);

enum class RecordFormat { csv, jsonl };

std::optional<RecordFormat> parse_record_format(std::string_view name);
RecordFormat record_format_for(const std::filesystem::path& path);

struct ValidationIssue {
    std::string person_id;
    int year = 0;
    std::string field;
    std::string message;
};

struct ValidationReport {
    std::vector<ValidationIssue> issues;

    bool ok() const noexcept { return issues.empty(); }
    std::string to_string() const;
};

class RecordValidationError : public ValidationError {
public:
    explicit RecordValidationError(ValidationReport report);

    const ValidationReport& report() const noexcept { return report_; }

private:
    ValidationReport report_;
};

struct LoadOptions {
    std::optional<YearRange> observation_span;
    // When set, every coded field must resolve under the year's active scheme.
    const Codebook* codebook = nullptr;
    bool fail_fast = false;
};

// Groups rows by person_id (first-appearance order) and sorts each person's
// rows by year. Syntax problems throw ParseError; invariant violations throw
// RecordValidationError carrying every issue found (or the first one when
// fail_fast is set).
std::vector<PersonHistory> load_records(const std::filesystem::path& path, RecordFormat format,
                                        const LoadOptions& options = {});
std::vector<PersonHistory> parse_records(std::string_view text, RecordFormat format, const std::string& source,
                                         const LoadOptions& options = {});

ValidationReport validate_histories(const std::vector<PersonHistory>& histories, const LoadOptions& options = {});

void write_records(std::ostream& out, const std::vector<PersonHistory>& histories, RecordFormat format);
void save_records(const std::filesystem::path& path, const std::vector<PersonHistory>& histories,
                  RecordFormat format);

// Keeps persons first observed before split_year - 3 and still observed at
// split_year + 2 or later.
std::vector<PersonHistory> cohort_filter(const std::vector<PersonHistory>& histories, int split_year);
bool in_cohort(const PersonHistory& history, int split_year);

} // namespace lifetraj
