#pragma once

#include "lifetraj/codebook.hpp"
#include "lifetraj/registerdata.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifetraj {

// Declaration order is the tie-break order for same-year events.
enum class EventKind {
    ResidentialMove,
    FamilyChange,
    ChildrenStatusChange,
    EducationChange,
    EmploymentChange,
    OccupationChange,
    IndustryChange,
    WorkplaceMove,
    LaborMarketMove,
    IncomeChange,
    GovernmentSupportChange,
};

inline constexpr EventKind kAllEventKinds[] = {
    EventKind::ResidentialMove,  EventKind::FamilyChange,     EventKind::ChildrenStatusChange,
    EventKind::EducationChange,  EventKind::EmploymentChange, EventKind::OccupationChange,
    EventKind::IndustryChange,   EventKind::WorkplaceMove,    EventKind::LaborMarketMove,
    EventKind::IncomeChange,     EventKind::GovernmentSupportChange,
};

std::string_view event_kind_name(EventKind kind);
std::optional<EventKind> parse_event_kind(std::string_view name);

struct CodedValue {
    Code code = 0;
    std::string scheme;
    std::string description;

    bool operator==(const CodedValue&) const = default;
};

struct BaselineProfile {
    int year = 0;
    CodedValue sex;
    int age = 0;
    CodedValue residence;
    CodedValue family_relation;
    CodedValue child_status;
    CodedValue education_level;
    CodedValue education_field;
    CodedValue employment;
    CodedValue occupation;
    CodedValue industry;
    CodedValue workplace;
    CodedValue labor_market_region;
    int income_percentile = 0;
    CodedValue income_source;
    CodedValue government_support;

    bool operator==(const BaselineProfile&) const = default;
};

struct LifeEvent {
    int year = 0;
    EventKind kind = EventKind::ResidentialMove;
    std::string from_value;
    std::string to_value;

    bool operator==(const LifeEvent&) const = default;
};

struct Trajectory {
    std::string person_id;
    BaselineProfile baseline;
    std::vector<LifeEvent> events;  // sorted by (year, kind)
    YearRange window;               // [first observed year, split year]

    bool operator==(const Trajectory&) const = default;
};

struct MobilityLabel {
    std::string person_id;
    bool moved = false;
    YearRange window;  // split_year + 1 .. split_year + 4

    bool operator==(const MobilityLabel&) const = default;
};

// How occupation/industry changes across a classification revision are judged.
enum class SchemeChangeMode {
    descriptions,  // event only when the rendered descriptions differ
    strict_codes,  // event whenever the raw code or scheme differs
    harmonize,     // compare after re-labelling into the newest revision
};

struct TrajectoryOptions {
    SchemeChangeMode scheme_mode = SchemeChangeMode::descriptions;
    // Render unresolvable codes as "unknown <variable>" instead of throwing.
    bool lenient = false;
};

class EmptyWindowError : public Error {
public:
    using Error::Error;
};

class LabelUndefinedError : public Error {
public:
    using Error::Error;
};

int income_decile(int percentile);
std::string ordinal(int n);

std::vector<LifeEvent> detect_events(const PersonHistory& history, const Codebook& codebook, int split_year,
                                     const TrajectoryOptions& options = {});
BaselineProfile build_baseline(const PersonHistory& history, const Codebook& codebook, int split_year,
                               const TrajectoryOptions& options = {});
MobilityLabel compute_label(const PersonHistory& history, int split_year);

Trajectory build_trajectory(const PersonHistory& history, const Codebook& codebook, int split_year,
                            const TrajectoryOptions& options = {});
// Baseline only, no events.
Trajectory build_static_only(const PersonHistory& history, const Codebook& codebook, int split_year,
                             const TrajectoryOptions& options = {});

struct LabeledTrajectory {
    Trajectory trajectory;
    MobilityLabel label;

    bool operator==(const LabeledTrajectory&) const = default;
};

// One JSON object per line: id, window, baseline, events, label.
void save_trajectories(const std::filesystem::path& path, const std::vector<LabeledTrajectory>& items);
std::vector<LabeledTrajectory> load_trajectories(const std::filesystem::path& path);

} // namespace lifetraj
