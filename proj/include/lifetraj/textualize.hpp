#pragma once

#include "lifetraj/error.hpp"
#include "lifetraj/trajectory.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifetraj {

class TemplateError : public Error {
public:
    using Error::Error;
};

// A sentence pattern compiled into literal text and placeholder slots.
class SentenceTemplate {
public:
    struct Segment {
        std::string text;  // literal, or placeholder name when is_placeholder
        bool is_placeholder = false;
        bool lowercase_first = false;
    };

    static SentenceTemplate compile(std::string_view pattern, const std::string& where);

    const std::string& pattern() const noexcept { return pattern_; }
    const std::vector<Segment>& segments() const noexcept { return segments_; }
    // Placeholder governed by the first indefinite article "a {...}", if any.
    const std::string* article_slot() const noexcept { return article_slot_ ? &*article_slot_ : nullptr; }

private:
    std::string pattern_;
    std::vector<Segment> segments_;
    std::optional<std::string> article_slot_;
};

struct TemplateEntry {
    SentenceTemplate plain;
    std::optional<SentenceTemplate> vowel;  // "an" variant
};

struct TemplateSet {
    int version = 0;
    std::string vowels = "aeiou";
    std::vector<std::string> consonant_sound_prefixes;
    // Rendered in this order; group names: demographics, education, work,
    // employment, workplace, income, support.
    std::vector<std::pair<std::string, TemplateEntry>> baseline;
    std::map<EventKind, TemplateEntry> events;

    static TemplateSet parse(std::string_view text, const std::string& source);
    static TemplateSet load(const std::filesystem::path& path);

    // Copy keeping only the named baseline groups (in their original order).
    TemplateSet restricted_to(const std::vector<std::string>& groups) const;

    bool starts_with_vowel_sound(std::string_view word) const;
};

struct RenderedTrajectory {
    std::string person_id;
    std::string text;
    bool label = false;
    std::optional<std::size_t> token_count;

    bool operator==(const RenderedTrajectory&) const = default;
};

std::string render_text(const Trajectory& trajectory, const TemplateSet& templates);
RenderedTrajectory render(const LabeledTrajectory& item, const TemplateSet& templates);
std::vector<RenderedTrajectory> render_all(const std::vector<LabeledTrajectory>& items, const TemplateSet& templates);

// JSONL with one {"id", "text", "label"} object per line, in input order.
void render_dataset(const std::vector<RenderedTrajectory>& rendered, const std::filesystem::path& path);
std::vector<RenderedTrajectory> load_dataset(const std::filesystem::path& path);

} // namespace lifetraj
