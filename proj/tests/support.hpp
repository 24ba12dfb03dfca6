#pragma once

#include "lifetraj/codebook.hpp"
#include "lifetraj/registerdata.hpp"
#include "lifetraj/textualize.hpp"

#include <filesystem>
#include <string>

namespace testing {

inline std::filesystem::path data_dir() { return LIFETRAJ_DATA_DIR; }
inline std::filesystem::path fixture(const std::string& name) { return std::filesystem::path(LIFETRAJ_FIXTURE_DIR) / name; }

inline const lifetraj::Codebook& bundled_codebook() {
    static const lifetraj::Codebook book = lifetraj::Codebook::load(data_dir() / "codebook");
    return book;
}

inline const lifetraj::TemplateSet& bundled_templates() {
    static const lifetraj::TemplateSet set = lifetraj::TemplateSet::load(data_dir() / "templates" / "en.toml");
    return set;
}

inline lifetraj::PersonHistory load_fixture_person(const std::string& name) {
    auto persons = lifetraj::load_records(fixture(name), lifetraj::RecordFormat::csv);
    return persons.at(0);
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / ("lifetraj-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

// Small seeded population for property tests.
inline const lifetraj::Population& small_population() {
    static const lifetraj::Population pop = [] {
        lifetraj::SynthConfig c;
        c.population_size = 1500;
        c.seed = 11;
        return lifetraj::generate_population(c, bundled_codebook());
    }();
    return pop;
}

} // namespace testing
