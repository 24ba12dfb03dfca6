#pragma once

#include "lifetraj/codebook.hpp"
#include "lifetraj/features.hpp"
#include "lifetraj/model.hpp"
#include "lifetraj/project.hpp"
#include "lifetraj/registerdata.hpp"
#include "lifetraj/textualize.hpp"
#include "lifetraj/trajectory.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lifetraj {

inline constexpr int kSummarySchemaVersion = 1;

struct FeatureSettings {
    NgramRange ngram_range;
    std::size_t max_features = Vocabulary::kDefaultMaxFeatures;
};

struct ProjectionSettings {
    std::size_t sample_size = 1000;    // test rows projected
    std::size_t feature_count = 1000;  // highest-df TF-IDF columns kept before PCA
    std::size_t components = 50;
    TsneConfig tsne;
    bool svg = true;
};

struct ExperimentConfig {
    std::filesystem::path codebook_dir;
    std::filesystem::path templates;
    std::filesystem::path work_dir = "lifetraj-out";
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    SynthConfig synth;
    SplitConfig split;
    TrainConfig train;
    FeatureSettings features;
    TrajectoryOptions trajectory;
    ProjectionSettings projection;
    double threshold = 0.5;

    // Relative paths in the file are resolved against the file's directory.
    static ExperimentConfig load(const std::filesystem::path& path);
    // Bundled codebook and templates, no seed.
    static ExperimentConfig defaults(const std::filesystem::path& data_dir);

    // Sets one "section.key" (or top-level "seed"/"threads") from text.
    void set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir = {});
    void validate() const;
    // Distributes the master seed over the generator, split, training and
    // t-SNE substreams.
    std::uint64_t master_seed() const;
    SynthConfig seeded_synth() const;
    SplitConfig seeded_split() const;
    TrainConfig seeded_train() const;
    TsneConfig seeded_tsne() const;
};

// Only records up to `last_year` survive.
PersonHistory truncate_history(const PersonHistory& history, int last_year);

// Cohort members with their labels. Trajectories are built from records up
// to split_year only; the label alone looks beyond it.
std::vector<LabeledTrajectory> build_dataset(const std::vector<PersonHistory>& histories, const Codebook& codebook,
                                             int split_year, const TrajectoryOptions& options = {},
                                             bool static_only = false);

struct GroupDescriptives {
    std::size_t n = 0;
    double female_pct = 0.0;
    double age_mean = 0.0;  // at the last record up to the split year
    double age_sd = 0.0;
    double higher_education_pct = 0.0;
    double single_pct = 0.0;
    double children_pct = 0.0;  // child_status == 1 at that record
    double income_mean = 0.0;
    double income_sd = 0.0;
    double previous_mobility_pct = 0.0;  // any residence change up to the split year
    double tokens_mean = 0.0;
    double tokens_sd = 0.0;
};

struct Descriptives {
    GroupDescriptives non_movers;
    GroupDescriptives movers;
};

// `histories` and `texts` are aligned with `labels`.
Descriptives describe_groups(const std::vector<PersonHistory>& histories, const std::vector<int>& labels,
                             const std::vector<std::string>& texts, int split_year,
                             const TokenCounter& counter = whitespace_token_count);

struct TextModelRun {
    Vocabulary vocabulary;
    TrainResult training;
    std::vector<double> test_probabilities;
    MetricsReport test_metrics;
};

// Fits the vocabulary on the training rows only, trains, then scores the test rows.
TextModelRun run_text_model(const std::vector<std::string>& texts, const std::vector<int>& labels,
                            const DatasetSplit& split, const FeatureSettings& features, const TrainConfig& train,
                            double threshold);

// Columns with the highest document frequency (ties by index), ascending.
std::vector<std::uint32_t> top_columns(const Vocabulary& vocabulary, std::size_t count);

struct ExperimentResult {
    std::filesystem::path summary_path;
    std::string summary_json;
    GenerationReport generation;
    std::size_t dataset_size = 0;
    double test_prevalence = 0.0;
    MetricsReport trajectory_metrics;
    MetricsReport static_metrics;
    Descriptives descriptives;
    Projection2D projection;
};

// generate -> build -> render (full and static-only) -> split -> vectorize ->
// train -> evaluate -> project, writing every artifact plus summary.json
// into config.work_dir.
ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log = nullptr);

} // namespace lifetraj
