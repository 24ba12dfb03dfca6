#include "lifetraj/pipeline.hpp"

#include "lifetraj/io.hpp"
#include "lifetraj/kvfile.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>
#include <ostream>

namespace lifetraj {

namespace {

using nlohmann::ordered_json;

template <typename T>
T parse_value(std::string_view key, std::string_view text) {
    T v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError(std::string(key), "cannot parse '" + std::string(text) + "'");
    }
    return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
    if (text == "true") {
        return true;
    }
    if (text == "false") {
        return false;
    }
    throw ConfigError(std::string(key), "expected true or false, got '" + std::string(text) + "'");
}

std::filesystem::path resolve(const std::filesystem::path& base, std::string_view value) {
    std::filesystem::path p{std::string(value)};
    return p.is_relative() && !base.empty() ? base / p : p;
}

std::string scheme_mode_name(SchemeChangeMode m) {
    switch (m) {
    case SchemeChangeMode::descriptions: return "descriptions";
    case SchemeChangeMode::strict_codes: return "strict_codes";
    case SchemeChangeMode::harmonize: return "harmonize";
    }
    return "descriptions";
}

double mean_of(const std::vector<double>& v) {
    return v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double sd_of(const std::vector<double>& v) {
    if (v.size() < 2) {
        return 0.0;
    }
    const double m = mean_of(v);
    double ss = 0.0;
    for (double x : v) {
        ss += (x - m) * (x - m);
    }
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

ordered_json metrics_json(const MetricsReport& r) { return ordered_json::parse(metrics_to_json(r)); }

ordered_json group_json(const GroupDescriptives& g) {
    return ordered_json{
        {"n", g.n},
        {"female_pct", g.female_pct},
        {"age_mean", g.age_mean},
        {"age_sd", g.age_sd},
        {"higher_education_pct", g.higher_education_pct},
        {"single_pct", g.single_pct},
        {"children_pct", g.children_pct},
        {"income_mean", g.income_mean},
        {"income_sd", g.income_sd},
        {"previous_mobility_pct", g.previous_mobility_pct},
        {"tokens_mean", g.tokens_mean},
        {"tokens_sd", g.tokens_sd},
    };
}

ordered_json history_json(const TrainResult& r) {
    ordered_json h = ordered_json::array();
    for (const auto& e : r.history) {
        h.push_back({{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"validation_auprc", e.validation_auprc}});
    }
    return ordered_json{{"best_epoch", r.best_epoch},
                        {"class_weights", {r.class_weights.negative, r.class_weights.positive}},
                        {"history", std::move(h)}};
}

ordered_json config_echo(const ExperimentConfig& c) {
    const SynthConfig& s = c.synth;
    ordered_json synth{
        {"population_size", s.population_size},
        {"first_year", s.first_year},
        {"last_year", s.last_year},
        {"split_year", s.split_year},
        {"n_municipalities", s.n_municipalities},
        {"base_move_hazard", s.base_move_hazard},
        {"age_effect", s.age_effect},
        {"children_effect", s.children_effect},
        {"target_mover_share", s.target_mover_share ? ordered_json(*s.target_mover_share) : ordered_json(nullptr)},
        {"mobility_heterogeneity", s.mobility_heterogeneity},
    };
    ordered_json split{
        {"test_fraction", c.split.test_fraction},
        {"validation_fraction", c.split.validation_fraction},
        {"train_cap", c.split.train_cap ? ordered_json(*c.split.train_cap) : ordered_json(nullptr)},
    };
    ordered_json train{
        {"epochs", c.train.epochs},
        {"learning_rate", c.train.learning_rate},
        {"weight_decay", c.train.weight_decay},
        {"warmup_ratio", c.train.warmup_ratio},
        {"batch_size", c.train.batch_size},
        {"class_weights", c.train.class_weights
                              ? ordered_json{c.train.class_weights->negative, c.train.class_weights->positive}
                              : ordered_json("balanced")},
    };
    ordered_json project{
        {"sample_size", c.projection.sample_size},
        {"feature_count", c.projection.feature_count},
        {"components", c.projection.components},
        {"perplexity", c.projection.tsne.perplexity},
        {"iterations", c.projection.tsne.iterations},
        {"learning_rate", c.projection.tsne.learning_rate},
        {"early_exaggeration", c.projection.tsne.early_exaggeration},
        {"exaggeration_iterations", c.projection.tsne.exaggeration_iterations},
        {"init", c.projection.tsne.init == TsneInit::pca ? "pca" : "random"},
    };
    return ordered_json{
        {"seed", c.master_seed()},
        {"codebook_sha256", [&] {
             std::string all;
             std::vector<std::filesystem::path> files;
             for (const auto& e : std::filesystem::directory_iterator(c.codebook_dir)) {
                 files.push_back(e.path());
             }
             std::sort(files.begin(), files.end());
             for (const auto& f : files) {
                 all += f.filename().string() + ":" + sha256_file(f) + "\n";
             }
             return sha256_hex(all);
         }()},
        {"templates_sha256", sha256_file(c.templates)},
        {"synth", std::move(synth)},
        {"split", std::move(split)},
        {"train", std::move(train)},
        {"features",
         {{"ngram_min", c.features.ngram_range.min},
          {"ngram_max", c.features.ngram_range.max},
          {"max_features", c.features.max_features}}},
        {"trajectory", {{"scheme_mode", scheme_mode_name(c.trajectory.scheme_mode)}, {"lenient", c.trajectory.lenient}}},
        {"evaluate", {{"threshold", c.threshold}}},
        {"project", std::move(project)},
    };
}

void say(std::ostream* log, const std::string& message) {
    if (log != nullptr) {
        *log << "[experiment] " << message << '\n' << std::flush;
    }
}

} // namespace

ExperimentConfig ExperimentConfig::defaults(const std::filesystem::path& data_dir) {
    ExperimentConfig c;
    c.codebook_dir = data_dir / "codebook";
    c.templates = data_dir / "templates" / "en.toml";
    return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
    const KvFile kv = KvFile::load(path);
    const std::filesystem::path base = path.parent_path();
    ExperimentConfig c;
    for (const auto& e : kv.entries()) {
        try {
            c.set(e.key, e.value, base);
        } catch (const ConfigError& err) {
            throw ConfigError(err.field(), path.string() + ":" + std::to_string(e.line) + ": " + err.what());
        }
    }
    return c;
}

void ExperimentConfig::set(std::string_view key, std::string_view value, const std::filesystem::path& base_dir) {
    auto as_int = [&] { return parse_value<long long>(key, value); };
    auto as_size = [&] { return parse_value<std::size_t>(key, value); };
    auto as_double = [&] { return parse_value<double>(key, value); };

    if (key == "seed") {
        seed = parse_value<std::uint64_t>(key, value);
    } else if (key == "threads") {
        threads = parse_value<unsigned>(key, value);
    } else if (key == "paths.codebook") {
        codebook_dir = resolve(base_dir, value);
    } else if (key == "paths.templates") {
        templates = resolve(base_dir, value);
    } else if (key == "paths.work_dir") {
        work_dir = resolve(base_dir, value);
    } else if (key == "synth.population_size") {
        synth.population_size = as_size();
    } else if (key == "synth.first_year") {
        synth.first_year = static_cast<int>(as_int());
    } else if (key == "synth.last_year") {
        synth.last_year = static_cast<int>(as_int());
    } else if (key == "synth.split_year") {
        synth.split_year = static_cast<int>(as_int());
    } else if (key == "synth.n_municipalities") {
        synth.n_municipalities = as_size();
    } else if (key == "synth.base_move_hazard") {
        synth.base_move_hazard = as_double();
    } else if (key == "synth.age_effect") {
        synth.age_effect = as_double();
    } else if (key == "synth.children_effect") {
        synth.children_effect = as_double();
    } else if (key == "synth.target_mover_share") {
        if (value == "none") {
            synth.target_mover_share.reset();
        } else {
            synth.target_mover_share = as_double();
        }
    } else if (key == "synth.mobility_heterogeneity") {
        synth.mobility_heterogeneity = as_double();
    } else if (key == "split.test_fraction") {
        split.test_fraction = as_double();
    } else if (key == "split.validation_fraction") {
        split.validation_fraction = as_double();
    } else if (key == "split.train_cap") {
        if (value == "none") {
            split.train_cap.reset();
        } else {
            split.train_cap = as_size();
        }
    } else if (key == "train.epochs") {
        train.epochs = static_cast<int>(as_int());
    } else if (key == "train.learning_rate") {
        train.learning_rate = as_double();
    } else if (key == "train.weight_decay") {
        train.weight_decay = as_double();
    } else if (key == "train.warmup_ratio") {
        train.warmup_ratio = as_double();
    } else if (key == "train.batch_size") {
        train.batch_size = as_size();
    } else if (key == "train.class_weights") {
        if (value == "balanced") {
            train.class_weights.reset();
        } else {
            const auto comma = value.find(',');
            if (comma == std::string_view::npos) {
                throw ConfigError(std::string(key), "expected 'balanced' or '<w0>,<w1>'");
            }
            train.class_weights = ClassWeights{parse_value<double>(key, value.substr(0, comma)),
                                               parse_value<double>(key, value.substr(comma + 1))};
        }
    } else if (key == "features.ngram_min") {
        features.ngram_range.min = static_cast<int>(as_int());
    } else if (key == "features.ngram_max") {
        features.ngram_range.max = static_cast<int>(as_int());
    } else if (key == "features.max_features") {
        features.max_features = as_size();
    } else if (key == "trajectory.scheme_mode") {
        if (value == "descriptions") {
            trajectory.scheme_mode = SchemeChangeMode::descriptions;
        } else if (value == "strict_codes") {
            trajectory.scheme_mode = SchemeChangeMode::strict_codes;
        } else if (value == "harmonize") {
            trajectory.scheme_mode = SchemeChangeMode::harmonize;
        } else {
            throw ConfigError(std::string(key), "expected descriptions, strict_codes or harmonize");
        }
    } else if (key == "trajectory.lenient") {
        trajectory.lenient = parse_bool(key, value);
    } else if (key == "evaluate.threshold") {
        threshold = as_double();
    } else if (key == "project.sample_size") {
        projection.sample_size = as_size();
    } else if (key == "project.feature_count") {
        projection.feature_count = as_size();
    } else if (key == "project.components") {
        projection.components = as_size();
    } else if (key == "project.perplexity") {
        projection.tsne.perplexity = as_double();
    } else if (key == "project.iterations") {
        projection.tsne.iterations = static_cast<int>(as_int());
    } else if (key == "project.learning_rate") {
        projection.tsne.learning_rate = as_double();
    } else if (key == "project.early_exaggeration") {
        projection.tsne.early_exaggeration = as_double();
    } else if (key == "project.exaggeration_iterations") {
        projection.tsne.exaggeration_iterations = static_cast<int>(as_int());
    } else if (key == "project.init") {
        if (value == "pca") {
            projection.tsne.init = TsneInit::pca;
        } else if (value == "random") {
            projection.tsne.init = TsneInit::random;
        } else {
            throw ConfigError(std::string(key), "expected pca or random");
        }
    } else if (key == "project.svg") {
        projection.svg = parse_bool(key, value);
    } else {
        throw ConfigError(std::string(key), "unknown configuration key");
    }
}

void ExperimentConfig::validate() const {
    if (!seed) {
        throw ConfigError("seed", "a seed is required (config 'seed' or --seed)");
    }
    if (!std::filesystem::is_directory(codebook_dir)) {
        throw ConfigError("paths.codebook", "directory not found: " + codebook_dir.string());
    }
    if (!std::filesystem::is_regular_file(templates)) {
        throw ConfigError("paths.templates", "file not found: " + templates.string());
    }
    synth.validate();
    train.validate();
    if (features.ngram_range.min < 1 || features.ngram_range.max < features.ngram_range.min) {
        throw ConfigError("features.ngram_min", "invalid n-gram range");
    }
    if (features.max_features == 0) {
        throw ConfigError("features.max_features", "must be positive");
    }
    if (!(threshold >= 0.0 && threshold <= 1.0)) {
        throw ConfigError("evaluate.threshold", "must lie in [0, 1]");
    }
    if (projection.components == 0 || projection.feature_count == 0) {
        throw ConfigError("project.components", "components and feature_count must be positive");
    }
}

std::uint64_t ExperimentConfig::master_seed() const { return seed.value_or(0); }

SynthConfig ExperimentConfig::seeded_synth() const {
    SynthConfig s = synth;
    s.seed = derive_seed(master_seed(), "generator");
    return s;
}

SplitConfig ExperimentConfig::seeded_split() const {
    SplitConfig s = split;
    s.seed = derive_seed(master_seed(), "split");
    return s;
}

TrainConfig ExperimentConfig::seeded_train() const {
    TrainConfig t = train;
    t.seed = derive_seed(master_seed(), "train");
    return t;
}

TsneConfig ExperimentConfig::seeded_tsne() const {
    TsneConfig t = projection.tsne;
    t.seed = derive_seed(master_seed(), "tsne");
    return t;
}

PersonHistory truncate_history(const PersonHistory& history, int last_year) {
    PersonHistory out{history.person_id, {}};
    for (const auto& r : history.records) {
        if (r.year <= last_year) {
            out.records.push_back(r);
        }
    }
    return out;
}

std::vector<LabeledTrajectory> build_dataset(const std::vector<PersonHistory>& histories, const Codebook& codebook,
                                             int split_year, const TrajectoryOptions& options, bool static_only) {
    std::vector<const PersonHistory*> members;
    for (const auto& h : histories) {
        if (in_cohort(h, split_year)) {
            members.push_back(&h);
        }
    }
    std::vector<LabeledTrajectory> out(members.size());
    parallel_for(members.size(), [&](std::size_t i) {
        const PersonHistory visible = truncate_history(*members[i], split_year);
        out[i].trajectory = static_only ? build_static_only(visible, codebook, split_year, options)
                                        : build_trajectory(visible, codebook, split_year, options);
        out[i].label = compute_label(*members[i], split_year);
    });
    return out;
}

Descriptives describe_groups(const std::vector<PersonHistory>& histories, const std::vector<int>& labels,
                             const std::vector<std::string>& texts, int split_year, const TokenCounter& counter) {
    if (histories.size() != labels.size() || texts.size() != labels.size()) {
        throw InputError("histories, labels and texts must align");
    }
    struct Acc {
        std::size_t n = 0, female = 0, higher = 0, single = 0, children = 0, moved_before = 0;
        std::vector<double> age, income, tokens;
    } acc[2];
    for (std::size_t i = 0; i < histories.size(); ++i) {
        const AnnualRecord* last = nullptr;
        bool moved_before = false;
        for (const auto& r : histories[i].records) {
            if (r.year > split_year) {
                break;
            }
            if (last != nullptr && r.residence != last->residence) {
                moved_before = true;
            }
            last = &r;
        }
        if (last == nullptr) {
            continue;
        }
        Acc& a = acc[labels[i] == 1 ? 1 : 0];
        ++a.n;
        a.female += last->sex == 2;
        a.higher += last->education_level >= 5;
        a.single += last->family_relation == 2;
        a.children += last->child_status == 1;
        a.moved_before += moved_before;
        a.age.push_back(last->age);
        a.income.push_back(last->income_percentile);
        a.tokens.push_back(static_cast<double>(counter(texts[i])));
    }
    auto finish = [](const Acc& a) {
        GroupDescriptives g;
        g.n = a.n;
        const double n = a.n == 0 ? 1.0 : static_cast<double>(a.n);
        g.female_pct = 100.0 * static_cast<double>(a.female) / n;
        g.higher_education_pct = 100.0 * static_cast<double>(a.higher) / n;
        g.single_pct = 100.0 * static_cast<double>(a.single) / n;
        g.children_pct = 100.0 * static_cast<double>(a.children) / n;
        g.previous_mobility_pct = 100.0 * static_cast<double>(a.moved_before) / n;
        g.age_mean = mean_of(a.age);
        g.age_sd = sd_of(a.age);
        g.income_mean = mean_of(a.income);
        g.income_sd = sd_of(a.income);
        g.tokens_mean = mean_of(a.tokens);
        g.tokens_sd = sd_of(a.tokens);
        return g;
    };
    return Descriptives{finish(acc[0]), finish(acc[1])};
}

TextModelRun run_text_model(const std::vector<std::string>& texts, const std::vector<int>& labels,
                            const DatasetSplit& split, const FeatureSettings& features, const TrainConfig& train_config,
                            double threshold) {
    auto pick_texts = [&](const std::vector<std::size_t>& rows) {
        std::vector<std::string> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) {
            out.push_back(texts[r]);
        }
        return out;
    };
    auto pick_labels = [&](const std::vector<std::size_t>& rows) {
        std::vector<int> out;
        out.reserve(rows.size());
        for (std::size_t r : rows) {
            out.push_back(labels[r]);
        }
        return out;
    };
    const auto train_texts = pick_texts(split.train);
    TextModelRun run{Vocabulary::fit(train_texts, features.ngram_range, features.max_features), {}, {}, {}};
    const SparseMatrix x_train = transform_all(run.vocabulary, train_texts);
    const SparseMatrix x_val = transform_all(run.vocabulary, pick_texts(split.validation));
    const SparseMatrix x_test = transform_all(run.vocabulary, pick_texts(split.test));
    const auto y_train = pick_labels(split.train);
    const auto y_val = pick_labels(split.validation);
    const auto y_test = pick_labels(split.test);
    run.training = train(x_train, y_train, x_val, y_val, train_config);
    run.test_probabilities = predict_proba(run.training.model, x_test);
    run.test_metrics = classification_metrics(run.test_probabilities, y_test, threshold);
    return run;
}

std::vector<std::uint32_t> top_columns(const Vocabulary& vocabulary, std::size_t count) {
    std::vector<std::uint32_t> cols(vocabulary.size());
    std::iota(cols.begin(), cols.end(), 0U);
    const auto& df = vocabulary.document_frequencies();
    std::stable_sort(cols.begin(), cols.end(), [&](std::uint32_t a, std::uint32_t b) { return df[a] > df[b]; });
    cols.resize(std::min(count, cols.size()));
    std::sort(cols.begin(), cols.end());
    return cols;
}

ExperimentResult run_experiment(const ExperimentConfig& config, std::ostream* log) {
    config.validate();
    if (config.threads != 0) {
        set_thread_limit(config.threads);
    }
    const std::filesystem::path& dir = config.work_dir;
    std::filesystem::create_directories(dir);
    std::vector<std::pair<std::string, std::filesystem::path>> artifacts;
    auto artifact = [&](const std::string& name, const std::string& file) {
        artifacts.emplace_back(name, file);
        return dir / file;
    };

    const Codebook codebook = Codebook::load(config.codebook_dir);
    const CodebookReport check = codebook.validate();
    if (!check.ok()) {
        throw ValidationError("codebook validation failed:\n" + check.to_string());
    }
    const TemplateSet templates = TemplateSet::load(config.templates);
    const int split_year = config.synth.split_year;

    ExperimentResult result;
    const Population population = generate_population(config.seeded_synth(), codebook);
    result.generation = population.report;
    save_records(artifact("records", "records.csv"), population.persons, RecordFormat::csv);
    say(log, "generated " + std::to_string(population.persons.size()) + " persons, cohort " +
                 std::to_string(population.report.cohort_size) + ", mover share " +
                 std::to_string(population.report.mover_share));

    const auto full = build_dataset(population.persons, codebook, split_year, config.trajectory, false);
    const auto statics = build_dataset(population.persons, codebook, split_year, config.trajectory, true);
    save_trajectories(artifact("trajectories", "trajectories.jsonl"), full);
    result.dataset_size = full.size();

    const auto rendered_full = render_all(full, templates);
    const auto rendered_static = render_all(statics, templates);
    render_dataset(rendered_full, artifact("dataset_trajectory", "dataset_trajectory.jsonl"));
    render_dataset(rendered_static, artifact("dataset_static", "dataset_static.jsonl"));
    say(log, "rendered " + std::to_string(full.size()) + " trajectories");

    std::vector<std::string> texts_full;
    std::vector<std::string> texts_static;
    std::vector<int> labels;
    for (std::size_t i = 0; i < full.size(); ++i) {
        texts_full.push_back(rendered_full[i].text);
        texts_static.push_back(rendered_static[i].text);
        labels.push_back(rendered_full[i].label ? 1 : 0);
    }
    const TokenStats tokens = TokenStats::compute(texts_full);
    {
        std::vector<PersonHistory> members;
        for (const auto& h : population.persons) {
            if (in_cohort(h, split_year)) {
                members.push_back(h);
            }
        }
        result.descriptives = describe_groups(members, labels, texts_full, split_year);
    }

    const DatasetSplit split = split_dataset(full.size(), config.seeded_split());
    save_split(artifact("split", "split.json"), split);
    std::size_t test_positives = 0;
    for (std::size_t r : split.test) {
        test_positives += static_cast<std::size_t>(labels[r]);
    }
    result.test_prevalence =
        split.test.empty() ? 0.0 : static_cast<double>(test_positives) / static_cast<double>(split.test.size());
    say(log, "split train " + std::to_string(split.train.size()) + ", validation " +
                 std::to_string(split.validation.size()) + ", test " + std::to_string(split.test.size()));

    const TrainConfig train_config = config.seeded_train();
    const TextModelRun traj =
        run_text_model(texts_full, labels, split, config.features, train_config, config.threshold);
    traj.vocabulary.save(artifact("vocabulary_trajectory", "vocabulary_trajectory.tsv"));
    save_model(artifact("model_trajectory", "model_trajectory.json"), traj.training, train_config,
               sha256_file(dir / "vocabulary_trajectory.tsv"));
    write_file(artifact("metrics_trajectory", "metrics_trajectory.json"), metrics_to_json(traj.test_metrics));
    result.trajectory_metrics = traj.test_metrics;
    say(log, "trajectory model: |V| " + std::to_string(traj.vocabulary.size()) + ", test AUPRC " +
                 std::to_string(traj.test_metrics.auprc));

    const TextModelRun stat =
        run_text_model(texts_static, labels, split, config.features, train_config, config.threshold);
    stat.vocabulary.save(artifact("vocabulary_static", "vocabulary_static.tsv"));
    save_model(artifact("model_static", "model_static.json"), stat.training, train_config,
               sha256_file(dir / "vocabulary_static.tsv"));
    write_file(artifact("metrics_static", "metrics_static.json"), metrics_to_json(stat.test_metrics));
    result.static_metrics = stat.test_metrics;
    say(log, "static model: |V| " + std::to_string(stat.vocabulary.size()) + ", test AUPRC " +
                 std::to_string(stat.test_metrics.auprc));

    // Projection of a seeded subsample of the test rows.
    std::vector<std::size_t> sample = split.test;
    {
        const TsneConfig tsne_config = config.seeded_tsne();
        Rng rng(tsne_config.seed);
        rng.shuffle(std::span<std::size_t>(sample));
        sample.resize(std::min(sample.size(), config.projection.sample_size));
        std::sort(sample.begin(), sample.end());
        std::vector<std::string> sample_texts;
        std::vector<int> sample_labels;
        for (std::size_t r : sample) {
            sample_texts.push_back(texts_full[r]);
            sample_labels.push_back(labels[r]);
        }
        const auto columns = top_columns(traj.vocabulary, config.projection.feature_count);
        const DenseMatrix dense = densify(transform_all(traj.vocabulary, sample_texts), columns);
        const std::size_t k = std::min({config.projection.components, dense.rows() > 1 ? static_cast<std::size_t>(dense.rows()) - 1 : 0,
                                        static_cast<std::size_t>(dense.cols())});
        const PcaModel pca = pca_fit(dense, k);
        result.projection = tsne(pca.transform(dense), tsne_config);
        std::optional<std::filesystem::path> svg;
        if (config.projection.svg) {
            svg = artifact("projection_svg", "projection.svg");
        }
        export_scatter(result.projection.coordinates, sample_labels, artifact("projection_csv", "projection.csv"),
                       svg);
        say(log, "projected " + std::to_string(sample.size()) + " test points, KL " +
                     std::to_string(result.projection.initial_kl) + " -> " +
                     std::to_string(result.projection.final_kl));
    }

    ordered_json files = ordered_json::object();
    for (const auto& [name, file] : artifacts) {
        files[name] = {{"path", file.generic_string()}, {"sha256", sha256_file(dir / file)}};
    }
    const Descriptives& d = result.descriptives;
    ordered_json summary{
        {"schema_version", kSummarySchemaVersion},
        {"config", config_echo(config)},
        {"generation",
         {{"persons", population.persons.size()},
          {"move_hazard", population.report.move_hazard},
          {"cohort_size", population.report.cohort_size},
          {"mover_share", population.report.mover_share}}},
        {"dataset",
         {{"size", full.size()},
          {"train", split.train.size()},
          {"validation", split.validation.size()},
          {"test", split.test.size()},
          {"test_prevalence", result.test_prevalence}}},
        {"token_stats",
         {{"tokenizer", "whitespace"},
          {"mean", tokens.mean()},
          {"sd", tokens.stddev()},
          {"p50", tokens.percentile(50)},
          {"p99", tokens.percentile(99)},
          {"max", tokens.percentile(100)}}},
        {"descriptives", {{"non_movers", group_json(d.non_movers)}, {"movers", group_json(d.movers)}}},
        {"baseline_auprc", result.test_prevalence},
        {"models",
         {{"trajectory",
           {{"vocabulary_size", traj.vocabulary.size()},
            {"training", history_json(traj.training)},
            {"test", metrics_json(traj.test_metrics)}}},
          {"static",
           {{"vocabulary_size", stat.vocabulary.size()},
            {"training", history_json(stat.training)},
            {"test", metrics_json(stat.test_metrics)}}}}},
        {"projection",
         {{"points", sample.size()},
          {"initial_kl", result.projection.initial_kl},
          {"final_kl", result.projection.final_kl}}},
        {"artifacts", std::move(files)},
    };
    result.summary_json = summary.dump(2) + "\n";
    result.summary_path = dir / "summary.json";
    write_file(result.summary_path, result.summary_json);
    say(log, "wrote " + result.summary_path.string());
    return result;
}

} // namespace lifetraj
