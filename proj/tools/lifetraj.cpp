#include "lifetraj/io.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/pipeline.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

using namespace lifetraj;
namespace fs = std::filesystem;

namespace {

struct CommonOptions {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
    std::string out_dir;
    std::vector<std::string> overrides;
    bool lenient = false;
    std::optional<double> threshold;
    std::optional<double> perplexity;
    bool static_only = false;
};

void add_common(CLI::App* app, CommonOptions& o) {
    app->add_option("--config", o.config, "Experiment configuration file")->check(CLI::ExistingFile);
    app->add_option("--seed", o.seed, "Master seed");
    app->add_option("--threads", o.threads, "Worker thread cap (0 = all cores)");
    app->add_option("--out-dir", o.out_dir, "Directory for outputs (overrides paths.work_dir)");
    app->add_option("--set", o.overrides, "Override a configuration key, e.g. --set synth.population_size=5000");
    app->add_flag("--lenient-codes", o.lenient, "Render unresolvable codes as 'unknown <variable>'");
    app->add_option("--threshold", o.threshold, "Decision threshold on the predicted probability");
    app->add_option("--perplexity", o.perplexity, "t-SNE perplexity");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
    ExperimentConfig c = o.config.empty() ? ExperimentConfig::defaults(LIFETRAJ_DATA_DIR) : ExperimentConfig::load(o.config);
    for (const auto& kv : o.overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(kv, "--set expects key=value");
        }
        c.set(kv.substr(0, eq), kv.substr(eq + 1), fs::current_path());
    }
    if (o.seed) {
        c.seed = *o.seed;
    }
    if (o.threads) {
        c.threads = *o.threads;
    }
    if (!o.out_dir.empty()) {
        c.work_dir = o.out_dir;
    }
    if (o.lenient) {
        c.trajectory.lenient = true;
    }
    if (o.threshold) {
        c.threshold = *o.threshold;
    }
    if (o.perplexity) {
        c.projection.tsne.perplexity = *o.perplexity;
    }
    if (c.threads != 0) {
        set_thread_limit(c.threads);
    }
    return c;
}

void require_seed(const ExperimentConfig& c) {
    if (!c.seed) {
        throw ConfigError("seed", "a seed is required (config 'seed' or --seed)");
    }
}

fs::path in_dir(const ExperimentConfig& c, const std::string& given, const char* fallback) {
    return given.empty() ? c.work_dir / fallback : fs::path(given);
}

std::vector<std::string> texts_of(const std::vector<RenderedTrajectory>& data) {
    std::vector<std::string> out;
    for (const auto& d : data) {
        out.push_back(d.text);
    }
    return out;
}

std::vector<int> labels_of(const std::vector<RenderedTrajectory>& data) {
    std::vector<int> out;
    for (const auto& d : data) {
        out.push_back(d.label ? 1 : 0);
    }
    return out;
}

template <typename T>
std::vector<T> pick(const std::vector<T>& all, const std::vector<std::size_t>& rows) {
    std::vector<T> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) {
        if (r >= all.size()) {
            throw InputError("split refers to row " + std::to_string(r) + " beyond the dataset");
        }
        out.push_back(all[r]);
    }
    return out;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Life-trajectory text pipeline for residential mobility prediction"};
    app.require_subcommand(1);
    CommonOptions common;

    auto* generate = app.add_subcommand("generate", "Generate a synthetic register population");
    add_common(generate, common);
    std::string records_out;
    generate->add_option("--out", records_out, "Records file (.csv or .jsonl)");

    auto* validate_cb = app.add_subcommand("validate-codebook", "Check dictionaries and crosswalks");
    std::string codebook_dir;
    validate_cb->add_option("dir", codebook_dir, "Codebook directory")->required()->check(CLI::ExistingDirectory);

    auto* build = app.add_subcommand("build", "Build labelled trajectories from register records");
    add_common(build, common);
    std::string records_in;
    std::string trajectories_out;
    build->add_option("--records", records_in, "Records file");
    build->add_option("--out", trajectories_out, "Trajectories JSONL");

    auto* render = app.add_subcommand("render", "Render trajectories to text");
    add_common(render, common);
    render->add_flag("--static-only", common.static_only, "Baseline profile only, no events");
    std::string trajectories_in;
    std::string dataset_out;
    render->add_option("--trajectories", trajectories_in, "Trajectories JSONL");
    render->add_option("--out", dataset_out, "Dataset JSONL");

    auto* split = app.add_subcommand("split", "Split a rendered dataset into train/validation/test");
    add_common(split, common);
    std::string dataset_in;
    std::string split_out;
    split->add_option("--dataset", dataset_in, "Dataset JSONL");
    split->add_option("--out", split_out, "Split JSON");

    auto* vectorize = app.add_subcommand("vectorize", "Fit TF-IDF on the training rows and transform all rows");
    add_common(vectorize, common);
    std::string split_in;
    vectorize->add_option("--dataset", dataset_in, "Dataset JSONL");
    vectorize->add_option("--split", split_in, "Split JSON");

    auto* train_cmd = app.add_subcommand("train", "Train the logistic regression model");
    add_common(train_cmd, common);
    std::string model_out;
    train_cmd->add_option("--dataset", dataset_in, "Dataset JSONL");
    train_cmd->add_option("--split", split_in, "Split JSON");
    train_cmd->add_option("--out", model_out, "Model JSON");

    auto* evaluate = app.add_subcommand("evaluate", "Evaluate a trained model on the test rows");
    add_common(evaluate, common);
    std::string model_in;
    std::string vocabulary_in;
    std::string metrics_out;
    evaluate->add_option("--dataset", dataset_in, "Dataset JSONL");
    evaluate->add_option("--split", split_in, "Split JSON");
    evaluate->add_option("--model", model_in, "Model JSON");
    evaluate->add_option("--vocabulary", vocabulary_in, "Vocabulary TSV");
    evaluate->add_option("--out", metrics_out, "Metrics JSON");

    auto* project = app.add_subcommand("project", "PCA + t-SNE projection of a feature matrix");
    add_common(project, common);
    std::string matrix_in;
    std::string labels_in;
    project->add_option("--matrix", matrix_in, "Dense matrix file, or sparse triplets (*.triplets)")->required();
    project->add_option("--labels", labels_in, "One 0/1 label per row");

    auto* experiment = app.add_subcommand("experiment", "Run the full pipeline and write summary.json");
    add_common(experiment, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : 2;
    }

    try {
        if (validate_cb->parsed()) {
            const Codebook book = Codebook::load(codebook_dir);
            const CodebookReport report = book.validate();
            std::cout << report.to_string();
            return report.ok() ? 0 : 1;
        }

        const ExperimentConfig config = resolve_config(common);
        const int split_year = config.synth.split_year;

        if (generate->parsed()) {
            require_seed(config);
            config.synth.validate();
            const Codebook book = Codebook::load(config.codebook_dir);
            const Population pop = generate_population(config.seeded_synth(), book);
            const fs::path out = in_dir(config, records_out, "records.csv");
            save_records(out, pop.persons, record_format_for(out));
            std::cerr << "generated " << pop.persons.size() << " persons, cohort " << pop.report.cohort_size
                      << ", mover share " << pop.report.mover_share << ", base hazard " << pop.report.move_hazard
                      << '\n';
            std::cout << out.string() << '\n';
        } else if (build->parsed()) {
            const Codebook book = Codebook::load(config.codebook_dir);
            const fs::path in = in_dir(config, records_in, "records.csv");
            LoadOptions load;
            if (!config.trajectory.lenient) {
                load.codebook = &book;
            }
            const auto histories = load_records(in, record_format_for(in), load);
            const auto dataset = build_dataset(histories, book, split_year, config.trajectory);
            const fs::path out = in_dir(config, trajectories_out, "trajectories.jsonl");
            save_trajectories(out, dataset);
            std::cerr << "built " << dataset.size() << " trajectories from " << histories.size() << " persons\n";
            std::cout << out.string() << '\n';
        } else if (render->parsed()) {
            const TemplateSet templates = TemplateSet::load(config.templates);
            auto items = load_trajectories(in_dir(config, trajectories_in, "trajectories.jsonl"));
            if (common.static_only) {
                for (auto& item : items) {
                    item.trajectory.events.clear();
                }
            }
            const fs::path out =
                in_dir(config, dataset_out, common.static_only ? "dataset_static.jsonl" : "dataset_trajectory.jsonl");
            render_dataset(render_all(items, templates), out);
            std::cout << out.string() << '\n';
        } else if (split->parsed()) {
            require_seed(config);
            const auto data = load_dataset(in_dir(config, dataset_in, "dataset_trajectory.jsonl"));
            const DatasetSplit s = split_dataset(data.size(), config.seeded_split());
            const fs::path out = in_dir(config, split_out, "split.json");
            save_split(out, s);
            std::cerr << "train " << s.train.size() << ", validation " << s.validation.size() << ", test "
                      << s.test.size() << '\n';
            std::cout << out.string() << '\n';
        } else if (vectorize->parsed()) {
            const auto data = load_dataset(in_dir(config, dataset_in, "dataset_trajectory.jsonl"));
            const DatasetSplit s = load_split(in_dir(config, split_in, "split.json"));
            const auto texts = texts_of(data);
            const Vocabulary vocab =
                Vocabulary::fit(pick(texts, s.train), config.features.ngram_range, config.features.max_features);
            vocab.save(config.work_dir / "vocabulary.tsv");
            save_triplets(config.work_dir / "features.triplets", transform_all(vocab, texts));
            std::string labels;
            for (int y : labels_of(data)) {
                labels += std::to_string(y) + "\n";
            }
            write_file(config.work_dir / "labels.txt", labels);
            std::cerr << "vocabulary " << vocab.size() << " n-grams, " << texts.size() << " rows\n";
            std::cout << (config.work_dir / "features.triplets").string() << '\n';
        } else if (train_cmd->parsed()) {
            require_seed(config);
            const auto data = load_dataset(in_dir(config, dataset_in, "dataset_trajectory.jsonl"));
            const DatasetSplit s = load_split(in_dir(config, split_in, "split.json"));
            const TextModelRun run = run_text_model(texts_of(data), labels_of(data), s, config.features,
                                                    config.seeded_train(), config.threshold);
            const fs::path vocab_path = config.work_dir / "vocabulary.tsv";
            run.vocabulary.save(vocab_path);
            const fs::path out = in_dir(config, model_out, "model.json");
            save_model(out, run.training, config.seeded_train(), sha256_file(vocab_path));
            for (const auto& h : run.training.history) {
                std::cerr << "epoch " << h.epoch << ": train loss " << h.train_loss << ", validation AUPRC "
                          << h.validation_auprc << '\n';
            }
            std::cout << out.string() << '\n';
        } else if (evaluate->parsed()) {
            const auto data = load_dataset(in_dir(config, dataset_in, "dataset_trajectory.jsonl"));
            const DatasetSplit s = load_split(in_dir(config, split_in, "split.json"));
            const ModelArtifact model = load_model(in_dir(config, model_in, "model.json"));
            const fs::path vocab_path = in_dir(config, vocabulary_in, "vocabulary.tsv");
            if (sha256_file(vocab_path) != model.vocabulary_sha256) {
                throw InputError("vocabulary " + vocab_path.string() + " does not match the one the model was trained on");
            }
            const Vocabulary vocab = Vocabulary::load(vocab_path);
            const auto x = transform_all(vocab, pick(texts_of(data), s.test));
            const auto report =
                classification_metrics(predict_proba(model.result.model, x), pick(labels_of(data), s.test),
                                       config.threshold);
            const std::string json = metrics_to_json(report);
            write_file(in_dir(config, metrics_out, "metrics.json"), json);
            std::cout << json;
        } else if (project->parsed()) {
            const fs::path in(matrix_in);
            DenseMatrix x = in.extension() == ".triplets" ? densify(load_triplets(in)) : load_dense(in);
            std::vector<int> labels(static_cast<std::size_t>(x.rows()), 0);
            if (!labels_in.empty()) {
                std::ifstream lf(labels_in);
                for (auto& l : labels) {
                    if (!(lf >> l) || (l != 0 && l != 1)) {
                        throw InputError("labels file must hold one 0/1 value per matrix row");
                    }
                }
            }
            const std::size_t k = std::min<std::size_t>(
                {config.projection.components, static_cast<std::size_t>(x.rows()) - 1, static_cast<std::size_t>(x.cols())});
            if (k < static_cast<std::size_t>(x.cols())) {
                x = pca_fit(x, k).transform(x);
            }
            TsneConfig tsne_config = config.projection.tsne;
            if (config.seed) {
                tsne_config = config.seeded_tsne();
            }
            const Projection2D p = tsne(x, tsne_config);
            export_scatter(p.coordinates, labels, config.work_dir / "projection.csv",
                           config.projection.svg ? std::optional(config.work_dir / "projection.svg") : std::nullopt);
            std::cerr << "KL " << p.initial_kl << " -> " << p.final_kl << '\n';
            std::cout << (config.work_dir / "projection.csv").string() << '\n';
        } else if (experiment->parsed()) {
            const ExperimentResult r = run_experiment(config, &std::cerr);
            std::cout << r.summary_path.string() << '\n';
        }
    } catch (const ValidationError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
