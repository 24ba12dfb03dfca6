#include "lifetraj/model.hpp"

#include "lifetraj/io.hpp"
#include "lifetraj/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace lifetraj {

namespace {

using nlohmann::ordered_json;

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

void check_labels(std::span<const int> labels) {
    for (int y : labels) {
        if (y != 0 && y != 1) {
            throw InputError("labels must be 0 or 1, got " + std::to_string(y));
        }
    }
}

void require_both_classes(std::span<const int> labels, const char* what) {
    const auto pos = std::count(labels.begin(), labels.end(), 1);
    if (pos == 0 || pos == static_cast<std::ptrdiff_t>(labels.size())) {
        throw UndefinedMetricError(std::string(what) + " needs both classes present");
    }
}

double row_score(const LinearModel& m, const SparseMatrix& x, std::size_t r) {
    double s = m.bias;
    for (std::size_t k = x.row_offsets[r]; k < x.row_offsets[r + 1]; ++k) {
        s += m.weights[x.indices[k]] * x.values[k];
    }
    return s;
}

double ratio(std::size_t num, std::size_t den, const char* name, std::vector<std::string>& undefined) {
    if (den == 0) {
        undefined.emplace_back(name);
        return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
}

double f1(double p, double r) { return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0; }

ordered_json config_json(const TrainConfig& c) {
    ordered_json j{
        {"epochs", c.epochs},
        {"learning_rate", c.learning_rate},
        {"weight_decay", c.weight_decay},
        {"warmup_ratio", c.warmup_ratio},
        {"batch_size", c.batch_size},
        {"seed", c.seed},
        {"beta1", c.beta1},
        {"beta2", c.beta2},
        {"epsilon", c.epsilon},
    };
    if (c.class_weights) {
        j["class_weights"] = {c.class_weights->negative, c.class_weights->positive};
    } else {
        j["class_weights"] = "balanced";
    }
    return j;
}

} // namespace

ClassWeights ClassWeights::balanced(std::span<const int> labels) {
    check_labels(labels);
    const auto n = static_cast<double>(labels.size());
    const auto n1 = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    const double n0 = n - n1;
    if (n1 == 0.0 || n0 == 0.0) {
        throw TrainingError("balanced class weights need both classes in the training set");
    }
    return ClassWeights{n / (2.0 * n0), n / (2.0 * n1)};
}

void TrainConfig::validate() const {
    if (epochs < 1) {
        throw ConfigError("epochs", "must be at least 1");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate", "must be positive");
    }
    if (!(weight_decay >= 0.0)) {
        throw ConfigError("weight_decay", "must be non-negative");
    }
    if (!(warmup_ratio >= 0.0 && warmup_ratio < 1.0)) {
        throw ConfigError("warmup_ratio", "must lie in [0, 1)");
    }
    if (batch_size == 0) {
        throw ConfigError("batch_size", "must be positive");
    }
    if (class_weights && !(class_weights->negative > 0.0 && class_weights->positive > 0.0)) {
        throw ConfigError("class_weights", "must be positive");
    }
}

double sigmoid(double s) {
    if (s >= 0.0) {
        return 1.0 / (1.0 + std::exp(-s));
    }
    const double e = std::exp(s);
    return e / (1.0 + e);
}

LossResult weighted_ce_loss(std::span<const double> scores, std::span<const int> labels, const ClassWeights& weights) {
    if (scores.size() != labels.size()) {
        throw InputError("scores and labels differ in length");
    }
    check_labels(labels);
    LossResult out;
    out.gradient.resize(scores.size());
    double total_weight = 0.0;
    for (int y : labels) {
        total_weight += weights[y];
    }
    if (!(total_weight > 0.0)) {
        throw InputError("total class weight must be positive");
    }
    double loss = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i];
        const double w = weights[labels[i]];
        // -[y ln σ(s) + (1-y) ln(1-σ(s))] = softplus(s) - y s
        loss += w * (labels[i] == 1 ? softplus(-s) : softplus(s));
        out.gradient[i] = w * (sigmoid(s) - labels[i]) / total_weight;
    }
    out.loss = loss / total_weight;
    return out;
}

TrainResult train(const SparseMatrix& x, std::span<const int> y, const SparseMatrix& x_validation,
                  std::span<const int> y_validation, const TrainConfig& config) {
    config.validate();
    if (x.rows() != y.size() || x_validation.rows() != y_validation.size()) {
        throw InputError("feature rows and labels differ in count");
    }
    if (x.n_cols != x_validation.n_cols) {
        throw InputError("training and validation feature dimensions differ");
    }
    if (x.rows() == 0) {
        throw TrainingError("empty training set");
    }
    check_labels(y);
    check_labels(y_validation);
    try {
        require_both_classes(y_validation, "validation AUPRC");
    } catch (const UndefinedMetricError& e) {
        throw TrainingError(e.what());
    }

    TrainResult result;
    result.class_weights = config.class_weights ? *config.class_weights : ClassWeights::balanced(y);
    const ClassWeights& cw = result.class_weights;

    const std::size_t dim = x.n_cols;
    LinearModel model{std::vector<double>(dim, 0.0), 0.0};
    std::vector<double> m(dim + 1, 0.0);
    std::vector<double> v(dim + 1, 0.0);
    std::vector<double> grad(dim + 1, 0.0);

    const std::size_t n = x.rows();
    const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
    const std::size_t total_steps = steps_per_epoch * static_cast<std::size_t>(config.epochs);
    const auto warmup_steps =
        static_cast<std::size_t>(std::ceil(config.warmup_ratio * static_cast<double>(total_steps)));

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(config.seed);
    std::size_t step = 0;
    double best_auprc = -1.0;
    std::vector<double> batch_scores;
    std::vector<int> batch_labels;

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        rng.shuffle(std::span<std::size_t>(order));
        double loss_sum = 0.0;
        for (std::size_t start = 0; start < n; start += config.batch_size) {
            const std::size_t end = std::min(n, start + config.batch_size);
            batch_scores.clear();
            batch_labels.clear();
            for (std::size_t k = start; k < end; ++k) {
                batch_scores.push_back(row_score(model, x, order[k]));
                batch_labels.push_back(y[order[k]]);
            }
            const LossResult lr = weighted_ce_loss(batch_scores, batch_labels, cw);
            loss_sum += lr.loss;

            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t k = start; k < end; ++k) {
                const std::size_t r = order[k];
                const double g = lr.gradient[k - start];
                for (std::size_t e = x.row_offsets[r]; e < x.row_offsets[r + 1]; ++e) {
                    grad[x.indices[e]] += g * x.values[e];
                }
                grad[dim] += g;
            }

            const double rate = warmup_steps > 0 && step < warmup_steps
                                    ? config.learning_rate * static_cast<double>(step + 1) /
                                          static_cast<double>(warmup_steps)
                                    : config.learning_rate;
            ++step;
            const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
            const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
            for (std::size_t j = 0; j <= dim; ++j) {
                m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * grad[j];
                v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * grad[j] * grad[j];
                const double update = (m[j] / c1) / (std::sqrt(v[j] / c2) + config.epsilon);
                if (j < dim) {
                    model.weights[j] -= rate * (update + config.weight_decay * model.weights[j]);
                } else {
                    model.bias -= rate * update;
                }
            }
        }
        const auto val_scores = decision_scores(model, x_validation);
        EpochRecord record{epoch, loss_sum / static_cast<double>(steps_per_epoch), auprc(val_scores, y_validation)};
        result.history.push_back(record);
        if (record.validation_auprc > best_auprc) {
            best_auprc = record.validation_auprc;
            result.best_epoch = epoch;
            result.model = model;
        }
    }
    return result;
}

std::vector<double> decision_scores(const LinearModel& model, const SparseMatrix& x) {
    if (x.n_cols != model.weights.size()) {
        throw InputError("feature dimension " + std::to_string(x.n_cols) + " does not match model dimension " +
                         std::to_string(model.weights.size()));
    }
    std::vector<double> out(x.rows());
    for (std::size_t r = 0; r < x.rows(); ++r) {
        out[r] = row_score(model, x, r);
    }
    return out;
}

std::vector<double> predict_proba(const LinearModel& model, const SparseMatrix& x) {
    auto out = decision_scores(model, x);
    for (double& s : out) {
        s = sigmoid(s);
    }
    return out;
}

double auprc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) {
        throw InputError("scores and labels differ in length");
    }
    check_labels(labels);
    require_both_classes(labels, "AUPRC");
    for (double s : scores) {
        if (std::isnan(s)) {
            throw InputError("NaN score");
        }
    }
    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    const auto positives = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
    double hits = 0.0;
    double sum = 0.0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] == 1) {
            hits += 1.0;
            sum += hits / static_cast<double>(k + 1);
        }
    }
    return sum / positives;
}

MetricsReport classification_metrics(std::span<const double> probabilities, std::span<const int> labels,
                                     double threshold) {
    MetricsReport r;
    r.auprc = auprc(probabilities, labels);
    r.threshold = threshold;
    r.n = labels.size();
    auto& c = r.confusion;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const bool predicted = probabilities[i] >= threshold;
        if (labels[i] == 1) {
            ++(predicted ? c.tp : c.fn);
        } else {
            ++(predicted ? c.fp : c.tn);
        }
    }
    r.precision_1 = ratio(c.tp, c.tp + c.fp, "precision_1", r.undefined);
    r.recall_1 = ratio(c.tp, c.tp + c.fn, "recall_1", r.undefined);
    r.precision_0 = ratio(c.tn, c.tn + c.fn, "precision_0", r.undefined);
    r.recall_0 = ratio(c.tn, c.tn + c.fp, "recall_0", r.undefined);
    r.balanced_accuracy = (r.recall_0 + r.recall_1) / 2.0;
    r.f1_macro = (f1(r.precision_0, r.recall_0) + f1(r.precision_1, r.recall_1)) / 2.0;
    r.prevalence = static_cast<double>(c.tp + c.fn) / static_cast<double>(r.n);
    return r;
}

std::string metrics_to_json(const MetricsReport& r) {
    ordered_json j{
        {"schema_version", 1},
        {"balanced_accuracy", r.balanced_accuracy},
        {"auprc", r.auprc},
        {"f1_macro", r.f1_macro},
        {"precision_1", r.precision_1},
        {"recall_1", r.recall_1},
        {"precision_0", r.precision_0},
        {"recall_0", r.recall_0},
        {"prevalence", r.prevalence},
        {"threshold", r.threshold},
        {"n", r.n},
        {"confusion", {{"tp", r.confusion.tp}, {"fp", r.confusion.fp}, {"tn", r.confusion.tn}, {"fn", r.confusion.fn}}},
        {"undefined", r.undefined},
    };
    return j.dump(2) + "\n";
}

void save_model(const std::filesystem::path& path, const TrainResult& result, const TrainConfig& config,
                const std::string& vocabulary_sha256) {
    ordered_json history = ordered_json::array();
    for (const auto& h : result.history) {
        history.push_back({{"epoch", h.epoch}, {"train_loss", h.train_loss}, {"validation_auprc", h.validation_auprc}});
    }
    ordered_json j{
        {"schema_version", 1},
        {"kind", "logistic_regression"},
        {"vocabulary_sha256", vocabulary_sha256},
        {"dimension", result.model.weights.size()},
        {"train_config", config_json(config)},
        {"class_weights", {result.class_weights.negative, result.class_weights.positive}},
        {"best_epoch", result.best_epoch},
        {"history", std::move(history)},
        {"bias", result.model.bias},
        {"weights", result.model.weights},
    };
    write_file(path, j.dump() + "\n");
}

ModelArtifact load_model(const std::filesystem::path& path) {
    try {
        const auto j = nlohmann::json::parse(read_file(path));
        if (j.at("schema_version").get<int>() != 1) {
            throw ParseError(path.string(), 1, 1, "unsupported model schema version");
        }
        ModelArtifact a;
        a.vocabulary_sha256 = j.at("vocabulary_sha256").get<std::string>();
        a.result.model.bias = j.at("bias").get<double>();
        a.result.model.weights = j.at("weights").get<std::vector<double>>();
        if (a.result.model.weights.size() != j.at("dimension").get<std::size_t>()) {
            throw ParseError(path.string(), 1, 1, "weight count does not match dimension");
        }
        a.result.best_epoch = j.at("best_epoch").get<int>();
        const auto& cw = j.at("class_weights");
        a.result.class_weights = {cw.at(0).get<double>(), cw.at(1).get<double>()};
        for (const auto& h : j.at("history")) {
            a.result.history.push_back(
                {h.at("epoch").get<int>(), h.at("train_loss").get<double>(), h.at("validation_auprc").get<double>()});
        }
        const auto& c = j.at("train_config");
        a.config.epochs = c.at("epochs").get<int>();
        a.config.learning_rate = c.at("learning_rate").get<double>();
        a.config.weight_decay = c.at("weight_decay").get<double>();
        a.config.warmup_ratio = c.at("warmup_ratio").get<double>();
        a.config.batch_size = c.at("batch_size").get<std::size_t>();
        a.config.seed = c.at("seed").get<std::uint64_t>();
        a.config.beta1 = c.at("beta1").get<double>();
        a.config.beta2 = c.at("beta2").get<double>();
        a.config.epsilon = c.at("epsilon").get<double>();
        if (c.at("class_weights").is_array()) {
            a.config.class_weights = ClassWeights{c["class_weights"][0].get<double>(), c["class_weights"][1].get<double>()};
        }
        return a;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string(), 1, 1, e.what());
    }
}

} // namespace lifetraj
