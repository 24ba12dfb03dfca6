#pragma once

#include "lifetraj/error.hpp"
#include "lifetraj/features.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace lifetraj {

class TrainingError : public Error {
public:
    using Error::Error;
};

class UndefinedMetricError : public Error {
public:
    using Error::Error;
};

struct ClassWeights {
    double negative = 1.0;
    double positive = 1.0;

    // w_c = N / (2 N_c); throws TrainingError when a class is absent.
    static ClassWeights balanced(std::span<const int> labels);
    double operator[](int label) const { return label == 1 ? positive : negative; }
};

struct TrainConfig {
    int epochs = 2;
    double learning_rate = 5e-4;
    double weight_decay = 0.01;
    double warmup_ratio = 0.05;
    std::size_t batch_size = 32;
    std::uint64_t seed = 0;
    std::optional<ClassWeights> class_weights;  // unset: balanced from the training labels
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const;
};

struct LinearModel {
    std::vector<double> weights;
    double bias = 0.0;

    bool operator==(const LinearModel&) const = default;
};

struct LossResult {
    double loss = 0.0;
    std::vector<double> gradient;  // d loss / d score_i
};

// Weighted binary cross-entropy on raw scores (logits), normalised by the
// total weight. Stable for |score| far beyond the float exponent range.
LossResult weighted_ce_loss(std::span<const double> scores, std::span<const int> labels, const ClassWeights& weights);

struct EpochRecord {
    int epoch = 0;
    double train_loss = 0.0;
    double validation_auprc = 0.0;
};

struct TrainResult {
    LinearModel model;  // parameters after the best epoch
    int best_epoch = 0;
    ClassWeights class_weights;
    std::vector<EpochRecord> history;
};

TrainResult train(const SparseMatrix& x, std::span<const int> y, const SparseMatrix& x_validation,
                  std::span<const int> y_validation, const TrainConfig& config);

std::vector<double> decision_scores(const LinearModel& model, const SparseMatrix& x);
std::vector<double> predict_proba(const LinearModel& model, const SparseMatrix& x);

double sigmoid(double s);

// Average precision without interpolation; ties in score keep input order.
double auprc(std::span<const double> scores, std::span<const int> labels);

struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t tn = 0;
    std::size_t fn = 0;
};

struct MetricsReport {
    double balanced_accuracy = 0.0;
    double auprc = 0.0;
    double f1_macro = 0.0;
    double precision_1 = 0.0;
    double recall_1 = 0.0;
    double precision_0 = 0.0;
    double recall_0 = 0.0;
    double prevalence = 0.0;
    double threshold = 0.5;
    std::size_t n = 0;
    ConfusionMatrix confusion;
    // Names of ratios whose denominator was zero (reported as 0).
    std::vector<std::string> undefined;
};

MetricsReport classification_metrics(std::span<const double> probabilities, std::span<const int> labels,
                                     double threshold = 0.5);

std::string metrics_to_json(const MetricsReport& report);

struct ModelArtifact {
    TrainResult result;
    TrainConfig config;
    std::string vocabulary_sha256;
};

void save_model(const std::filesystem::path& path, const TrainResult& result, const TrainConfig& config,
                const std::string& vocabulary_sha256);
ModelArtifact load_model(const std::filesystem::path& path);

} // namespace lifetraj
