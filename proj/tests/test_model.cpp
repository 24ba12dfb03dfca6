#include "lifetraj/model.hpp"
#include "lifetraj/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <json.hpp>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

using namespace lifetraj;

namespace {

// Precision at every positive, averaged, ranking by descending score with
// ties kept in input order.
double reference_ap(const std::vector<double>& scores, const std::vector<int>& labels) {
    std::vector<std::size_t> order(scores.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        order[i] = i;
    }
    for (std::size_t i = 1; i < order.size(); ++i) {
        for (std::size_t j = i; j > 0 && scores[order[j]] > scores[order[j - 1]]; --j) {
            std::swap(order[j], order[j - 1]);
        }
    }
    double sum = 0.0;
    int hits = 0;
    for (std::size_t k = 0; k < order.size(); ++k) {
        if (labels[order[k]] == 1) {
            ++hits;
            sum += static_cast<double>(hits) / static_cast<double>(k + 1);
        }
    }
    return sum / hits;
}

double naive_loss(const std::vector<double>& s, const std::vector<int>& y, const ClassWeights& w) {
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const double p = 1.0 / (1.0 + std::exp(-s[i]));
        num += -w[y[i]] * (y[i] == 1 ? std::log(p) : std::log(1.0 - p));
        den += w[y[i]];
    }
    return num / den;
}

// Two noisy separable clusters on disjoint feature sets.
void toy_data(Rng& rng, std::size_t n, SparseMatrix& x, std::vector<int>& y) {
    x = SparseMatrix{};
    x.n_cols = 20;
    y.clear();
    for (std::size_t i = 0; i < n; ++i) {
        const int label = rng.bernoulli(0.2) ? 1 : 0;
        SparseVector v;
        for (std::uint32_t c = 0; c < 20; ++c) {
            const bool informative = (label == 1) == (c < 10);
            if (rng.bernoulli(informative ? 0.6 : 0.1)) {
                v.indices.push_back(c);
                v.values.push_back(rng.uniform(0.1, 1.0));
            }
        }
        x.append_row(v);
        y.push_back(label);
    }
}

} // namespace

TEST_SUITE("model") {

TEST_CASE("average precision on the fixture") {
    std::ifstream in(testing::fixture("ap_fixture.tsv"));
    std::string header;
    std::getline(in, header);
    std::vector<double> s;
    std::vector<int> y;
    double score = 0.0;
    int label = 0;
    while (in >> score >> label) {
        s.push_back(score);
        y.push_back(label);
    }
    REQUIRE(s.size() == 4);
    CHECK(auprc(s, y) == doctest::Approx((1.0 + 2.0 / 3.0) / 2.0).epsilon(1e-12));
}

TEST_CASE("average precision matches the reference on random inputs") {
    Rng rng(17);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 2 + rng.below(200);
        std::vector<double> s(n);
        std::vector<int> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = static_cast<double>(rng.below(20)) / 20.0;  // plenty of ties
            y[i] = rng.bernoulli(0.3) ? 1 : 0;
        }
        y[0] = 1;
        y[1] = 0;
        CHECK(auprc(s, y) == doctest::Approx(reference_ap(s, y)).epsilon(1e-12));
    }
}

TEST_CASE("average precision edge cases") {
    CHECK(auprc(std::vector<double>{0.9, 0.1}, std::vector<int>{1, 0}) == 1.0);
    CHECK(auprc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 0}) == 0.5);
    CHECK_THROWS_AS(auprc(std::vector<double>{0.1, 0.9}, std::vector<int>{0, 0}), UndefinedMetricError);
    CHECK_THROWS_AS(auprc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 1}), UndefinedMetricError);
    CHECK_THROWS_AS(auprc(std::vector<double>{0.1, 0.9}, std::vector<int>{1, 2}), InputError);
    CHECK_THROWS_AS(auprc(std::vector<double>{0.1}, std::vector<int>{1, 0}), InputError);
    CHECK_THROWS_AS(auprc(std::vector<double>{std::nan(""), 0.2}, std::vector<int>{1, 0}), InputError);
}

TEST_CASE("weighted cross-entropy and its gradient") {
    Rng rng(4);
    const ClassWeights w{0.6, 3.0};
    std::vector<double> s(50);
    std::vector<int> y(50);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = rng.uniform(-6.0, 6.0);
        y[i] = rng.bernoulli(0.3) ? 1 : 0;
    }
    const LossResult r = weighted_ce_loss(s, y, w);
    CHECK(r.loss == doctest::Approx(naive_loss(s, y, w)).epsilon(1e-12));
    const double h = 1e-6;
    for (std::size_t i = 0; i < s.size(); ++i) {
        auto up = s;
        auto down = s;
        up[i] += h;
        down[i] -= h;
        const double numeric = (naive_loss(up, y, w) - naive_loss(down, y, w)) / (2 * h);
        CHECK(r.gradient[i] == doctest::Approx(numeric).epsilon(1e-6));
    }

    const LossResult extreme = weighted_ce_loss(std::vector<double>{800.0, -800.0}, std::vector<int>{0, 1}, w);
    CHECK(std::isfinite(extreme.loss));
    CHECK(extreme.loss == doctest::Approx(800.0));
    CHECK(std::isfinite(extreme.gradient[0]));
}

TEST_CASE("balanced class weights") {
    const std::vector<int> y = {1, 0, 0, 0};
    const ClassWeights w = ClassWeights::balanced(y);
    CHECK(w.positive == doctest::Approx(2.0));
    CHECK(w.negative == doctest::Approx(4.0 / 6.0));
    CHECK_THROWS_AS(ClassWeights::balanced(std::vector<int>{0, 0}), TrainingError);
}

TEST_CASE("training learns a separable signal and is reproducible") {
    Rng rng(21);
    SparseMatrix x, xv;
    std::vector<int> y, yv;
    toy_data(rng, 2000, x, y);
    toy_data(rng, 300, xv, yv);
    TrainConfig c;
    c.seed = 5;
    c.learning_rate = 0.05;
    c.epochs = 3;
    const TrainResult r = train(x, y, xv, yv, c);
    CHECK(r.history.size() == 3);
    CHECK(auprc(decision_scores(r.model, xv), yv) > 0.9);
    CHECK(r.best_epoch >= 1);
    CHECK(r.best_epoch <= 3);
    double best = 0.0;
    for (const auto& e : r.history) {
        best = std::max(best, e.validation_auprc);
    }
    CHECK(r.history[static_cast<std::size_t>(r.best_epoch - 1)].validation_auprc == best);

    const TrainResult again = train(x, y, xv, yv, c);
    CHECK(again.model == r.model);
    c.seed = 6;
    CHECK_FALSE(train(x, y, xv, yv, c).model == r.model);
}

TEST_CASE("training rejects bad input") {
    Rng rng(2);
    SparseMatrix x, xv;
    std::vector<int> y, yv;
    toy_data(rng, 50, x, y);
    toy_data(rng, 20, xv, yv);
    TrainConfig c;
    c.epochs = 0;
    CHECK_THROWS_AS(train(x, y, xv, yv, c), ConfigError);
    c = TrainConfig{};
    c.batch_size = 0;
    CHECK_THROWS_AS(train(x, y, xv, yv, c), ConfigError);
    c = TrainConfig{};
    std::vector<int> short_y(y.begin(), y.end() - 1);
    CHECK_THROWS_AS(train(x, short_y, xv, yv, c), InputError);
    std::vector<int> one_class(y.size(), 0);
    CHECK_THROWS_AS(train(x, one_class, xv, yv, c), TrainingError);
}

TEST_CASE("classification metrics") {
    const std::vector<double> p = {0.9, 0.8, 0.3, 0.2, 0.6, 0.5};
    const std::vector<int> y = {1, 0, 1, 0, 0, 1};
    const MetricsReport m = classification_metrics(p, y, 0.5);
    CHECK(m.confusion.tp == 2);
    CHECK(m.confusion.fp == 2);
    CHECK(m.confusion.tn == 1);
    CHECK(m.confusion.fn == 1);
    CHECK(m.precision_1 == doctest::Approx(0.5));
    CHECK(m.recall_1 == doctest::Approx(2.0 / 3.0));
    CHECK(m.precision_0 == doctest::Approx(0.5));
    CHECK(m.recall_0 == doctest::Approx(1.0 / 3.0));
    CHECK(m.balanced_accuracy == doctest::Approx(0.5));
    const double f1_1 = 2 * 0.5 * (2.0 / 3.0) / (0.5 + 2.0 / 3.0);
    const double f1_0 = 2 * 0.5 * (1.0 / 3.0) / (0.5 + 1.0 / 3.0);
    CHECK(m.f1_macro == doctest::Approx((f1_1 + f1_0) / 2));
    CHECK(m.prevalence == doctest::Approx(0.5));
    CHECK(m.n == 6);
    CHECK(m.undefined.empty());

    const MetricsReport none = classification_metrics(p, y, 0.99);
    CHECK(none.precision_1 == 0.0);
    CHECK(std::find(none.undefined.begin(), none.undefined.end(), "precision_1") != none.undefined.end());

    const auto j = nlohmann::json::parse(metrics_to_json(m));
    CHECK(j.at("schema_version") == 1);
    CHECK(j.at("auprc").get<double>() == doctest::Approx(m.auprc));
    CHECK(j.at("confusion").at("tp") == 2);
}

TEST_CASE("model artifact round-trip") {
    Rng rng(8);
    SparseMatrix x, xv;
    std::vector<int> y, yv;
    toy_data(rng, 200, x, y);
    toy_data(rng, 50, xv, yv);
    TrainConfig c;
    c.seed = 3;
    const TrainResult r = train(x, y, xv, yv, c);
    const auto dir = testing::scratch_dir("model");
    save_model(dir / "m.json", r, c, "abc");
    const ModelArtifact a = load_model(dir / "m.json");
    CHECK(a.result.model == r.model);
    CHECK(a.result.best_epoch == r.best_epoch);
    CHECK(a.vocabulary_sha256 == "abc");
    CHECK(a.config.seed == 3);
    CHECK(predict_proba(a.result.model, xv) == predict_proba(r.model, xv));
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(-1000.0) >= 0.0);
}

}
