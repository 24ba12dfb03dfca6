#include "lifetraj/io.hpp"
#include "lifetraj/project.hpp"
#include "lifetraj/rng.hpp"

#include "support.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <algorithm>
#include <cmath>

using namespace lifetraj;

namespace {

DenseMatrix random_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    DenseMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            m(i, j) = rng.normal() * (1.0 + static_cast<double>(j % 5));
        }
    }
    return m;
}

// Three well-separated Gaussian blobs in `dim` dimensions.
DenseMatrix blobs(Rng& rng, Eigen::Index per, Eigen::Index dim, std::vector<int>& labels) {
    DenseMatrix x(3 * per, dim);
    labels.clear();
    for (Eigen::Index c = 0; c < 3; ++c) {
        for (Eigen::Index i = 0; i < per; ++i) {
            for (Eigen::Index j = 0; j < dim; ++j) {
                x(c * per + i, j) = rng.normal() + (j % 3 == c ? 10.0 : 0.0);
            }
            labels.push_back(static_cast<int>(c));
        }
    }
    return x;
}

void check_against_svd(const DenseMatrix& x, std::size_t k) {
    const PcaModel pca = pca_fit(x, k);
    const DenseMatrix centred = x.rowwise() - x.colwise().mean();
    Eigen::JacobiSVD<DenseMatrix> svd(centred, Eigen::ComputeThinV);
    const Eigen::VectorXd s2 = svd.singularValues().array().square();
    for (std::size_t c = 0; c < k; ++c) {
        const auto ci = static_cast<Eigen::Index>(c);
        CHECK(std::abs(pca.components.row(ci).dot(svd.matrixV().col(ci))) == doctest::Approx(1.0).epsilon(1e-8));
        CHECK(pca.explained_variance_ratio[c] == doctest::Approx(s2[ci] / s2.sum()).epsilon(1e-8));
        Eigen::Index arg = 0;
        pca.components.row(ci).cwiseAbs().maxCoeff(&arg);
        CHECK(pca.components(ci, arg) > 0.0);
    }
    const DenseMatrix gram = pca.components * pca.components.transpose();
    CHECK((gram - DenseMatrix::Identity(gram.rows(), gram.cols())).norm() < 1e-9);
}

} // namespace

TEST_SUITE("project") {

TEST_CASE("PCA agrees with an SVD of the centred data") {
    Rng rng(1);
    check_against_svd(random_matrix(rng, 60, 8), 5);   // covariance route
    check_against_svd(random_matrix(rng, 12, 40), 6);  // Gram route
}

TEST_CASE("PCA reconstructs exactly with all components") {
    Rng rng(2);
    const DenseMatrix x = random_matrix(rng, 30, 6);
    const PcaModel pca = pca_fit(x, 6);
    CHECK((pca.inverse_transform(pca.transform(x)) - x).norm() < 1e-9);
    double total = 0.0;
    for (double r : pca.explained_variance_ratio) {
        total += r;
    }
    CHECK(total == doctest::Approx(1.0));
    CHECK_THROWS_AS(pca_fit(x, 0), DimensionError);
    CHECK_THROWS_AS(pca_fit(x, 7), DimensionError);
    CHECK_THROWS_AS(pca_fit(x.topRows(1), 1), DimensionError);
}

TEST_CASE("PCA on isotropic and correlated data") {
    Rng rng(7);
    DenseMatrix iso(10000, 5);
    for (Eigen::Index i = 0; i < iso.size(); ++i) {
        iso(i) = rng.normal();
    }
    for (double r : pca_fit(iso, 5).explained_variance_ratio) {
        CHECK(std::abs(r - 0.2) < 0.02);
    }

    DenseMatrix two(500, 2);
    for (Eigen::Index i = 0; i < two.rows(); ++i) {
        const double a = rng.normal();
        two(i, 0) = a + 0.3 * rng.normal();
        two(i, 1) = 2.0 * a + 0.3 * rng.normal();
    }
    const DenseMatrix centred = two.rowwise() - two.colwise().mean();
    const DenseMatrix cov = centred.transpose() * centred / 499.0;
    // Leading eigenvector of [[a, b], [b, c]] is (b, lambda - a).
    const double a = cov(0, 0), b = cov(0, 1), c = cov(1, 1);
    const double lambda = (a + c) / 2.0 + std::sqrt((a - c) * (a - c) / 4.0 + b * b);
    Eigen::Vector2d v(b, lambda - a);
    v.normalize();
    if (std::abs(v[1]) > std::abs(v[0]) ? v[1] < 0 : v[0] < 0) {
        v = -v;
    }
    const PcaModel pca = pca_fit(two, 1);
    CHECK(std::abs(pca.components(0, 0) - v[0]) < 1e-8);
    CHECK(std::abs(pca.components(0, 1) - v[1]) < 1e-8);
}

TEST_CASE("t-SNE hits the target perplexity and separates clusters") {
    const DenseMatrix x = load_dense(testing::fixture("two_clusters.txt"));
    std::vector<int> labels(200, 0);
    std::fill(labels.begin() + 100, labels.end(), 1);
    TsneConfig c;
    c.perplexity = 30;
    c.seed = 4;
    const Projection2D p = tsne(x, c);
    REQUIRE(p.coordinates.rows() == 200);
    REQUIRE(p.coordinates.cols() == 2);
    CHECK(p.coordinates.allFinite());
    for (double h : p.row_entropies) {
        CHECK(std::abs(h - std::log(30.0)) < 1e-4);
    }
    CHECK(p.final_kl < p.initial_kl);
    CHECK(silhouette_score(p.coordinates, labels) > 0.9);
    CHECK(std::abs(p.coordinates.col(0).mean()) < 1e-6);
    CHECK(std::abs(p.coordinates.col(1).mean()) < 1e-6);

    const Projection2D again = tsne(x, c);
    CHECK(again.coordinates == p.coordinates);
}

TEST_CASE("duplicated rows land on nearly the same point") {
    Rng rng(3);
    std::vector<int> labels;
    DenseMatrix x = blobs(rng, 30, 6, labels);
    x.row(1) = x.row(0);
    TsneConfig c;
    c.seed = 2;
    const Projection2D p = tsne(x, c);
    double spread = 0.0;
    for (Eigen::Index i = 0; i < 30; ++i) {
        spread = std::max(spread, (p.coordinates.row(i) - p.coordinates.topRows(30).colwise().mean()).norm());
    }
    CHECK((p.coordinates.row(0) - p.coordinates.row(1)).norm() < spread / 100.0);
}

TEST_CASE("t-SNE random initialisation follows the seed") {
    Rng rng(5);
    std::vector<int> labels;
    const DenseMatrix x = blobs(rng, 15, 6, labels);
    TsneConfig c;
    c.init = TsneInit::random;
    c.seed = 1;
    c.iterations = 300;
    const Projection2D a = tsne(x, c);
    c.seed = 2;
    const Projection2D b = tsne(x, c);
    CHECK_FALSE(a.coordinates == b.coordinates);
}

TEST_CASE("t-SNE configuration is checked") {
    TsneConfig c;
    CHECK_THROWS_AS(c.validate(kMaxTsnePoints + 1), ConfigError);
    CHECK_THROWS_AS(c.validate(20), ConfigError);  // perplexity 10 >= 20 / 3
    c.perplexity = 1.0;
    CHECK_THROWS_AS(c.validate(100), ConfigError);
    c = TsneConfig{};
    c.iterations = 10;
    CHECK_THROWS_AS(c.validate(100), ConfigError);
    CHECK_NOTHROW(TsneConfig{}.validate(100));
}

TEST_CASE("silhouette score by hand") {
    DenseMatrix pts(4, 1);
    pts << 0.0, 1.0, 10.0, 11.0;
    // Every point lies at distance 1 from its cluster mate.
    const double expected = ((10.5 - 1) / 10.5 + (9.5 - 1) / 9.5 + (9.5 - 1) / 9.5 + (10.5 - 1) / 10.5) / 4.0;
    CHECK(silhouette_score(pts, {0, 0, 1, 1}) == doctest::Approx(expected));
    CHECK_THROWS_AS(silhouette_score(pts, {0, 0, 0, 0}), InputError);
}

TEST_CASE("scatter export") {
    DenseMatrix xy(3, 2);
    xy << 0.0, 0.0, 1.0, 2.0, -1.5, 0.25;
    const auto dir = testing::scratch_dir("project");
    export_scatter(xy, {0, 1, 0}, dir / "p.csv", dir / "p.svg");
    const std::string csv = read_file(dir / "p.csv");
    CHECK(csv.rfind("x,y,label\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
    const std::string svg = read_file(dir / "p.svg");
    CHECK(svg.find("#d62728") != std::string::npos);
    CHECK(svg.find("#1f77b4") != std::string::npos);
    std::size_t legends = 0;
    for (auto pos = svg.find("legend-entry"); pos != std::string::npos; pos = svg.find("legend-entry", pos + 1)) {
        ++legends;
    }
    CHECK(legends == 2);
    const std::string only_movers = render_svg(xy, {1, 1, 1});
    CHECK(only_movers.find("non-mover") == std::string::npos);
    const std::string only_stayers = render_svg(xy, {0, 0, 0});
    std::size_t entries = 0;
    for (auto pos = only_stayers.find("legend-entry"); pos != std::string::npos;
         pos = only_stayers.find("legend-entry", pos + 1)) {
        ++entries;
    }
    CHECK(entries == 1);
    CHECK_THROWS_AS(export_scatter(xy, {0, 1}, dir / "bad.csv"), InputError);
}

TEST_CASE("dense matrices round-trip and densify") {
    Rng rng(6);
    const DenseMatrix m = random_matrix(rng, 5, 3);
    const auto dir = testing::scratch_dir("dense");
    save_dense(dir / "m.txt", m);
    CHECK(load_dense(dir / "m.txt") == m);

    SparseMatrix s;
    s.n_cols = 4;
    s.append_row(SparseVector{{1, 3}, {0.5, 2.0}});
    s.append_row(SparseVector{{0}, {1.0}});
    const DenseMatrix d = densify(s);
    CHECK(d.rows() == 2);
    CHECK(d(0, 3) == 2.0);
    CHECK(d(1, 1) == 0.0);
    const DenseMatrix picked = densify(s, {3, 0});
    CHECK(picked(0, 0) == 2.0);
    CHECK(picked(1, 1) == 1.0);
    CHECK_THROWS_AS(densify(s, {4}), DimensionError);
}

}
