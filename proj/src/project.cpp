#include "lifetraj/project.hpp"

#include "lifetraj/io.hpp"
#include "lifetraj/parallel.hpp"
#include "lifetraj/rng.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

namespace lifetraj {

namespace {

void orient(Eigen::VectorXd& v) {
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v[arg] < 0.0) {
        v = -v;
    }
}

std::string format_double(double v) {
    char buf[32];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

DenseMatrix squared_distances(const DenseMatrix& x) {
    const Eigen::VectorXd norms = x.rowwise().squaredNorm();
    DenseMatrix d = (-2.0 * (x * x.transpose())).colwise() + norms;
    d.rowwise() += norms.transpose();
    d = d.cwiseMax(0.0);
    d.diagonal().setZero();
    return d;
}

// Conditional affinities of row i for precision beta; returns the entropy.
double row_affinities(const DenseMatrix& d, Eigen::Index i, double beta, Eigen::VectorXd& p) {
    const Eigen::Index n = d.cols();
    double dmin = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j != i) {
            dmin = std::min(dmin, d(i, j));
        }
    }
    double sum = 0.0;
    double weighted = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
            p[j] = 0.0;
            continue;
        }
        const double shifted = d(i, j) - dmin;
        p[j] = std::exp(-beta * shifted);
        sum += p[j];
        weighted += shifted * p[j];
    }
    p /= sum;
    return std::log(sum) + beta * weighted / sum;
}

// Row-wise bandwidth search, then symmetrised joint probabilities.
DenseMatrix joint_probabilities(const DenseMatrix& x, const TsneConfig& config, std::vector<double>& entropies) {
    const Eigen::Index n = x.rows();
    const DenseMatrix d = squared_distances(x);
    const double target = std::log(config.perplexity);
    DenseMatrix cond(n, n);
    entropies.assign(static_cast<std::size_t>(n), 0.0);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
        const auto i = static_cast<Eigen::Index>(ui);
        Eigen::VectorXd p(n);
        double beta = 1.0;
        double lo = 0.0;
        double hi = std::numeric_limits<double>::infinity();
        double h = row_affinities(d, i, beta, p);
        for (int iter = 0; iter < 200 && std::abs(h - target) > config.entropy_tolerance; ++iter) {
            if (h > target) {
                lo = beta;
                beta = std::isinf(hi) ? beta * 2.0 : (beta + hi) / 2.0;
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
            h = row_affinities(d, i, beta, p);
        }
        entropies[ui] = h;
        cond.row(i) = p.transpose();
    });
    DenseMatrix joint = (cond + cond.transpose()) / (2.0 * static_cast<double>(n));
    joint = joint.cwiseMax(std::numeric_limits<double>::min());
    joint.diagonal().setZero();
    return joint;
}

struct GradientPass {
    double z = 0.0;
    double kl = 0.0;
};

// Gradient of KL(P || Q) for embedding y; Q is never materialised.
GradientPass gradient(const DenseMatrix& p, const DenseMatrix& y, double exaggeration, DenseMatrix& grad,
                      bool with_kl) {
    const Eigen::Index n = y.rows();
    std::vector<double> row_z(static_cast<std::size_t>(n), 0.0);
    DenseMatrix attract(n, 2);
    DenseMatrix repulse(n, 2);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
        const auto i = static_cast<Eigen::Index>(ui);
        double ax = 0.0, ay = 0.0, rx = 0.0, ry = 0.0, z = 0.0;
        const double yi0 = y(i, 0);
        const double yi1 = y(i, 1);
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) {
                continue;
            }
            const double dx = yi0 - y(j, 0);
            const double dy = yi1 - y(j, 1);
            const double q = 1.0 / (1.0 + dx * dx + dy * dy);
            z += q;
            const double pq = p(i, j) * q;
            ax += pq * dx;
            ay += pq * dy;
            rx += q * q * dx;
            ry += q * q * dy;
        }
        attract(i, 0) = ax;
        attract(i, 1) = ay;
        repulse(i, 0) = rx;
        repulse(i, 1) = ry;
        row_z[ui] = z;
    });
    GradientPass out;
    for (double z : row_z) {
        out.z += z;
    }
    grad = 4.0 * (exaggeration * attract - repulse / out.z);
    if (with_kl) {
        std::vector<double> row_kl(static_cast<std::size_t>(n), 0.0);
        parallel_for(static_cast<std::size_t>(n), [&](std::size_t ui) {
            const auto i = static_cast<Eigen::Index>(ui);
            double kl = 0.0;
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) {
                    continue;
                }
                const double dx = y(i, 0) - y(j, 0);
                const double dy = y(i, 1) - y(j, 1);
                const double q = 1.0 / (1.0 + dx * dx + dy * dy) / out.z;
                kl += p(i, j) * std::log(p(i, j) / q);
            }
            row_kl[ui] = kl;
        });
        for (double k : row_kl) {
            out.kl += k;
        }
    }
    return out;
}

} // namespace

DenseMatrix PcaModel::transform(const DenseMatrix& x) const {
    return (x.rowwise() - mean.transpose()) * components.transpose();
}

DenseMatrix PcaModel::inverse_transform(const DenseMatrix& z) const {
    return (z * components).rowwise() + mean.transpose();
}

PcaModel pca_fit(const DenseMatrix& x, std::size_t k) {
    const auto n = static_cast<std::size_t>(x.rows());
    const auto dim = static_cast<std::size_t>(x.cols());
    if (n < 2) {
        throw DimensionError("PCA needs at least two rows");
    }
    if (k == 0 || k > std::min(n - 1, dim)) {
        throw DimensionError("cannot extract " + std::to_string(k) + " components from a " + std::to_string(n) +
                             " x " + std::to_string(dim) + " matrix");
    }
    PcaModel model;
    model.mean = x.colwise().mean().transpose();
    const DenseMatrix centred = x.rowwise() - model.mean.transpose();
    const double scale = 1.0 / static_cast<double>(n - 1);
    const double total = centred.squaredNorm() * scale;
    model.components.resize(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(dim));

    Eigen::VectorXd values;
    DenseMatrix vectors;
    if (dim <= n) {
        const DenseMatrix cov = (centred.transpose() * centred) * scale;
        Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(cov);
        values = solver.eigenvalues();
        vectors = solver.eigenvectors();
    } else {
        // Dual form: eigenvectors of the n x n Gram matrix mapped back.
        const DenseMatrix gram = (centred * centred.transpose()) * scale;
        Eigen::SelfAdjointEigenSolver<DenseMatrix> solver(gram);
        values = solver.eigenvalues();
        vectors = centred.transpose() * solver.eigenvectors();
    }
    const Eigen::Index m = values.size();
    for (std::size_t c = 0; c < k; ++c) {
        const Eigen::Index col = m - 1 - static_cast<Eigen::Index>(c);
        Eigen::VectorXd v = vectors.col(col);
        v.normalize();
        orient(v);
        model.components.row(static_cast<Eigen::Index>(c)) = v.transpose();
        const double lambda = std::max(0.0, values[col]);
        model.explained_variance_ratio.push_back(total > 0.0 ? lambda / total : 0.0);
    }
    return model;
}

void TsneConfig::validate(std::size_t n) const {
    if (n > kMaxTsnePoints) {
        throw ConfigError("tsne.points", "exact t-SNE is limited to " + std::to_string(kMaxTsnePoints) + " points");
    }
    if (!(perplexity > 1.0) || !(perplexity < static_cast<double>(n) / 3.0)) {
        throw ConfigError("perplexity", "must lie in (1, n/3) = (1, " + format_double(static_cast<double>(n) / 3.0) +
                                            ") for " + std::to_string(n) + " points");
    }
    if (iterations < 250) {
        throw ConfigError("iterations", "must be at least 250");
    }
    if (!(learning_rate > 0.0)) {
        throw ConfigError("learning_rate", "must be positive");
    }
    if (!(early_exaggeration >= 1.0) || exaggeration_iterations < 0) {
        throw ConfigError("early_exaggeration", "factor must be at least 1 and duration non-negative");
    }
    if (!(entropy_tolerance > 0.0)) {
        throw ConfigError("entropy_tolerance", "must be positive");
    }
}

Projection2D tsne(const DenseMatrix& x, const TsneConfig& config) {
    const auto n = static_cast<std::size_t>(x.rows());
    config.validate(n);
    Projection2D out;
    const DenseMatrix p = joint_probabilities(x, config, out.row_entropies);
    const auto rows = static_cast<Eigen::Index>(n);

    DenseMatrix y(rows, 2);
    if (config.init == TsneInit::pca && x.cols() >= 2) {
        y = pca_fit(x, 2).transform(x);
        const double sd = std::sqrt((y.col(0).array() - y.col(0).mean()).square().sum() / static_cast<double>(n));
        y *= sd > 0.0 ? 1e-4 / sd : 1.0;
    } else {
        Rng rng(config.seed);
        for (Eigen::Index i = 0; i < rows; ++i) {
            y(i, 0) = 1e-4 * rng.normal();
            y(i, 1) = 1e-4 * rng.normal();
        }
    }
    y.rowwise() -= y.colwise().mean();

    DenseMatrix grad(rows, 2);
    DenseMatrix update = DenseMatrix::Zero(rows, 2);
    DenseMatrix gains = DenseMatrix::Ones(rows, 2);
    out.initial_kl = gradient(p, y, 1.0, grad, true).kl;
    for (int it = 0; it < config.iterations; ++it) {
        const double exaggeration = it < config.exaggeration_iterations ? config.early_exaggeration : 1.0;
        const double momentum = it < config.momentum_switch_iteration ? config.initial_momentum : config.final_momentum;
        gradient(p, y, exaggeration, grad, false);
        for (Eigen::Index i = 0; i < rows; ++i) {
            for (Eigen::Index c = 0; c < 2; ++c) {
                const bool same_sign = (grad(i, c) > 0.0) == (update(i, c) > 0.0);
                gains(i, c) = std::max(0.01, same_sign ? gains(i, c) * 0.8 : gains(i, c) + 0.2);
                update(i, c) = momentum * update(i, c) - config.learning_rate * gains(i, c) * grad(i, c);
            }
        }
        y += update;
        y.rowwise() -= y.colwise().mean();
    }
    out.final_kl = gradient(p, y, 1.0, grad, true).kl;
    out.coordinates = std::move(y);
    return out;
}

double silhouette_score(const DenseMatrix& points, const std::vector<int>& clusters) {
    const auto n = static_cast<std::size_t>(points.rows());
    if (clusters.size() != n) {
        throw InputError("cluster ids and points differ in count");
    }
    const std::set<int> ids(clusters.begin(), clusters.end());
    if (ids.size() < 2) {
        throw InputError("silhouette needs at least two clusters");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<int, std::pair<double, std::size_t>> sums;
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) {
                continue;
            }
            auto& s = sums[clusters[j]];
            s.first += (points.row(static_cast<Eigen::Index>(i)) - points.row(static_cast<Eigen::Index>(j))).norm();
            ++s.second;
        }
        const auto own = sums.find(clusters[i]);
        if (own == sums.end() || own->second.second == 0) {
            continue;  // singleton cluster scores 0
        }
        const double a = own->second.first / static_cast<double>(own->second.second);
        double b = std::numeric_limits<double>::infinity();
        for (const auto& [id, s] : sums) {
            if (id != clusters[i]) {
                b = std::min(b, s.first / static_cast<double>(s.second));
            }
        }
        total += (b - a) / std::max(a, b);
    }
    return total / static_cast<double>(n);
}

std::string render_svg(const DenseMatrix& coordinates, const std::vector<int>& labels) {
    constexpr double kSize = 800.0;
    constexpr double kMargin = 40.0;
    const Eigen::Index n = coordinates.rows();
    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (n > 0) {
        xmin = coordinates.col(0).minCoeff();
        xmax = coordinates.col(0).maxCoeff();
        ymin = coordinates.col(1).minCoeff();
        ymax = coordinates.col(1).maxCoeff();
    }
    const double span = std::max({xmax - xmin, ymax - ymin, 1e-12});
    auto px = [&](double v) { return kMargin + (v - xmin) / span * (kSize - 2 * kMargin); };
    auto py = [&](double v) { return kSize - kMargin - (v - ymin) / span * (kSize - 2 * kMargin); };
    auto colour = [](int label) { return label == 1 ? "#d62728" : "#1f77b4"; };
    auto name = [](int label) { return label == 1 ? "mover" : "non-mover"; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kSize << "\" height=\"" << kSize
        << "\" viewBox=\"0 0 " << kSize << ' ' << kSize << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g fill-opacity=\"0.6\">\n";
    char buf[128];
    for (Eigen::Index i = 0; i < n; ++i) {
        std::snprintf(buf, sizeof buf, "<circle cx=\"%.2f\" cy=\"%.2f\" r=\"2\" fill=\"%s\"/>\n",
                      px(coordinates(i, 0)), py(coordinates(i, 1)), colour(labels[static_cast<std::size_t>(i)]));
        svg << buf;
    }
    svg << "</g>\n";
    const std::set<int> present(labels.begin(), labels.end());
    double ly = 20.0;
    for (int label : present) {
        svg << "<g class=\"legend-entry\"><circle cx=\"20\" cy=\"" << ly << "\" r=\"5\" fill=\"" << colour(label)
            << "\"/><text x=\"32\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"12\">"
            << name(label) << "</text></g>\n";
        ly += 18.0;
    }
    svg << "</svg>\n";
    return svg.str();
}

void export_scatter(const DenseMatrix& coordinates, const std::vector<int>& labels,
                    const std::filesystem::path& csv_path, const std::optional<std::filesystem::path>& svg_path) {
    if (coordinates.cols() != 2 || static_cast<std::size_t>(coordinates.rows()) != labels.size()) {
        throw InputError("scatter export needs n x 2 coordinates and n labels");
    }
    {
        AtomicFile file(csv_path);
        auto& out = file.stream();
        out << "x,y,label\n";
        for (Eigen::Index i = 0; i < coordinates.rows(); ++i) {
            out << format_double(coordinates(i, 0)) << ',' << format_double(coordinates(i, 1)) << ','
                << labels[static_cast<std::size_t>(i)] << '\n';
        }
        file.commit();
    }
    if (svg_path) {
        write_file(*svg_path, render_svg(coordinates, labels));
    }
}

void save_dense(const std::filesystem::path& path, const DenseMatrix& m) {
    AtomicFile file(path);
    auto& out = file.stream();
    out << m.rows() << ' ' << m.cols() << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
            out << (j == 0 ? "" : " ") << format_double(m(i, j));
        }
        out << '\n';
    }
    file.commit();
}

DenseMatrix load_dense(const std::filesystem::path& path) {
    std::istringstream in(read_file(path));
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    if (!(in >> rows >> cols) || rows < 0 || cols < 0) {
        throw ParseError(path.string(), 1, 1, "expected 'rows cols' header");
    }
    DenseMatrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
            if (!(in >> m(i, j))) {
                throw ParseError(path.string(), static_cast<std::size_t>(i) + 2, 1,
                                 "expected " + std::to_string(cols) + " values");
            }
        }
    }
    return m;
}

DenseMatrix densify(const SparseMatrix& m, const std::vector<std::uint32_t>& columns) {
    std::vector<Eigen::Index> position(m.n_cols, -1);
    for (std::size_t c = 0; c < columns.size(); ++c) {
        if (columns[c] >= m.n_cols) {
            throw DimensionError("column " + std::to_string(columns[c]) + " out of range");
        }
        position[columns[c]] = static_cast<Eigen::Index>(c);
    }
    DenseMatrix out = DenseMatrix::Zero(static_cast<Eigen::Index>(m.rows()), static_cast<Eigen::Index>(columns.size()));
    for (std::size_t r = 0; r < m.rows(); ++r) {
        for (std::size_t k = m.row_offsets[r]; k < m.row_offsets[r + 1]; ++k) {
            const Eigen::Index c = position[m.indices[k]];
            if (c >= 0) {
                out(static_cast<Eigen::Index>(r), c) = m.values[k];
            }
        }
    }
    return out;
}

DenseMatrix densify(const SparseMatrix& m) {
    std::vector<std::uint32_t> all(m.n_cols);
    for (std::size_t c = 0; c < m.n_cols; ++c) {
        all[c] = static_cast<std::uint32_t>(c);
    }
    return densify(m, all);
}

} // namespace lifetraj
