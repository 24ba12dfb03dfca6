#pragma once

#include "lifetraj/error.hpp"
#include "lifetraj/features.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace lifetraj {

class DimensionError : public Error {
public:
    using Error::Error;
};

// Rows are observations.
using DenseMatrix = Eigen::MatrixXd;

struct PcaModel {
    Eigen::VectorXd mean;
    DenseMatrix components;  // k x dim, orthonormal rows
    std::vector<double> explained_variance_ratio;

    DenseMatrix transform(const DenseMatrix& x) const;
    DenseMatrix inverse_transform(const DenseMatrix& z) const;
};

// Principal directions by descending covariance eigenvalue. Each component is
// signed so its largest-magnitude entry is positive.
PcaModel pca_fit(const DenseMatrix& x, std::size_t k);

enum class TsneInit { pca, random };

struct TsneConfig {
    double perplexity = 10.0;
    int iterations = 1000;
    double learning_rate = 200.0;
    double early_exaggeration = 12.0;
    int exaggeration_iterations = 250;
    double initial_momentum = 0.5;
    double final_momentum = 0.8;
    int momentum_switch_iteration = 250;
    double entropy_tolerance = 1e-5;
    TsneInit init = TsneInit::pca;
    std::uint64_t seed = 0;

    void validate(std::size_t n) const;
};

inline constexpr std::size_t kMaxTsnePoints = 50000;

struct Projection2D {
    DenseMatrix coordinates;  // n x 2, centred
    std::vector<double> row_entropies;
    double initial_kl = 0.0;
    double final_kl = 0.0;
};

Projection2D tsne(const DenseMatrix& x, const TsneConfig& config);

// Mean silhouette coefficient under Euclidean distance.
double silhouette_score(const DenseMatrix& points, const std::vector<int>& clusters);

// CSV with header x,y,label; optional SVG scatter with one colour per label.
void export_scatter(const DenseMatrix& coordinates, const std::vector<int>& labels,
                    const std::filesystem::path& csv_path,
                    const std::optional<std::filesystem::path>& svg_path = std::nullopt);
std::string render_svg(const DenseMatrix& coordinates, const std::vector<int>& labels);

// "rows cols" header then whitespace-separated values, row-major.
void save_dense(const std::filesystem::path& path, const DenseMatrix& m);
DenseMatrix load_dense(const std::filesystem::path& path);

// Dense copy of the given sparse columns, in the order listed.
DenseMatrix densify(const SparseMatrix& m, const std::vector<std::uint32_t>& columns);
DenseMatrix densify(const SparseMatrix& m);

} // namespace lifetraj
