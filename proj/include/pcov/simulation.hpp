#pragma once

#include "pcov/hypothesis.hpp"
#include "pcov/multiple_test.hpp"
#include "pcov/options.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace pcov {

enum class Scenario { null, M1, M2, M3, nonlinear };

std::string to_string(Scenario scenario);
Scenario parse_scenario(const std::string& text);

enum class TestKind { global, multiple };

std::string to_string(TestKind kind);
TestKind parse_test_kind(const std::string& text);

using Point2 = std::array<double, 2>;

/// Voxel v sits at grid coordinates (v / side, v % side).
std::vector<Point2> grid_points(int V);

struct RegionMap {
    std::vector<int> labels;          // region id per voxel
    std::vector<Point2> centers;      // mean coordinate of each region
    std::vector<std::vector<int>> members;  // voxel ids per region, ascending

    int G() const { return static_cast<int>(centers.size()); }
};

/// Lloyd iterations (at most 50) from a k-means++ start on the given points.
/// An emptied cluster is re-seeded at the point farthest from its centre.
RegionMap kmeans_partition(const std::vector<Point2>& points, int G, std::uint64_t seed);
RegionMap kmeans_partition(int V, int G, std::uint64_t seed);

/// Equal-size square tiles: requires sqrt(G) and sqrt(V) integral with
/// sqrt(V) divisible by sqrt(G). Regions are numbered row-major.
RegionMap tile_partition(int V, int G);

struct SimConfig {
    int J = 3;
    int G = 16;
    int V = 1600;
    int n = 300;
    Scenario scenario = Scenario::null;
    Problem problem = Problem::a;
    TestKind test = TestKind::global;
    TestOptions options;  // options.K = 0 selects the monolithic engine
    int replications = 100;
    std::uint64_t seed = 1;
};

void validate_sim_config(const SimConfig& config);

/// Everything about a data-generating process that stays fixed across replicates.
class DataModel {
public:
    DataModel(const SimConfig& config, std::uint64_t seed);

    const RegionMap& regions() const { return regions_; }
    const Layout& layout() const { return layout_; }
    int p() const { return config_.J * config_.V; }

    /// delta_{j,j',g} (zero-based j, j', g).
    double delta(int j, int jp, int g) const;
    /// Entry of the covariance E of beta, indexed by (j, g) and (j', g').
    double beta_cov(int j, int g, int jp, int gp) const;

    /// n x (J V) sample in modality-major, region-minor column order. The noise
    /// variance picked by the R-squared calibration is stored in `noise_variance`
    /// when given (zero for the nonlinear model, which has no noise term).
    Matrix generate(std::uint64_t seed, double* noise_variance = nullptr) const;

    /// True when every pair of the hypothesis is independent by construction.
    std::vector<bool> null_hypotheses(const HypothesisFamily& family) const;

private:
    struct Field {
        std::vector<int> voxels;   // voxel ids covered by one factor
        Matrix factor;             // lower Cholesky factor of the weighted kernel
    };

    bool fields_active(int j, int jp) const;
    bool dependent_blocks(int a, int b) const;

    SimConfig config_;
    RegionMap regions_;
    Layout layout_;
    std::vector<int> voxel_column_;  // column offset within a modality for each voxel
    std::vector<Field> fields_;
    Matrix beta_factor_;            // (J G) x (J G) Cholesky factor of E
};

struct CellResult {
    int L = 1;
    int replications = 0;
    int failed = 0;           // replicates aborted by degenerate variances
    double rejection_rate = 0.0;  // global test
    double fdr = 0.0;             // multiple test
    double power = 0.0;           // multiple test
};

struct ExperimentResult {
    SimConfig config;
    int Q = 0;
    int Q0 = 0;
    int d = 0;
    std::vector<CellResult> cells;  // one per L
    double seconds = 0.0;
    std::vector<std::string> failures;  // first few failure messages
};

ExperimentResult run_experiment(const SimConfig& config, int threads = 0);

std::string format_experiment_csv(const ExperimentResult& result);
std::string format_experiment_text(const ExperimentResult& result);

}  // namespace pcov
