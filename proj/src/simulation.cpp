#include "pcov/simulation.hpp"

#include "pcov/diagnostics.hpp"
#include "pcov/distributed.hpp"
#include "pcov/parallel.hpp"
#include "pcov/random.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <mutex>
#include <numeric>
#include <set>
#include <sstream>

namespace pcov {
namespace {

constexpr double kKernelJitter = 1e-10;
constexpr double kRSquared = 0.95;
constexpr int kKmeansIterations = 50;

int exact_sqrt(int v) {
    const int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(v))));
    return r * r == v ? r : -1;
}

double dist2(const Point2& a, const Point2& b) {
    const double dx = a[0] - b[0], dy = a[1] - b[1];
    return dx * dx + dy * dy;
}

int nearest(const Point2& p, const std::vector<Point2>& centers) {
    int best = 0;
    double bd = dist2(p, centers[0]);
    for (std::size_t c = 1; c < centers.size(); ++c) {
        const double d = dist2(p, centers[c]);
        if (d < bd) {
            bd = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

RegionMap finish_regions(const std::vector<Point2>& points, std::vector<int> labels, int G) {
    RegionMap map;
    map.labels = std::move(labels);
    map.members.assign(static_cast<std::size_t>(G), {});
    map.centers.assign(static_cast<std::size_t>(G), Point2{0.0, 0.0});
    for (std::size_t v = 0; v < points.size(); ++v) map.members[map.labels[v]].push_back(static_cast<int>(v));
    for (int g = 0; g < G; ++g) {
        if (map.members[g].empty()) throw InternalError("region " + std::to_string(g) + " is empty");
        for (int v : map.members[g]) {
            map.centers[g][0] += points[v][0];
            map.centers[g][1] += points[v][1];
        }
        map.centers[g][0] /= static_cast<double>(map.members[g].size());
        map.centers[g][1] /= static_cast<double>(map.members[g].size());
    }
    return map;
}

// w_v w_v' exp(-decay |h_v - h_v'|^2), w_v = exp(-0.001 |h_v - centre|^2), over the given voxels.
Matrix weighted_kernel(const std::vector<Point2>& pts, const std::vector<int>& voxels, const Point2& centre,
                       double decay) {
    const int m = static_cast<int>(voxels.size());
    Vector w(m);
    for (int a = 0; a < m; ++a) w[a] = std::exp(-0.001 * dist2(pts[voxels[a]], centre));
    Matrix k(m, m);
    for (int a = 0; a < m; ++a) {
        for (int b = 0; b <= a; ++b) {
            const double v = w[a] * w[b] * std::exp(-decay * dist2(pts[voxels[a]], pts[voxels[b]]));
            k(a, b) = v;
            k(b, a) = v;
        }
    }
    k.diagonal().array() += kKernelJitter;
    return k;
}

Matrix cholesky_factor(const Matrix& k, const char* what) {
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) throw InternalError(std::string(what) + " is not positive definite");
    return llt.matrixL();
}

Matrix standard_normals(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    std::normal_distribution<double> normal;
    Matrix z(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) z(r, c) = normal(rng);
    }
    return z;
}

std::string percent(double x) {
    if (!std::isfinite(x)) return "NA";
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << 100.0 * x;
    return os.str();
}

}  // namespace

std::string to_string(Scenario s) {
    switch (s) {
        case Scenario::null: return "null";
        case Scenario::M1: return "M1";
        case Scenario::M2: return "M2";
        case Scenario::M3: return "M3";
        case Scenario::nonlinear: return "nonlinear";
    }
    return "null";
}

Scenario parse_scenario(const std::string& text) {
    if (text == "null") return Scenario::null;
    if (text == "M1") return Scenario::M1;
    if (text == "M2") return Scenario::M2;
    if (text == "M3") return Scenario::M3;
    if (text == "nonlinear" || text == "A2") return Scenario::nonlinear;
    throw ValidationError("unknown scenario '" + text + "' (expected null, M1, M2, M3, nonlinear)");
}

std::string to_string(TestKind kind) { return kind == TestKind::global ? "global" : "multiple"; }

TestKind parse_test_kind(const std::string& text) {
    if (text == "global") return TestKind::global;
    if (text == "multiple") return TestKind::multiple;
    throw ValidationError("unknown test '" + text + "' (expected global or multiple)");
}

std::vector<Point2> grid_points(int V) {
    const int side = exact_sqrt(V);
    if (side < 1) throw ValidationError("V=" + std::to_string(V) + " is not a perfect square");
    std::vector<Point2> pts(static_cast<std::size_t>(V));
    for (int v = 0; v < V; ++v) pts[v] = {static_cast<double>(v / side), static_cast<double>(v % side)};
    return pts;
}

RegionMap kmeans_partition(const std::vector<Point2>& points, int G, std::uint64_t seed) {
    const int V = static_cast<int>(points.size());
    if (G < 1 || G > V) {
        throw ValidationError("k-means needs 1 <= G <= V (G=" + std::to_string(G) + ", V=" + std::to_string(V) + ")");
    }
    Rng rng = make_stream(seed, {0x4b4d45414e53ULL});

    // k-means++ seeding.
    std::vector<Point2> centers;
    centers.push_back(points[std::uniform_int_distribution<int>(0, V - 1)(rng)]);
    std::vector<double> d2(static_cast<std::size_t>(V));
    while (static_cast<int>(centers.size()) < G) {
        double total = 0.0;
        for (int v = 0; v < V; ++v) {
            d2[v] = dist2(points[v], centers[nearest(points[v], centers)]);
            total += d2[v];
        }
        int pick = 0;
        if (total > 0.0) {
            double u = std::uniform_real_distribution<double>(0.0, total)(rng);
            while (pick < V - 1 && (u -= d2[pick]) > 0.0) ++pick;
            while (d2[pick] == 0.0) pick = (pick + 1) % V;
        } else {
            pick = std::uniform_int_distribution<int>(0, V - 1)(rng);
        }
        centers.push_back(points[pick]);
    }

    std::vector<int> labels(static_cast<std::size_t>(V), -1);
    for (int it = 0; it < kKmeansIterations; ++it) {
        bool changed = false;
        for (int v = 0; v < V; ++v) {
            const int c = nearest(points[v], centers);
            changed = changed || c != labels[v];
            labels[v] = c;
        }
        std::vector<Point2> sums(static_cast<std::size_t>(G), Point2{0.0, 0.0});
        std::vector<int> counts(static_cast<std::size_t>(G), 0);
        for (int v = 0; v < V; ++v) {
            sums[labels[v]][0] += points[v][0];
            sums[labels[v]][1] += points[v][1];
            ++counts[labels[v]];
        }
        for (int c = 0; c < G; ++c) {
            if (counts[c] > 0) {
                centers[c] = {sums[c][0] / counts[c], sums[c][1] / counts[c]};
                continue;
            }
            // Re-seed an empty cluster at the point farthest from its own centre.
            int far = 0;
            double fd = -1.0;
            for (int v = 0; v < V; ++v) {
                const double d = counts[labels[v]] > 1 ? dist2(points[v], centers[labels[v]]) : -1.0;
                if (d > fd) {
                    fd = d;
                    far = v;
                }
            }
            --counts[labels[far]];
            labels[far] = c;
            counts[c] = 1;
            centers[c] = points[far];
            changed = true;
        }
        if (!changed) break;
    }
    return finish_regions(points, std::move(labels), G);
}

RegionMap kmeans_partition(int V, int G, std::uint64_t seed) { return kmeans_partition(grid_points(V), G, seed); }

RegionMap tile_partition(int V, int G) {
    const int side = exact_sqrt(V);
    const int tiles = exact_sqrt(G);
    if (side < 1 || tiles < 1 || side % tiles != 0) {
        throw ValidationError("equal tiling needs square V and G with sqrt(G) dividing sqrt(V)");
    }
    const int width = side / tiles;
    std::vector<int> labels(static_cast<std::size_t>(V));
    for (int v = 0; v < V; ++v) labels[v] = (v / side / width) * tiles + (v % side) / width;
    return finish_regions(grid_points(V), std::move(labels), G);
}

void validate_sim_config(const SimConfig& c) {
    if (c.J < 2) throw ValidationError("simulation needs J >= 2");
    if (c.G < 1) throw ValidationError("simulation needs G >= 1");
    if (exact_sqrt(c.V) < 1) throw ValidationError("V must be a perfect square");
    if (c.G > c.V) throw ValidationError("G must not exceed V");
    if (c.replications < 1) throw ValidationError("replications must be >= 1");
    if (c.problem == Problem::custom) throw ValidationError("simulations use problem a, b or c");
    if (c.scenario == Scenario::nonlinear && c.J != 3) throw ValidationError("the nonlinear model is defined for J = 3");
    if (c.scenario == Scenario::M3 && c.J != 3) throw ValidationError("scenario M3 is defined for J = 3");
    if (c.n < c.options.B) throw ValidationError("n must be >= B");
    validate_options(c.options);
}

DataModel::DataModel(const SimConfig& config, std::uint64_t seed) : config_(config) {
    validate_sim_config(config);
    const auto pts = grid_points(config.V);
    const bool nonlinear = config.scenario == Scenario::nonlinear;
    regions_ = nonlinear ? tile_partition(config.V, config.G) : kmeans_partition(pts, config.G, stream_key(seed, {1}));

    std::vector<int> sizes;
    voxel_column_.assign(static_cast<std::size_t>(config.V), 0);
    int offset = 0;
    for (const auto& members : regions_.members) {
        sizes.push_back(static_cast<int>(members.size()));
        for (int v : members) voxel_column_[v] = offset++;
    }
    layout_ = stacked_layout(config.J, sizes);

    for (int g = 0; g < config.G; ++g) {
        const auto& members = regions_.members[g];
        if (!nonlinear) {
            fields_.push_back({members, cholesky_factor(weighted_kernel(pts, members, regions_.centers[g], 10.0),
                                                        "activation kernel")});
            continue;
        }
        // Subregions of about ten voxels, each with its own centre and kernel.
        const int S = std::max(1, static_cast<int>(members.size()) / 10);
        std::vector<Point2> sub_pts;
        for (int v : members) sub_pts.push_back(pts[v]);
        const RegionMap sub = kmeans_partition(sub_pts, S, stream_key(seed, {2, static_cast<std::uint64_t>(g)}));
        for (int s = 0; s < S; ++s) {
            std::vector<int> voxels;
            for (int idx : sub.members[s]) voxels.push_back(members[idx]);
            fields_.push_back({voxels, cholesky_factor(weighted_kernel(pts, voxels, sub.centers[s], 0.01),
                                                       "activation kernel")});
        }
    }

    if (!nonlinear) {
        const int JG = config.J * config.G;
        Matrix e(JG, JG);
        for (int j = 0; j < config.J; ++j)
            for (int g = 0; g < config.G; ++g)
                for (int jp = 0; jp < config.J; ++jp)
                    for (int gp = 0; gp < config.G; ++gp) e(j * config.G + g, jp * config.G + gp) = beta_cov(j, g, jp, gp);
        beta_factor_ = cholesky_factor(e, "covariance of beta");
    }
}

double DataModel::delta(int j, int jp, int g) const {
    switch (config_.scenario) {
        case Scenario::M1:
            return g < 4 ? (j == jp ? 1.0 : 0.0) + (std::abs(j - jp) == 1 ? 6.0 : 0.0) : 0.0;
        case Scenario::nonlinear: {
            double v = 0.0;
            if ((j == 0 && jp == 1) || (j == 2 && jp == 2)) v += 1.0;
            if (j == 1 && jp == 0 && g < 5) v += 1.0;
            if (j == 1 && jp == 1 && g >= 5) v += 1.0;
            return v;
        }
        default: return 0.0;
    }
}

double DataModel::beta_cov(int j, int g, int jp, int gp) const {
    const double same = (j == jp && g == gp) ? 1.0 : 0.0;
    switch (config_.scenario) {
        case Scenario::null:
        case Scenario::M1: return same;
        case Scenario::M2: {
            if (j != jp) return 0.0;
            const double adjacent = std::abs(g - gp) == 1 ? 1.0 : 0.0;
            return same + 0.4 * adjacent - 0.6 * adjacent * (j == 1 ? 1.0 : 0.0);
        }
        case Scenario::M3: {
            if (j > jp) return beta_cov(jp, gp, j, g);
            if (gp != g + 1) return same;
            double v = 0.0;
            if (j == 0 && jp == 1) v += 0.4;
            if (j == 0 && jp == 2) v -= 0.4;
            if (j == 1 && jp == 2) v += 0.2;
            return same + v;
        }
        case Scenario::nonlinear: return 0.0;
    }
    return same;
}

bool DataModel::fields_active(int j, int jp) const {
    for (int g = 0; g < config_.G; ++g) {
        if (delta(j, jp, g) != 0.0 || delta(jp, j, g) != 0.0) return true;
    }
    return false;
}

Matrix DataModel::generate(std::uint64_t seed, double* noise_variance) const {
    const int n = config_.n, J = config_.J, G = config_.G, V = config_.V;
    Rng rng = make_stream(seed, {0x44415441ULL});
    Matrix x = Matrix::Zero(n, static_cast<Eigen::Index>(J) * V);

    if (config_.scenario != Scenario::nonlinear) {
        const Matrix beta = standard_normals(rng, n, J * G) * beta_factor_.transpose();
        for (int j = 0; j < J; ++j)
            for (int g = 0; g < G; ++g)
                for (int v : regions_.members[g]) x.col(j * V + voxel_column_[v]) = beta.col(j * G + g);
    }

    for (int j = 0; j < J; ++j) {
        for (int jp = j; jp < J; ++jp) {
            if (!fields_active(j, jp)) continue;
            // alpha_{j,jp} over all voxels; the same realisation serves alpha_{jp,j}.
            Matrix alpha(n, V);
            for (const auto& f : fields_) {
                const Matrix a = standard_normals(rng, n, static_cast<Eigen::Index>(f.voxels.size())) * f.factor.transpose();
                for (std::size_t i = 0; i < f.voxels.size(); ++i) alpha.col(f.voxels[i]) = a.col(static_cast<Eigen::Index>(i));
            }
            const auto add = [&](int target, int other) {
                const bool squared = config_.scenario == Scenario::nonlinear && target == 1 && other == 0;
                for (int g = 0; g < G; ++g) {
                    const double dlt = delta(target, other, g);
                    if (dlt == 0.0) continue;
                    for (int v : regions_.members[g]) {
                        auto col = x.col(target * V + voxel_column_[v]);
                        if (squared) col.array() += dlt * alpha.col(v).array().square();
                        else col += dlt * alpha.col(v);
                    }
                }
            };
            add(j, jp);
            if (jp != j) add(jp, j);
        }
    }

    double sigma2 = 0.0;
    if (config_.scenario != Scenario::nonlinear) {
        const double mean = x.mean();
        const double var = (x.array() - mean).square().mean();
        sigma2 = var * (1.0 / kRSquared - 1.0);
        x += std::sqrt(sigma2) * standard_normals(rng, x.rows(), x.cols());
    }
    if (noise_variance) *noise_variance = sigma2;
    return x;
}

bool DataModel::dependent_blocks(int a, int b) const {
    if (a == b) return true;
    const int G = config_.G;
    const int j = a / G, g = a % G, jp = b / G, gp = b % G;
    if (config_.scenario != Scenario::nonlinear && beta_cov(j, g, jp, gp) != 0.0) return true;
    if (g != gp) return false;
    // Shared activation field alpha_{x,y} entering both blocks.
    const auto fields_of = [&](int jj) {
        std::set<std::pair<int, int>> out;
        for (int o = 0; o < config_.J; ++o) {
            if (delta(jj, o, g) != 0.0) out.emplace(std::min(jj, o), std::max(jj, o));
        }
        return out;
    };
    const auto fa = fields_of(j), fb = fields_of(jp);
    return std::any_of(fa.begin(), fa.end(), [&](const auto& f) { return fb.count(f) > 0; });
}

std::vector<bool> DataModel::null_hypotheses(const HypothesisFamily& family) const {
    std::vector<int> block_of(static_cast<std::size_t>(p()), -1);
    for (std::size_t b = 0; b < layout_.columns.size(); ++b) {
        for (int c : layout_.columns[b]) block_of[c] = static_cast<int>(b);
    }
    const auto blocks = [&](const std::vector<int>& cols) {
        std::set<int> out;
        for (int c : cols) out.insert(block_of.at(c));
        return out;
    };
    std::vector<bool> out;
    for (const auto& h : family.hypotheses) {
        bool independent = true;
        for (const auto& pair : h.pairs) {
            for (int a : blocks(pair.s1)) {
                for (int b : blocks(pair.s2)) independent = independent && !dependent_blocks(a, b);
            }
        }
        out.push_back(independent);
    }
    return out;
}

ExperimentResult run_experiment(const SimConfig& config, int threads) {
    validate_sim_config(config);
    const auto start = std::chrono::steady_clock::now();
    const DataModel model(config, stream_key(config.seed, {0x524547494f4eULL}));
    const HypothesisFamily family = build_family(config.problem, model.layout());
    const auto truth = model.null_hypotheses(family);

    ExperimentResult result;
    result.config = config;
    result.Q = family.Q();
    result.Q0 = static_cast<int>(std::count(truth.begin(), truth.end(), true));
    result.d = family.d();

    const std::size_t nL = config.options.L.size();
    const int R = config.replications;
    // Per replicate and L: rejection indicator (global) or FDP and power (multiple).
    Matrix first(R, static_cast<Eigen::Index>(nL)), second(R, static_cast<Eigen::Index>(nL));
    std::vector<char> failed(static_cast<std::size_t>(R), 0);
    std::mutex failure_mutex;

    ScopedWarningHandler quiet([](std::string_view) {});
#pragma omp parallel for schedule(dynamic) num_threads(resolve_threads(threads))
    for (int r = 0; r < R; ++r) {
        TestOptions opt = config.options;
        opt.seed = stream_key(config.seed, {static_cast<std::uint64_t>(r), 2});
        opt.threads = 1;
        try {
            const Matrix data = model.generate(stream_key(config.seed, {static_cast<std::uint64_t>(r), 1}));
            if (config.test == TestKind::global) {
                std::vector<bool> rejects;
                if (opt.K == 0) {
                    for (const auto& g : run_global_test(data, family, opt)) rejects.push_back(g.reject);
                } else {
                    for (const auto& g : run_dist_global_test(data, family, opt)) rejects.push_back(g.test.reject);
                }
                for (std::size_t l = 0; l < nL; ++l) first(r, static_cast<Eigen::Index>(l)) = rejects[l] ? 1.0 : 0.0;
            } else {
                const auto res = opt.K == 0 ? run_multiple_test(data, family, opt)
                                            : run_dist_multiple_test(data, family, opt);
                for (std::size_t l = 0; l < nL; ++l) {
                    const ErrorRates rates = error_rates(res[l], truth);
                    first(r, static_cast<Eigen::Index>(l)) = rates.fdp;
                    second(r, static_cast<Eigen::Index>(l)) = rates.power;
                }
            }
        } catch (const Error& e) {
            failed[r] = 1;
            std::lock_guard lock(failure_mutex);
            if (result.failures.size() < 5) result.failures.push_back("replicate " + std::to_string(r) + ": " + e.what());
        }
    }

    for (std::size_t l = 0; l < nL; ++l) {
        CellResult cell;
        cell.L = config.options.L[l];
        double a = 0.0, b = 0.0;
        for (int r = 0; r < R; ++r) {
            if (failed[r]) {
                ++cell.failed;
                continue;
            }
            ++cell.replications;
            a += first(r, static_cast<Eigen::Index>(l));
            b += second(r, static_cast<Eigen::Index>(l));
        }
        const double nan = std::numeric_limits<double>::quiet_NaN();
        const double m = cell.replications;
        if (config.test == TestKind::global) {
            cell.rejection_rate = m > 0 ? a / m : nan;
            cell.fdr = cell.power = nan;
        } else {
            cell.rejection_rate = nan;
            cell.fdr = m > 0 ? a / m : nan;
            cell.power = m > 0 && result.Q0 < result.Q ? b / m : nan;
        }
        result.cells.push_back(cell);
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::string format_experiment_csv(const ExperimentResult& r) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "scenario,problem,test,engine,K,J,G,V,n,Q,Q0,d,L,replications,failed,rejection_rate,fdr,power\n";
    const auto& c = r.config;
    for (const auto& cell : r.cells) {
        os << to_string(c.scenario) << ',' << to_string(c.problem) << ',' << to_string(c.test) << ','
           << (c.options.K == 0 ? "monolithic" : "distributed") << ',' << c.options.K << ',' << c.J << ',' << c.G
           << ',' << c.V << ',' << c.n << ',' << r.Q << ',' << r.Q0 << ',' << r.d << ',' << cell.L << ','
           << cell.replications << ',' << cell.failed << ',' << cell.rejection_rate << ',' << cell.fdr << ','
           << cell.power << '\n';
    }
    return os.str();
}

std::string format_experiment_text(const ExperimentResult& r) {
    const auto& c = r.config;
    std::ostringstream os;
    os << "scenario " << to_string(c.scenario) << ", problem (" << to_string(c.problem) << "), " << to_string(c.test)
       << " test, " << (c.options.K == 0 ? std::string("monolithic") : "distributed K=" + std::to_string(c.options.K))
       << "\n";
    os << "J=" << c.J << " G=" << c.G << " V=" << c.V << " n=" << c.n << " B=" << c.options.B << " N=" << c.options.N
       << " alpha=" << c.options.alpha << " Q=" << r.Q << " Q0=" << r.Q0 << " d=" << r.d << "\n";
    os << "values in percent over " << c.replications << " replicates";
    if (!r.cells.empty() && r.cells.front().failed > 0) os << " (" << r.cells.front().failed << " failed)";
    os << "\n\n";
    os << std::left << std::setw(12) << "";
    for (const auto& cell : r.cells) os << std::right << std::setw(10) << ("L=" + std::to_string(cell.L));
    os << "\n";
    const auto row = [&](const char* name, auto get) {
        os << std::left << std::setw(12) << name;
        for (const auto& cell : r.cells) os << std::right << std::setw(10) << percent(get(cell));
        os << "\n";
    };
    if (c.test == TestKind::global) {
        row(c.scenario == Scenario::null ? "size" : "power", [](const CellResult& x) { return x.rejection_rate; });
    } else {
        row("FDR", [](const CellResult& x) { return x.fdr; });
        row("power", [](const CellResult& x) { return x.power; });
    }
    return os.str();
}

}  // namespace pcov
