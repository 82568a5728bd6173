#pragma once

#include "pcov/types.hpp"

#include <optional>
#include <string>
#include <vector>

namespace pcov {

/// Two disjoint, sorted, nonempty column-index sets whose independence is tested.
struct IndexSetPair {
    std::vector<int> s1;
    std::vector<int> s2;

    friend bool operator==(const IndexSetPair&, const IndexSetPair&) = default;
};

/// Sorts both sets and checks disjointness, non-emptiness and, when `p` is known,
/// the column range. Duplicate indices within a set are rejected.
IndexSetPair make_pair(std::vector<int> s1, std::vector<int> s2, std::optional<int> p = std::nullopt);
void validate_pair(const IndexSetPair& pair, std::optional<int> p = std::nullopt);

/// Modality x region layout of the stacked observation vector.
/// columns[j * G + g] holds the sorted voxel columns of Y_{j,g} (zero-based j, g).
struct Layout {
    int J = 0;
    int G = 0;
    std::vector<std::vector<int>> columns;

    const std::vector<int>& block(int j, int g) const { return columns.at(static_cast<std::size_t>(j) * G + g); }
    /// Smallest p compatible with the layout (max column + 1).
    int min_dimension() const;
};

/// Checks shape, per-block sorting/non-emptiness, range (when p is known),
/// and pairwise disjointness. Throws ValidationError naming the (j, g) blocks.
void validate_layout(const Layout& layout, std::optional<int> p = std::nullopt);

/// Builds the layout of X = (Y_{1,1}, ..., Y_{1,G}, ..., Y_{J,G}) from per-region voxel
/// counts: modality-major, region-minor, contiguous columns.
Layout stacked_layout(int J, const std::vector<int>& region_sizes);

enum class Problem { a, b, c, custom };

std::string to_string(Problem problem);
Problem parse_problem(const std::string& text);

struct Hypothesis {
    std::string label;
    std::vector<IndexSetPair> pairs;
};

struct HypothesisFamily {
    Problem problem = Problem::custom;
    std::vector<Hypothesis> hypotheses;

    int Q() const { return static_cast<int>(hypotheses.size()); }
    int d() const;
    /// Column of the first pair of hypothesis q in the flattened statistic vector.
    int offset(int q) const;
    int size(int q) const { return static_cast<int>(hypotheses.at(q).pairs.size()); }
    std::vector<IndexSetPair> flattened() const;
};

/// Problem (a): per region, each modality against the union of the others.
HypothesisFamily build_family_a(const Layout& layout);
/// Problem (b): per region pair g < g', same-modality pairs for every j.
HypothesisFamily build_family_b(const Layout& layout);
/// Problem (c): per region pair g <= g', cross-modality pairs j != j'
/// (ordered when g < g', unordered when g == g').
HypothesisFamily build_family_c(const Layout& layout);
HypothesisFamily build_family_custom(std::vector<Hypothesis> hypotheses, std::optional<int> p = std::nullopt);

HypothesisFamily build_family(Problem problem, const Layout& layout);

/// Restricts a family to the hypotheses in `keep` (in the given order).
HypothesisFamily select_hypotheses(const HypothesisFamily& family, const std::vector<int>& keep);

}  // namespace pcov
