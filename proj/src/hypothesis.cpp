#include "pcov/hypothesis.hpp"

#include <algorithm>
#include <numeric>
#include <set>
#include <unordered_map>

namespace pcov {
namespace {

std::string block_name(int j, int g) {
    return "(j=" + std::to_string(j + 1) + ", g=" + std::to_string(g + 1) + ")";
}

void check_sorted_unique(const std::vector<int>& s, const char* what) {
    if (s.empty()) throw ValidationError(std::string(what) + " is empty");
    for (std::size_t i = 1; i < s.size(); ++i) {
        if (s[i] == s[i - 1]) {
            throw ValidationError(std::string(what) + " repeats column " + std::to_string(s[i]));
        }
        if (s[i] < s[i - 1]) throw ValidationError(std::string(what) + " is not sorted");
    }
}

std::vector<int> merged(const std::vector<const std::vector<int>*>& parts) {
    std::vector<int> out;
    for (const auto* p : parts) out.insert(out.end(), p->begin(), p->end());
    std::sort(out.begin(), out.end());
    return out;
}

void require_layout(const Layout& layout) { validate_layout(layout); }

}  // namespace

IndexSetPair make_pair(std::vector<int> s1, std::vector<int> s2, std::optional<int> p) {
    std::sort(s1.begin(), s1.end());
    std::sort(s2.begin(), s2.end());
    IndexSetPair pair{std::move(s1), std::move(s2)};
    validate_pair(pair, p);
    return pair;
}

void validate_pair(const IndexSetPair& pair, std::optional<int> p) {
    check_sorted_unique(pair.s1, "S1");
    check_sorted_unique(pair.s2, "S2");
    const auto out_of_range = [&](int c) { return c < 0 || (p && c >= *p); };
    for (const auto* s : {&pair.s1, &pair.s2}) {
        if (auto it = std::find_if(s->begin(), s->end(), out_of_range); it != s->end()) {
            throw ValidationError("column " + std::to_string(*it) + " out of range" +
                                  (p ? " [0, " + std::to_string(*p) + ")" : std::string()));
        }
    }
    std::vector<int> common;
    std::set_intersection(pair.s1.begin(), pair.s1.end(), pair.s2.begin(), pair.s2.end(),
                          std::back_inserter(common));
    if (!common.empty()) {
        throw ValidationError("S1 and S2 overlap at column " + std::to_string(common.front()));
    }
}

int Layout::min_dimension() const {
    int top = -1;
    for (const auto& c : columns) {
        if (!c.empty()) top = std::max(top, c.back());
    }
    return top + 1;
}

void validate_layout(const Layout& layout, std::optional<int> p) {
    if (layout.J < 1 || layout.G < 1) {
        throw ValidationError("layout needs J >= 1 and G >= 1, got J=" + std::to_string(layout.J) +
                              ", G=" + std::to_string(layout.G));
    }
    const std::size_t expected = static_cast<std::size_t>(layout.J) * layout.G;
    if (layout.columns.size() != expected) {
        throw ValidationError("layout has " + std::to_string(layout.columns.size()) +
                              " column lists, expected J*G = " + std::to_string(expected));
    }
    std::unordered_map<int, std::size_t> owner;
    for (int j = 0; j < layout.J; ++j) {
        for (int g = 0; g < layout.G; ++g) {
            const std::size_t idx = static_cast<std::size_t>(j) * layout.G + g;
            const auto& cols = layout.columns[idx];
            const std::string name = "block " + block_name(j, g);
            check_sorted_unique(cols, name.c_str());
            for (int c : cols) {
                if (c < 0 || (p && c >= *p)) {
                    throw ValidationError(name + ": column " + std::to_string(c) + " out of range" +
                                          (p ? " [0, " + std::to_string(*p) + ")" : std::string()));
                }
                auto [it, fresh] = owner.emplace(c, idx);
                if (!fresh) {
                    const int oj = static_cast<int>(it->second) / layout.G;
                    const int og = static_cast<int>(it->second) % layout.G;
                    throw ValidationError("blocks " + block_name(oj, og) + " and " + block_name(j, g) +
                                          " share column " + std::to_string(c));
                }
            }
        }
    }
}

Layout stacked_layout(int J, const std::vector<int>& region_sizes) {
    Layout layout;
    layout.J = J;
    layout.G = static_cast<int>(region_sizes.size());
    int next = 0;
    for (int j = 0; j < J; ++j) {
        for (int size : region_sizes) {
            if (size < 1) throw ValidationError("region sizes must be positive");
            std::vector<int> cols(static_cast<std::size_t>(size));
            std::iota(cols.begin(), cols.end(), next);
            next += size;
            layout.columns.push_back(std::move(cols));
        }
    }
    validate_layout(layout);
    return layout;
}

std::string to_string(Problem problem) {
    switch (problem) {
        case Problem::a: return "a";
        case Problem::b: return "b";
        case Problem::c: return "c";
        case Problem::custom: return "custom";
    }
    return "custom";
}

Problem parse_problem(const std::string& text) {
    if (text == "a") return Problem::a;
    if (text == "b") return Problem::b;
    if (text == "c") return Problem::c;
    if (text == "custom") return Problem::custom;
    throw ValidationError("unknown problem '" + text + "' (expected a, b, c or custom)");
}

int HypothesisFamily::d() const {
    int total = 0;
    for (const auto& h : hypotheses) total += static_cast<int>(h.pairs.size());
    return total;
}

int HypothesisFamily::offset(int q) const {
    int total = 0;
    for (int i = 0; i < q; ++i) total += static_cast<int>(hypotheses.at(i).pairs.size());
    return total;
}

std::vector<IndexSetPair> HypothesisFamily::flattened() const {
    std::vector<IndexSetPair> out;
    out.reserve(static_cast<std::size_t>(d()));
    for (const auto& h : hypotheses) out.insert(out.end(), h.pairs.begin(), h.pairs.end());
    return out;
}

HypothesisFamily build_family_a(const Layout& layout) {
    require_layout(layout);
    if (layout.J < 2) throw ValidationError("problem (a) needs J >= 2 modalities");
    HypothesisFamily family{Problem::a, {}};
    for (int g = 0; g < layout.G; ++g) {
        Hypothesis h{"(" + std::to_string(g + 1) + ")", {}};
        for (int j = 0; j < layout.J; ++j) {
            std::vector<const std::vector<int>*> others;
            for (int o = 0; o < layout.J; ++o) {
                if (o != j) others.push_back(&layout.block(o, g));
            }
            h.pairs.push_back({layout.block(j, g), merged(others)});
        }
        family.hypotheses.push_back(std::move(h));
    }
    return family;
}

HypothesisFamily build_family_b(const Layout& layout) {
    require_layout(layout);
    if (layout.G < 2) throw ValidationError("problem (b) needs G >= 2 regions");
    HypothesisFamily family{Problem::b, {}};
    for (int g = 0; g < layout.G; ++g) {
        for (int h2 = g + 1; h2 < layout.G; ++h2) {
            Hypothesis h{"(" + std::to_string(g + 1) + "," + std::to_string(h2 + 1) + ")", {}};
            for (int j = 0; j < layout.J; ++j) h.pairs.push_back({layout.block(j, g), layout.block(j, h2)});
            family.hypotheses.push_back(std::move(h));
        }
    }
    return family;
}

HypothesisFamily build_family_c(const Layout& layout) {
    require_layout(layout);
    if (layout.J < 2) throw ValidationError("problem (c) needs J >= 2 modalities");
    HypothesisFamily family{Problem::c, {}};
    for (int g = 0; g < layout.G; ++g) {
        for (int h2 = g; h2 < layout.G; ++h2) {
            Hypothesis h{"(" + std::to_string(g + 1) + "," + std::to_string(h2 + 1) + ")", {}};
            for (int j = 0; j < layout.J; ++j) {
                for (int j2 = (g == h2 ? j + 1 : 0); j2 < layout.J; ++j2) {
                    if (j2 == j) continue;
                    h.pairs.push_back({layout.block(j, g), layout.block(j2, h2)});
                }
            }
            family.hypotheses.push_back(std::move(h));
        }
    }
    return family;
}

HypothesisFamily build_family_custom(std::vector<Hypothesis> hypotheses, std::optional<int> p) {
    if (hypotheses.empty()) throw ValidationError("custom family needs at least one hypothesis");
    for (std::size_t q = 0; q < hypotheses.size(); ++q) {
        auto& h = hypotheses[q];
        if (h.pairs.empty()) throw ValidationError("hypothesis " + std::to_string(q + 1) + " has no pairs");
        if (h.label.empty()) h.label = "(" + std::to_string(q + 1) + ")";
        for (auto& pair : h.pairs) {
            std::sort(pair.s1.begin(), pair.s1.end());
            std::sort(pair.s2.begin(), pair.s2.end());
            try {
                validate_pair(pair, p);
            } catch (const ValidationError& e) {
                throw ValidationError("hypothesis " + h.label + ": " + e.what());
            }
        }
        for (std::size_t a = 0; a < h.pairs.size(); ++a) {
            for (std::size_t b = a + 1; b < h.pairs.size(); ++b) {
                if (h.pairs[a] == h.pairs[b]) {
                    throw ValidationError("hypothesis " + h.label + " lists the same pair twice");
                }
            }
        }
    }
    return HypothesisFamily{Problem::custom, std::move(hypotheses)};
}

HypothesisFamily build_family(Problem problem, const Layout& layout) {
    switch (problem) {
        case Problem::a: return build_family_a(layout);
        case Problem::b: return build_family_b(layout);
        case Problem::c: return build_family_c(layout);
        case Problem::custom: break;
    }
    throw ValidationError("custom families are built from a pairs file, not a layout");
}

HypothesisFamily select_hypotheses(const HypothesisFamily& family, const std::vector<int>& keep) {
    HypothesisFamily out{family.problem, {}};
    for (int q : keep) out.hypotheses.push_back(family.hypotheses.at(q));
    return out;
}

}  // namespace pcov
