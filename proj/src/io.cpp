#include "pcov/io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <limits>
#include <sstream>

namespace pcov {
namespace {

using nlohmann::json;

constexpr char kMagic[4] = {'P', 'C', 'V', '1'};

std::uint64_t read_u64_le(const unsigned char* p) {
    std::uint64_t v = 0;
    for (int i = 7; i >= 0; --i) v = (v << 8) | p[i];
    return v;
}

void write_u64_le(std::ostream& os, std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

std::string trim(std::string_view s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto comma = line.find(',', start);
        out.push_back(trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos
                                                                                            : comma - start)));
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    return out;
}

ObservationMatrix load_binary(const std::string& path, const std::vector<unsigned char>& bytes) {
    if (bytes.size() < 20) {
        throw LoadError(path + ": binary header needs 20 bytes, file has " + std::to_string(bytes.size()));
    }
    const std::uint64_t n = read_u64_le(bytes.data() + 4);
    const std::uint64_t p = read_u64_le(bytes.data() + 12);
    if (n == 0 || p == 0) throw LoadError(path + ": empty matrix (n=" + std::to_string(n) + ", p=" + std::to_string(p) + ")");
    const std::uint64_t expected = n * p * 8;
    if (p != 0 && expected / p / 8 != n) throw LoadError(path + ": header dimensions overflow");
    const std::uint64_t actual = bytes.size() - 20;
    if (actual != expected) {
        throw LoadError(path + ": expected " + std::to_string(expected) + " payload bytes for " + std::to_string(n) +
                        "x" + std::to_string(p) + ", found " + std::to_string(actual));
    }
    ObservationMatrix x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
    const unsigned char* data = bytes.data() + 20;
    for (std::uint64_t r = 0; r < n; ++r) {
        for (std::uint64_t c = 0; c < p; ++c) {
            const double v = std::bit_cast<double>(read_u64_le(data + 8 * (r * p + c)));
            if (!std::isfinite(v)) {
                throw LoadError(path + ": non-finite value at row " + std::to_string(r + 1) + ", column " +
                                std::to_string(c + 1));
            }
            x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = v;
        }
    }
    return x;
}

ObservationMatrix load_csv(const std::string& path, const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line)) throw LoadError(path + ": empty file");
    const std::size_t p = split_csv(line).size();
    std::vector<double> values;
    std::size_t rows = 0, line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != p) {
            throw LoadError(path + ": line " + std::to_string(line_no) + " has " + std::to_string(fields.size()) +
                            " fields, header has " + std::to_string(p));
        }
        for (std::size_t c = 0; c < p; ++c) {
            const std::string& f = fields[c];
            double v = 0.0;
            const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), v);
            if (ec != std::errc() || ptr != f.data() + f.size() || f.empty()) {
                throw LoadError(path + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                ": cannot parse '" + f + "'");
            }
            if (!std::isfinite(v)) {
                throw LoadError(path + ": line " + std::to_string(line_no) + ", column " + std::to_string(c + 1) +
                                ": non-finite value");
            }
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) throw LoadError(path + ": no data rows after the header");
    ObservationMatrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(p));
    for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < p; ++c) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = values[r * p + c];
    return x;
}

json read_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw LoadError(path + ": cannot open");
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw LoadError(path + ": invalid JSON: " + e.what());
    }
}

std::vector<int> int_list(const json& v, const std::string& what) {
    if (!v.is_array()) throw ValidationError(what + " must be an array of integers");
    std::vector<int> out;
    for (const auto& x : v) {
        if (!x.is_number_integer()) throw ValidationError(what + " must contain integers only");
        out.push_back(x.get<int>());
    }
    return out;
}

std::vector<int> parse_int_list(const json& v, const std::string& what) {
    if (v.is_number_integer()) return {v.get<int>()};
    if (v.is_string()) {
        std::vector<int> out;
        std::stringstream ss(v.get<std::string>());
        std::string tok;
        while (std::getline(ss, tok, ',')) out.push_back(std::stoi(tok));
        return out;
    }
    return int_list(v, what);
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void dump(const json& v, std::string& out) {
    switch (v.type()) {
        case json::value_t::object: {
            out += '{';
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {  // std::map keeps keys sorted
                if (!first) out += ',';
                first = false;
                out += json(it.key()).dump();
                out += ':';
                dump(it.value(), out);
            }
            out += '}';
            break;
        }
        case json::value_t::array: {
            out += '[';
            for (std::size_t i = 0; i < v.size(); ++i) {
                if (i) out += ',';
                dump(v[i], out);
            }
            out += ']';
            break;
        }
        case json::value_t::number_float: {
            const double d = v.get<double>();
            if (!std::isfinite(d)) {
                out += "null";
                break;
            }
            char buf[32];
            std::snprintf(buf, sizeof buf, "%.17g", d);
            out += buf;
            break;
        }
        default: out += v.dump();
    }
}

json global_json(const GlobalTestResult& g) {
    return {{"L", g.L},
            {"N", g.N},
            {"alpha", g.alpha},
            {"critical_value", number_or_null(g.critical_value)},
            {"mc_pvalue", number_or_null(g.mc_pvalue)},
            {"reject", g.reject},
            {"seed", g.seed},
            {"statistic", g.statistic}};
}

json multiple_json(const MultipleTestResult& m) {
    json records = json::array();
    std::vector<bool> rejected(m.marginals.size(), false);
    for (int q : m.rejected) rejected[q] = true;
    for (const auto& r : m.marginals) {
        records.push_back({{"q", r.q + 1},
                           {"label", r.label},
                           {"statistic", r.statistic},
                           {"L_used", r.L_used},
                           {"raw_pvalue", number_or_null(r.raw_pvalue)},
                           {"pvalue", number_or_null(r.pvalue)},
                           {"score", number_or_null(r.score)},
                           {"rejected", static_cast<bool>(rejected[r.q])}});
    }
    json ids = json::array();
    for (int q : m.rejected) ids.push_back(q + 1);
    return {{"L", m.L},
            {"N", m.N},
            {"alpha", m.alpha},
            {"t_hat", number_or_null(m.t_hat)},
            {"t_max", m.t_max},
            {"fallback_used", m.fallback_used},
            {"pvalues_available", m.pvalues_available},
            {"rejected", ids},
            {"hypotheses", records},
            {"seed", m.seed}};
}

json experiment_json(const ExperimentResult& e) {
    json cells = json::array();
    for (const auto& c : e.cells) {
        cells.push_back({{"L", c.L},
                         {"replications", c.replications},
                         {"failed", c.failed},
                         {"rejection_rate", number_or_null(c.rejection_rate)},
                         {"fdr", number_or_null(c.fdr)},
                         {"power", number_or_null(c.power)}});
    }
    json failures = e.failures;
    return {{"Q", e.Q}, {"Q0", e.Q0}, {"d", e.d}, {"cells", cells}, {"failures", failures}};
}

}  // namespace

ObservationMatrix load_matrix(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError(path + ": cannot open");
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (bytes.size() >= 4 && std::equal(kMagic, kMagic + 4, bytes.begin())) return load_binary(path, bytes);
    return load_csv(path, std::string(bytes.begin(), bytes.end()));
}

void save_matrix_binary(const std::string& path, const Eigen::Ref<const Matrix>& data) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error(path + ": cannot open for writing");
    os.write(kMagic, 4);
    write_u64_le(os, static_cast<std::uint64_t>(data.rows()));
    write_u64_le(os, static_cast<std::uint64_t>(data.cols()));
    for (Eigen::Index r = 0; r < data.rows(); ++r)
        for (Eigen::Index c = 0; c < data.cols(); ++c) write_u64_le(os, std::bit_cast<std::uint64_t>(data(r, c)));
    if (!os) throw Error(path + ": write failed");
}

void save_matrix_csv(const std::string& path, const Eigen::Ref<const Matrix>& data) {
    std::ofstream os(path);
    if (!os) throw Error(path + ": cannot open for writing");
    for (Eigen::Index c = 0; c < data.cols(); ++c) os << (c ? "," : "") << "x" << c;
    os << '\n' << std::setprecision(17);
    for (Eigen::Index r = 0; r < data.rows(); ++r) {
        for (Eigen::Index c = 0; c < data.cols(); ++c) os << (c ? "," : "") << data(r, c);
        os << '\n';
    }
    if (!os) throw Error(path + ": write failed");
}

Layout parse_layout(const json& doc) {
    if (!doc.is_object() || !doc.contains("J") || !doc.contains("G")) {
        throw ValidationError("layout needs integer fields J and G");
    }
    Layout layout;
    layout.J = doc.at("J").get<int>();
    layout.G = doc.at("G").get<int>();
    if (layout.J < 1 || layout.G < 1) throw ValidationError("layout needs J >= 1 and G >= 1");
    layout.columns.assign(static_cast<std::size_t>(layout.J) * layout.G, {});
    std::vector<bool> seen(layout.columns.size(), false);
    const auto name = [](int j, int g) { return "(j=" + std::to_string(j + 1) + ", g=" + std::to_string(g + 1) + ")"; };
    if (doc.contains("columns")) {
        const auto& cols = doc.at("columns");
        if (!cols.is_array() || static_cast<int>(cols.size()) != layout.J) {
            throw ValidationError("layout columns must hold J = " + std::to_string(layout.J) + " modality lists");
        }
        for (int j = 0; j < layout.J; ++j) {
            if (!cols[j].is_array() || static_cast<int>(cols[j].size()) != layout.G) {
                throw ValidationError("modality " + std::to_string(j + 1) + " must list G = " + std::to_string(layout.G) +
                                      " regions");
            }
            for (int g = 0; g < layout.G; ++g) {
                auto list = int_list(cols[j][g], "columns of block " + name(j, g));
                std::sort(list.begin(), list.end());
                layout.columns[static_cast<std::size_t>(j) * layout.G + g] = std::move(list);
                seen[static_cast<std::size_t>(j) * layout.G + g] = true;
            }
        }
    } else if (doc.contains("blocks")) {
        for (const auto& b : doc.at("blocks")) {
            const int j = b.at("j").get<int>() - 1;
            const int g = b.at("g").get<int>() - 1;
            if (j < 0 || j >= layout.J || g < 0 || g >= layout.G) {
                throw ValidationError("layout block " + name(j, g) + " outside J x G");
            }
            const std::size_t idx = static_cast<std::size_t>(j) * layout.G + g;
            if (seen[idx]) throw ValidationError("layout lists block " + name(j, g) + " twice");
            auto list = int_list(b.at("columns"), "columns of block " + name(j, g));
            std::sort(list.begin(), list.end());
            layout.columns[idx] = std::move(list);
            seen[idx] = true;
        }
    } else {
        throw ValidationError("layout needs a 'columns' or 'blocks' field");
    }
    for (std::size_t idx = 0; idx < seen.size(); ++idx) {
        if (!seen[idx]) {
            throw ValidationError("layout is missing block " +
                                  name(static_cast<int>(idx) / layout.G, static_cast<int>(idx) % layout.G));
        }
    }
    validate_layout(layout);
    return layout;
}

Layout load_layout(const std::string& path) {
    try {
        return parse_layout(read_json(path));
    } catch (const json::exception& e) {
        throw ValidationError(path + ": malformed layout: " + e.what());
    }
}

std::vector<Hypothesis> parse_pairs(const json& doc) {
    if (!doc.is_object() || !doc.contains("hypotheses")) throw ValidationError("pairs file needs a 'hypotheses' array");
    std::vector<Hypothesis> out;
    for (const auto& h : doc.at("hypotheses")) {
        Hypothesis hyp;
        hyp.label = h.value("label", std::string());
        for (const auto& p : h.at("pairs")) {
            hyp.pairs.push_back({int_list(p.at("s1"), "s1"), int_list(p.at("s2"), "s2")});
        }
        out.push_back(std::move(hyp));
    }
    return out;
}

std::vector<Hypothesis> load_pairs(const std::string& path) {
    try {
        return parse_pairs(read_json(path));
    } catch (const json::exception& e) {
        throw ValidationError(path + ": malformed pairs file: " + e.what());
    }
}

std::string to_string(Command command) {
    switch (command) {
        case Command::global_test: return "global-test";
        case Command::multiple_test: return "multiple-test";
        case Command::simulate: return "simulate";
    }
    return "global-test";
}

Command parse_command(const std::string& text) {
    if (text == "global-test") return Command::global_test;
    if (text == "multiple-test") return Command::multiple_test;
    if (text == "simulate") return Command::simulate;
    throw ValidationError("unknown command '" + text + "'");
}

std::string to_string(ReportFormat format) {
    switch (format) {
        case ReportFormat::json: return "json";
        case ReportFormat::csv: return "csv";
        case ReportFormat::text: return "text";
    }
    return "json";
}

ReportFormat parse_format(const std::string& text) {
    if (text == "json") return ReportFormat::json;
    if (text == "csv") return ReportFormat::csv;
    if (text == "text") return ReportFormat::text;
    throw ValidationError("unknown format '" + text + "' (expected json, csv, text)");
}

void apply_config(RunConfig& c, const json& doc) {
    if (!doc.is_object()) throw ValidationError("configuration must be a JSON object");
    try {
        for (auto it = doc.begin(); it != doc.end(); ++it) {
            const std::string& k = it.key();
            const json& v = it.value();
            if (k == "command") c.command = parse_command(v.get<std::string>());
            else if (k == "data") c.data = v.get<std::string>();
            else if (k == "layout") c.layout = v.get<std::string>();
            else if (k == "pairs") c.pairs = v.get<std::string>();
            else if (k == "problem") c.problem = parse_problem(v.get<std::string>());
            else if (k == "B") c.options.B = v.get<int>();
            else if (k == "K") c.options.K = v.get<int>();
            else if (k == "block-sizes") c.options.block_sizes = parse_int_list(v, "block-sizes");
            else if (k == "L") c.options.L = parse_int_list(v, "L");
            else if (k == "N") c.options.N = v.get<int>();
            else if (k == "alpha") c.options.alpha = v.get<double>();
            else if (k == "seed") c.options.seed = v.get<std::uint64_t>();
            else if (k == "threads") c.options.threads = v.get<int>();
            else if (k == "estimator") c.options.estimator = parse_estimator(v.get<std::string>());
            else if (k == "dist-variance") c.options.dist_variance = parse_dist_variance(v.get<std::string>());
            else if (k == "out") c.out = v.get<std::string>();
            else if (k == "format") c.format = parse_format(v.get<std::string>());
            else if (k == "scenario") c.scenario = parse_scenario(v.get<std::string>());
            else if (k == "test") c.test = parse_test_kind(v.get<std::string>());
            else if (k == "J") c.J = v.get<int>();
            else if (k == "G") c.G = v.get<int>();
            else if (k == "V") c.V = v.get<int>();
            else if (k == "n") c.n = v.get<int>();
            else if (k == "reps") c.replications = v.get<int>();
            else throw ValidationError("unknown configuration key '" + k + "'");
        }
    } catch (const json::exception& e) {
        throw ValidationError(std::string("configuration value has the wrong type: ") + e.what());
    }
}

RunConfig load_run_config(const std::string& path, RunConfig base) {
    apply_config(base, read_json(path));
    return base;
}

void validate_run_config(const RunConfig& c) {
    validate_options(c.options);
    if (c.options.K < 0) throw ValidationError("K must be >= 0 (0 selects the monolithic engine)");
    if (c.command == Command::simulate) {
        validate_sim_config(to_sim_config(c));
        return;
    }
    if (c.data.empty()) throw ValidationError("--data is required");
    if (c.problem == Problem::custom) {
        if (c.pairs.empty()) throw ValidationError("problem custom requires --pairs");
    } else if (c.layout.empty()) {
        throw ValidationError("problem " + to_string(c.problem) + " requires --layout");
    }
}

json to_json(const RunConfig& c) {
    json j = {{"command", to_string(c.command)},
              {"B", c.options.B},
              {"K", c.options.K},
              {"L", c.options.L},
              {"N", c.options.N},
              {"alpha", c.options.alpha},
              {"seed", c.options.seed},
              {"threads", c.options.threads},
              {"estimator", to_string(c.options.estimator)},
              {"format", to_string(c.format)}};
    if (c.options.K > 0 || !c.options.block_sizes.empty()) {
        j["dist-variance"] = to_string(c.options.dist_variance);
        j["block-sizes"] = c.options.block_sizes;
    }
    if (c.command == Command::simulate) {
        j["scenario"] = to_string(c.scenario);
        j["test"] = to_string(c.test);
        j["problem"] = to_string(c.problem);
        j["J"] = c.J;
        j["G"] = c.G;
        j["V"] = c.V;
        j["n"] = c.n;
        j["reps"] = c.replications;
    } else {
        j["data"] = c.data;
        j["problem"] = to_string(c.problem);
        if (!c.layout.empty()) j["layout"] = c.layout;
        if (!c.pairs.empty()) j["pairs"] = c.pairs;
    }
    return j;
}

SimConfig to_sim_config(const RunConfig& c) {
    SimConfig s;
    s.J = c.J;
    s.G = c.G;
    s.V = c.V;
    s.n = c.n;
    s.scenario = c.scenario;
    s.problem = c.problem;
    s.test = c.test;
    s.options = c.options;
    s.replications = c.replications;
    s.seed = c.options.seed;
    return s;
}

json to_json(const Report& r) {
    json out;
    out["config"] = to_json(r.config);
    out["engine"] = r.K == 0 ? "monolithic" : "distributed";
    if (r.K > 0) out["K"] = r.K;
    out["timing_seconds"] = r.seconds;
    out["notes"] = r.notes;
    if (r.Q > 0) {
        out["Q"] = r.Q;
        out["d"] = r.d;
    }
    if (!r.global.empty()) {
        json g = json::array();
        for (const auto& x : r.global) g.push_back(global_json(x));
        out["global"] = g;
        if (r.K > 0) out["sampler_available"] = r.sampler_available;
    }
    if (!r.multiple.empty()) {
        json m = json::array();
        for (const auto& x : r.multiple) m.push_back(multiple_json(x));
        out["multiple"] = m;
    }
    if (r.experiment) out["experiment"] = experiment_json(*r.experiment);
    return out;
}

std::string canonical_json(const json& value) {
    std::string out;
    dump(value, out);
    out += '\n';
    return out;
}

std::string render_csv(const Report& r) {
    if (r.experiment) return format_experiment_csv(*r.experiment);
    std::ostringstream os;
    os << std::setprecision(17);
    if (!r.multiple.empty()) {
        os << "L,q,label,statistic,L_used,raw_pvalue,pvalue,score,rejected\n";
        for (const auto& m : r.multiple) {
            std::vector<bool> rejected(m.marginals.size(), false);
            for (int q : m.rejected) rejected[q] = true;
            for (const auto& x : m.marginals) {
                os << m.L << ',' << x.q + 1 << ",\"" << x.label << "\"," << x.statistic << ',' << x.L_used << ','
                   << x.raw_pvalue << ',' << x.pvalue << ',' << x.score << ',' << (rejected[x.q] ? 1 : 0) << '\n';
            }
        }
        return os.str();
    }
    os << "L,statistic,critical_value,mc_pvalue,N,alpha,reject\n";
    for (const auto& g : r.global) {
        os << g.L << ',' << g.statistic << ',' << g.critical_value << ',' << g.mc_pvalue << ',' << g.N << ','
           << g.alpha << ',' << (g.reject ? 1 : 0) << '\n';
    }
    return os.str();
}

std::string render_text(const Report& r) {
    if (r.experiment) return format_experiment_text(*r.experiment);
    std::ostringstream os;
    os << to_string(r.config.command) << ", problem (" << to_string(r.config.problem) << "), "
       << (r.K == 0 ? std::string("monolithic") : "distributed K=" + std::to_string(r.K)) << ", Q=" << r.Q
       << ", d=" << r.d << "\n";
    for (const auto& note : r.notes) os << "note: " << note << "\n";
    os << std::fixed << std::setprecision(4);
    for (const auto& g : r.global) {
        os << "L=" << g.L << "  W=" << g.statistic << "  cv=" << g.critical_value << "  p=" << g.mc_pvalue << "  "
           << (g.reject ? "reject" : "do not reject") << "\n";
    }
    for (const auto& m : r.multiple) {
        os << "\nL=" << m.L << "  t_hat=" << m.t_hat << (m.fallback_used ? " (fallback)" : "") << "  rejected "
           << m.rejected.size() << " of " << m.marginals.size() << "\n";
        os << std::left << std::setw(6) << "q" << std::setw(12) << "label" << std::right << std::setw(12) << "W"
           << std::setw(12) << "p" << std::setw(10) << "V" << "  reject\n";
        std::vector<bool> rejected(m.marginals.size(), false);
        for (int q : m.rejected) rejected[q] = true;
        for (const auto& x : m.marginals) {
            os << std::left << std::setw(6) << x.q + 1 << std::setw(12) << x.label << std::right << std::setw(12)
               << x.statistic << std::setw(12) << x.pvalue << std::setw(10) << x.score << "  "
               << (rejected[x.q] ? "*" : "") << "\n";
        }
    }
    return os.str();
}

void emit_report(const Report& report, const std::string& path, ReportFormat format) {
    std::string text;
    switch (format) {
        case ReportFormat::json: text = canonical_json(to_json(report)); break;
        case ReportFormat::csv: text = render_csv(report); break;
        case ReportFormat::text: text = render_text(report); break;
    }
    if (path == "-" || path.empty()) {
        std::cout << text;
        std::cout.flush();
        return;
    }
    std::ofstream os(path);
    if (!os) throw Error(path + ": cannot open for writing");
    os << text;
    if (!os) throw Error(path + ": write failed");
}

}  // namespace pcov
