#pragma once

#include "pcov/distributed.hpp"
#include "pcov/global_test.hpp"
#include "pcov/hypothesis.hpp"
#include "pcov/multiple_test.hpp"
#include "pcov/simulation.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace pcov {

/// CSV with a header row (rows are subjects), or the binary layout
/// "PCV1" | u64 n | u64 p | n*p little-endian float64, row-major.
ObservationMatrix load_matrix(const std::string& path);
void save_matrix_binary(const std::string& path, const Eigen::Ref<const Matrix>& data);
void save_matrix_csv(const std::string& path, const Eigen::Ref<const Matrix>& data);

/// {"J": 2, "G": 1, "columns": [[[0, 1]], [[2, 3]]]} with columns[j][g], or
/// {"J": 2, "G": 1, "blocks": [{"j": 1, "g": 1, "columns": [0, 1]}, ...]} with
/// one-based j and g.
Layout parse_layout(const nlohmann::json& doc);
Layout load_layout(const std::string& path);

/// {"hypotheses": [{"label": "...", "pairs": [{"s1": [...], "s2": [...]}]}]}
std::vector<Hypothesis> parse_pairs(const nlohmann::json& doc);
std::vector<Hypothesis> load_pairs(const std::string& path);

enum class Command { global_test, multiple_test, simulate };
enum class ReportFormat { json, csv, text };

std::string to_string(Command command);
Command parse_command(const std::string& text);
std::string to_string(ReportFormat format);
ReportFormat parse_format(const std::string& text);

struct RunConfig {
    Command command = Command::global_test;
    std::string data;
    std::string layout;
    std::string pairs;
    Problem problem = Problem::a;
    TestOptions options;  // options.K = 0 selects the monolithic engine
    std::string out = "-";
    ReportFormat format = ReportFormat::json;
    // simulate only
    Scenario scenario = Scenario::null;
    TestKind test = TestKind::global;
    int J = 3;
    int G = 16;
    int V = 1600;
    int n = 300;
    int replications = 100;
};

/// Overwrites the fields present in `doc`; keys match the long CLI flags.
void apply_config(RunConfig& config, const nlohmann::json& doc);
RunConfig load_run_config(const std::string& path, RunConfig base = {});
void validate_run_config(const RunConfig& config);
nlohmann::json to_json(const RunConfig& config);

SimConfig to_sim_config(const RunConfig& config);

struct Report {
    RunConfig config;
    std::vector<GlobalTestResult> global;
    std::vector<MultipleTestResult> multiple;
    std::optional<ExperimentResult> experiment;
    int Q = 0;
    int d = 0;
    int K = 0;  // blocks actually used; 0 for the monolithic engine
    bool sampler_available = true;
    double seconds = 0.0;
    std::vector<std::string> notes;
};

nlohmann::json to_json(const Report& report);

/// Sorted keys, 17 significant digits, NaN and infinities as null.
std::string canonical_json(const nlohmann::json& value);

std::string render_csv(const Report& report);
std::string render_text(const Report& report);

/// Writes to `path`, or to stdout when path is "-".
void emit_report(const Report& report, const std::string& path, ReportFormat format);

}  // namespace pcov
