#include "pcov/io.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <random>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path temp_file(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "pcov_io_tests";
    fs::create_directories(dir);
    return dir / name;
}

void write_text(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::string load_error(const fs::path& p) {
    try {
        pcov::load_matrix(p.string());
    } catch (const pcov::LoadError& e) {
        return e.what();
    }
    return "";
}

pcov::Report global_report() {
    pcov::Report r;
    r.config.data = "x.csv";
    r.config.layout = "layout.json";
    r.config.options.K = 0;
    pcov::GlobalTestResult g;
    g.statistic = 0.1;
    g.critical_value = std::nan("");
    r.global.push_back(g);
    r.Q = 1;
    r.d = 2;
    return r;
}

}  // namespace

TEST(LoadMatrix, Csv) {
    const auto p = temp_file("small.csv");
    write_text(p, "a,b,c\n1,2,3\n4.5, -6e-1 ,7\n\n");
    const auto x = pcov::load_matrix(p.string());
    ASSERT_EQ(x.rows(), 2);
    ASSERT_EQ(x.cols(), 3);
    EXPECT_EQ(x(1, 0), 4.5);
    EXPECT_EQ(x(1, 1), -0.6);
}

TEST(LoadMatrix, CsvErrorsCarryPosition) {
    const auto p = temp_file("bad.csv");
    write_text(p, "a,b\n1,2\n3\n");
    EXPECT_NE(load_error(p).find("line 3"), std::string::npos);
    write_text(p, "a,b\n1,2\n3,x\n");
    const std::string msg = load_error(p);
    EXPECT_NE(msg.find("line 3, column 2"), std::string::npos) << msg;
    write_text(p, "a,b\n1,nan\n");
    EXPECT_NE(load_error(p).find("non-finite"), std::string::npos);
}

TEST(LoadMatrix, BinaryOneByOne) {
    const auto p = temp_file("one.pcv");
    std::string bytes = "PCV1";
    const auto put = [&](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
    };
    put(1);
    put(1);
    put(std::bit_cast<std::uint64_t>(0.5));
    write_text(p, bytes);
    const auto x = pcov::load_matrix(p.string());
    ASSERT_EQ(x.rows(), 1);
    ASSERT_EQ(x.cols(), 1);
    EXPECT_EQ(x(0, 0), 0.5);

    write_text(p, bytes.substr(0, bytes.size() - 3));
    const std::string msg = load_error(p);
    EXPECT_NE(msg.find("expected 8"), std::string::npos) << msg;
    EXPECT_NE(msg.find("found 5"), std::string::npos) << msg;
}

TEST(LoadMatrix, BinaryRoundTripIsExact) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> z;
    pcov::Matrix x(7, 5);
    for (int i = 0; i < 7; ++i)
        for (int j = 0; j < 5; ++j) x(i, j) = z(rng) * std::pow(10.0, j * 40 - 80);
    const auto p = temp_file("rt.pcv");
    pcov::save_matrix_binary(p.string(), x);
    EXPECT_EQ(pcov::load_matrix(p.string()), x);
    const auto c = temp_file("rt.csv");
    pcov::save_matrix_csv(c.string(), x);
    EXPECT_EQ(pcov::load_matrix(c.string()), x);
}

TEST(Layout, ParseForms) {
    const auto l = pcov::parse_layout(json::parse(R"({"J":2,"G":1,"columns":[[[0,1]],[[2,3]]]})"));
    EXPECT_EQ(l.block(1, 0), (std::vector<int>{2, 3}));
    EXPECT_GE(l.min_dimension(), 4);
    const auto b = pcov::parse_layout(
        json::parse(R"({"J":2,"G":1,"blocks":[{"j":2,"g":1,"columns":[3,2]},{"j":1,"g":1,"columns":[0,1]}]})"));
    EXPECT_EQ(b.columns, l.columns);
}

TEST(Layout, Errors) {
    try {
        pcov::parse_layout(json::parse(R"({"J":2,"G":1,"columns":[[[0,1]],[[1,2]]]})"));
        FAIL();
    } catch (const pcov::ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("j=1, g=1"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("j=2, g=1"), std::string::npos) << e.what();
    }
    EXPECT_THROW(pcov::parse_layout(json::parse(R"({"J":2,"G":2,"columns":[[[0],[1]],[[2]]]})")),
                 pcov::ValidationError);
    EXPECT_THROW(pcov::parse_layout(json::parse(R"({"J":2,"G":1,"blocks":[{"j":1,"g":1,"columns":[0]}]})")),
                 pcov::ValidationError);
}

TEST(Pairs, Parse) {
    const auto hs = pcov::parse_pairs(
        json::parse(R"({"hypotheses":[{"label":"h","pairs":[{"s1":[0],"s2":[1,2]}]},{"pairs":[{"s1":[3],"s2":[4]}]}]})"));
    ASSERT_EQ(hs.size(), 2u);
    EXPECT_EQ(hs[0].label, "h");
    EXPECT_EQ(hs[0].pairs[0].s2, (std::vector<int>{1, 2}));
}

TEST(RunConfig, FileKeysMatchFlagsAndValidate) {
    pcov::RunConfig c;
    pcov::apply_config(c, json::parse(R"({"command":"multiple-test","data":"x","layout":"l","B":6,"K":0,"L":"1,3",
        "N":400,"alpha":0.1,"seed":9,"threads":2,"estimator":"v","dist-variance":"mixed","block-sizes":[10,10],
        "out":"r.json","format":"csv","problem":"b"})"));
    EXPECT_EQ(c.command, pcov::Command::multiple_test);
    EXPECT_EQ(c.options.B, 6);
    EXPECT_EQ(c.options.L, (std::vector<int>{1, 3}));
    EXPECT_EQ(c.options.estimator, pcov::Estimator::v_statistic);
    EXPECT_EQ(c.options.dist_variance, pcov::DistVariance::mixed);
    EXPECT_EQ(c.options.block_sizes, (std::vector<int>{10, 10}));
    EXPECT_EQ(c.format, pcov::ReportFormat::csv);
    EXPECT_NO_THROW(pcov::validate_run_config(c));
    EXPECT_THROW(pcov::apply_config(c, json::parse(R"({"bogus":1})")), pcov::ValidationError);
    EXPECT_THROW(pcov::apply_config(c, json::parse(R"({"B":"five"})")), pcov::ValidationError);

    pcov::RunConfig custom;
    custom.data = "x";
    custom.problem = pcov::Problem::custom;
    EXPECT_THROW(pcov::validate_run_config(custom), pcov::ValidationError);
    custom.pairs = "p.json";
    EXPECT_NO_THROW(pcov::validate_run_config(custom));

    // Every key written by to_json is accepted back.
    pcov::RunConfig back;
    pcov::apply_config(back, pcov::to_json(c));
    EXPECT_EQ(pcov::to_json(back), pcov::to_json(c));
}

TEST(Report, CanonicalJson) {
    const json v = {{"b", 1}, {"a", {0.1, std::nan(""), 1e300}}, {"c", "x"}};
    EXPECT_EQ(pcov::canonical_json(v), "{\"a\":[0.10000000000000001,null,1.0000000000000001e+300],\"b\":1,\"c\":\"x\"}\n");
}

TEST(Report, GlobalOnlyHasNoHypothesisSection) {
    const json j = pcov::to_json(global_report());
    EXPECT_TRUE(j.contains("global"));
    EXPECT_FALSE(j.contains("multiple"));
    EXPECT_EQ(j["engine"], "monolithic");
    EXPECT_NE(pcov::canonical_json(j).find("\"critical_value\":null"), std::string::npos);
}

TEST(Report, EmptyRejectionSet) {
    pcov::Report r = global_report();
    r.global.clear();
    pcov::MultipleTestResult m;
    m.marginals.push_back({0, "(1)", 0.2, 0.5, 0.5, 0.0, 1});
    r.multiple.push_back(m);
    const std::string text = pcov::canonical_json(pcov::to_json(r));
    EXPECT_NE(text.find("\"rejected\":[]"), std::string::npos) << text;
    EXPECT_NE(pcov::render_csv(r).find("\"(1)\""), std::string::npos);
}

TEST(Report, EmitToFile) {
    const auto p = temp_file("report.json");
    pcov::emit_report(global_report(), p.string(), pcov::ReportFormat::json);
    std::ifstream in(p);
    const json j = json::parse(in);
    EXPECT_EQ(j["config"]["data"], "x.csv");
    EXPECT_THROW(pcov::emit_report(global_report(), "/nonexistent-dir/r.json", pcov::ReportFormat::json), pcov::Error);
}
